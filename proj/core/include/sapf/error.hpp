#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sapf {

/// Base for every error raised by the simulator and analyzer.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mains space vector is (0, 0); the grid angle is undefined.
class ZeroMainsVector : public Error {
public:
    ZeroMainsVector() : Error("zero mains vector") {}
};

class PvSolveFailed : public Error {
public:
    explicit PvSolveFailed(const std::string& detail) : Error("pv solve failed: " + detail) {}
};

class DcLinkCollapsed : public Error {
public:
    DcLinkCollapsed() : Error("dc link collapsed") {}
};

class NoFundamental : public Error {
public:
    NoFundamental() : Error("no fundamental") {}
};

/// Analysis window does not hold an integer number of fundamental cycles
/// (or holds fewer than required).
class AsynchronousWindow : public Error {
public:
    AsynchronousWindow(const std::string& detail, std::size_t required_cycles)
        : Error("asynchronous window: " + detail), required_cycles_(required_cycles) {}

    std::size_t required_cycles() const noexcept { return required_cycles_; }

private:
    std::size_t required_cycles_;
};

/// Scenario rejected before any stepping; `key_path()` names the offending entry.
class ValidationError : public Error {
public:
    ValidationError(std::string key_path, const std::string& message)
        : Error(key_path + ": " + message), key_path_(std::move(key_path)) {}

    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

/// A component failed while the scenario was running.
class RuntimeAbort : public Error {
public:
    RuntimeAbort(double time, std::string component, const std::string& message)
        : Error("t=" + std::to_string(time) + " s, " + component + ": " + message),
          time_(time), component_(std::move(component)) {}

    double time() const noexcept { return time_; }
    const std::string& component() const noexcept { return component_; }

private:
    double time_;
    std::string component_;
};

}  // namespace sapf
