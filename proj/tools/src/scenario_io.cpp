#include "sapf/cli/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sapf/error.hpp"

namespace sapf::cli {

namespace {

using nlohmann::json;

const engine::ParameterInfo* find_info(std::string_view path) {
    for (const auto& p : engine::parameters()) {
        if (p.path == path) return &p;
    }
    return nullptr;
}

bool is_group(std::string_view prefix) {
    for (const auto& p : engine::parameters()) {
        if (p.path.size() > prefix.size() && p.path.compare(0, prefix.size(), prefix) == 0 &&
            p.path[prefix.size()] == '.') {
            return true;
        }
    }
    return false;
}

void ensure_section(engine::Scenario& sc, std::string_view prefix) {
    auto& sys = sc.system;
    if (prefix == "loads.rectifier" && !sys.rectifier) sys.rectifier.emplace();
    if (prefix == "loads.linear" && !sys.linear) sys.linear.emplace();
    if (prefix == "sapf" && !sys.sapf) sys.sapf.emplace();
    if (prefix == "pv" && !sys.pv) sys.pv.emplace();
}

double choice_index(const engine::ParameterInfo& info, std::string_view label) {
    const auto it = std::find(info.choices.begin(), info.choices.end(), label);
    if (it == info.choices.end()) {
        std::string allowed;
        for (const auto& c : info.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw ValidationError(info.path, "unknown value '" + std::string(label) + "' (expected " + allowed + ")");
    }
    return static_cast<double>(it - info.choices.begin());
}

double leaf_value(const engine::ParameterInfo& info, const json& v, const std::string& key) {
    switch (info.kind) {
        case engine::ValueKind::boolean:
            if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
            break;
        case engine::ValueKind::choice:
            if (v.is_string()) return choice_index(info, v.get<std::string>());
            break;
        case engine::ValueKind::integer:
            if (v.is_number_integer()) return v.get<double>();
            if (v.is_number()) throw ValidationError(key, "expects an integer");
            break;
        case engine::ValueKind::real:
            if (v.is_number()) return v.get<double>();
            break;
    }
    throw ValidationError(key, "unexpected value type " + std::string(v.type_name()));
}

void walk(engine::Scenario& sc, const json& obj, const std::string& prefix) {
    if (!obj.is_object()) throw ValidationError(prefix, "expected an object");
    ensure_section(sc, prefix);
    for (const auto& [key, value] : obj.items()) {
        const std::string path = prefix + "." + key;
        if (value.is_object()) {
            if (!is_group(path)) throw ValidationError(path, "unknown key");
            walk(sc, value, path);
            continue;
        }
        const engine::ParameterInfo* info = find_info(path);
        if (info == nullptr) throw ValidationError(path, "unknown key");
        engine::set_parameter(sc, path, leaf_value(*info, value, path));
    }
}

double event_value(const json& v, const std::string& path, const std::string& key) {
    const engine::ParameterInfo* info = find_info(path);
    if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && info != nullptr && info->kind == engine::ValueKind::choice) {
        return choice_index(*info, v.get<std::string>());
    }
    throw ValidationError(key, "expects a number or boolean");
}

void put(json& root, const std::string& path, json value) {
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = path.find('.', start);
        const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

}  // namespace

engine::Scenario parse_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError("<file>", std::string("malformed json: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("<root>", "expected an object");

    engine::Scenario sc;
    for (const auto& [key, value] : doc.items()) {
        if (key == "format_version") {
            if (!value.is_number_integer() || value.get<int>() != kFormatVersion) {
                throw ValidationError(key, "unsupported format version (expected " +
                                               std::to_string(kFormatVersion) + ")");
            }
        } else if (key == "meta") {
            // free-form, ignored
        } else if (key == "grid" || key == "sapf" || key == "pv" || key == "sim") {
            walk(sc, value, key);
        } else if (key == "loads") {
            if (!value.is_object()) throw ValidationError(key, "expected an object");
            for (const auto& [load, body] : value.items()) {
                if (load != "rectifier" && load != "linear") throw ValidationError("loads." + load, "unknown key");
                walk(sc, body, "loads." + load);
            }
        } else if (key == "events") {
            if (!value.is_array()) throw ValidationError(key, "expected an array");
            for (std::size_t i = 0; i < value.size(); ++i) {
                const std::string base = "events[" + std::to_string(i) + "]";
                const json& ev = value[i];
                if (!ev.is_object()) throw ValidationError(base, "expected an object");
                engine::Event e;
                bool has_t = false, has_path = false, has_value = false;
                for (const auto& [k, v] : ev.items()) {
                    if (k == "t" && v.is_number()) {
                        e.time = v.get<double>();
                        has_t = true;
                    } else if (k == "path" && v.is_string()) {
                        e.path = v.get<std::string>();
                        has_path = true;
                    } else if (k == "value") {
                        has_value = true;
                    } else {
                        throw ValidationError(base + "." + k, k == "t" || k == "path" ? "wrong type" : "unknown key");
                    }
                }
                if (!has_t || !has_path || !has_value) throw ValidationError(base, "needs t, path and value");
                e.value = event_value(ev.at("value"), e.path, base + ".value");
                sc.events.push_back(std::move(e));
            }
        } else if (key == "record") {
            if (!value.is_array()) throw ValidationError(key, "expected an array");
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (!value[i].is_string()) {
                    throw ValidationError("record[" + std::to_string(i) + "]", "expected a channel name");
                }
                sc.record.push_back(value[i].get<std::string>());
            }
        } else {
            throw ValidationError(key, "unknown key");
        }
    }
    return sc;
}

engine::Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path.string(), "cannot read scenario file");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str());
}

std::string dump_scenario(const engine::Scenario& sc) {
    json root = json::object();
    root["format_version"] = kFormatVersion;
    for (const auto& info : engine::parameters()) {
        double v = 0.0;
        try {
            v = engine::get_parameter(sc, info.path);
        } catch (const ValidationError&) {
            continue;  // section absent
        }
        switch (info.kind) {
            case engine::ValueKind::real: put(root, info.path, v); break;
            case engine::ValueKind::integer: put(root, info.path, static_cast<std::int64_t>(v)); break;
            case engine::ValueKind::boolean: put(root, info.path, v != 0.0); break;
            case engine::ValueKind::choice: put(root, info.path, info.choices.at(static_cast<std::size_t>(v))); break;
        }
    }
    json events = json::array();
    for (const auto& e : sc.events) events.push_back({{"t", e.time}, {"path", e.path}, {"value", e.value}});
    root["events"] = std::move(events);
    root["record"] = sc.record;
    return root.dump(2) + "\n";
}

double parse_parameter_value(std::string_view path, std::string_view token) {
    if (token == "true") return 1.0;
    if (token == "false") return 0.0;
    double v = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec == std::errc() && end == token.data() + token.size()) return v;
    const engine::ParameterInfo* info = find_info(path);
    if (info != nullptr && info->kind == engine::ValueKind::choice) return choice_index(*info, token);
    throw ValidationError(std::string(path), "cannot parse value '" + std::string(token) + "'");
}

}  // namespace sapf::cli
