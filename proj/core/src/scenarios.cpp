#include "sapf/scenarios.hpp"

namespace sapf::scenarios {

engine::Scenario demo() {
    engine::Scenario sc;
    sc.system.rectifier = engine::RectifierParams{20.0, 50e-3, 0.5e-3};
    sc.system.linear = engine::LinearLoadParams{60.0, 0.2};
    engine::SapfParams sapf;
    sapf.enabled = false;
    sapf.mode = engine::InjectionMode::ideal;
    sc.system.sapf = sapf;
    engine::PvParams pv;
    pv.array.n_parallel = 4;
    sc.system.pv = pv;
    sc.sim = {5e-6, 0.6};
    sc.events = {{0.2, "sapf.enabled", 1.0}, {0.4, "pv.irradiance", 600.0}};
    return sc;
}

engine::Scenario rectifier_only(double l_dc) {
    engine::Scenario sc;
    sc.system.rectifier = engine::RectifierParams{20.0, l_dc, 0.0};
    sc.sim = {5e-6, 0.3};
    return sc;
}

}  // namespace sapf::scenarios
