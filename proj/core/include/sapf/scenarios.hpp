#pragma once

// Bundled scenarios.

#include "sapf/engine.hpp"

namespace sapf::scenarios {

/// Rectifier plus R-L load on a 415 V grid; PV-fed filter enabled at 0.2 s,
/// irradiance steps 1000 → 600 W/m² at 0.4 s, run to 0.6 s.
engine::Scenario demo();

/// Rectifier alone on the grid (no filter), for baseline harmonic checks.
engine::Scenario rectifier_only(double l_dc);

}  // namespace sapf::scenarios
