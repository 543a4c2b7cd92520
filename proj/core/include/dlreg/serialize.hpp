#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlreg/auxiliary.hpp"
#include "dlreg/data.hpp"
#include "dlreg/primary.hpp"
#include "dlreg/simulation.hpp"

namespace dlreg {

using Json = nlohmann::json;

Json to_json(const PrimaryFit& fit);
PrimaryFit primary_fit_from_json(const Json& j);

Json to_json(const ParametricAuxFit& fit);
Json to_json(const SemiparAuxFit& fit);
Json to_json(const AuxFit& fit);

Json to_json(const std::vector<Violation>& violations);

Json to_json(const ScenarioConfig& cfg);
/// Fields missing from `j` keep their value in `base`.
ScenarioConfig scenario_from_json(const Json& j, ScenarioConfig base = {});

/// Wall time is left out so repeated runs produce identical bytes.
Json to_json(const MCReport& report);

/// Number rendered with `digits` significant digits.
std::string format_sig(double v, int digits = 4);

/// Coefficient, estimate, SE and p-value columns.
std::string render_table(const PrimaryFit& fit);
std::string render_table(const MCReport& report);

}  // namespace dlreg
