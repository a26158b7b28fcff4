#pragma once

#include <json.hpp>

#include "poolattn/accounting.hpp"
#include "poolattn/bench.hpp"
#include "poolattn/gradcheck.hpp"
#include "poolattn/network.hpp"
#include "poolattn/pool_unit.hpp"

namespace poolattn::cli {

using nlohmann::json;

json to_json(const CostReport& r);
json to_json(const GradCheckReport& r);
json to_json(const CheckConfig& c);
json to_json(const BenchReport& r);
json to_json(const PyramidSpec& s);
json to_json(const TrainedReport& r);

// Stamps the library version into a report object.
json versioned(json j);

}  // namespace poolattn::cli
