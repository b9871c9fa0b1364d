#pragma once

#include "bubbler/params.hpp"
#include "json.hpp"

namespace bubbler {

using Json = nlohmann::ordered_json;

Json to_json(const Point& x);
Json to_json(const PointList& xs);
Json to_json(const ProblemSpec& s);
Json to_json(const BubbleConfig& c);

Point point_from_json(const Json& j);
PointList points_from_json(const Json& j);
ProblemSpec spec_from_json(const Json& j);
BubbleConfig config_from_json(const Json& j);

}  // namespace bubbler
