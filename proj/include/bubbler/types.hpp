#pragma once

#include <Eigen/Core>
#include <vector>

namespace bubbler {

using Point = Eigen::Vector2d;
using PointList = std::vector<Point>;

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace bubbler
