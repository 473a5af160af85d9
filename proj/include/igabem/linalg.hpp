#pragma once

#include <Eigen/Dense>

namespace igabem {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

}  // namespace igabem
