#pragma once

#include <Eigen/Core>

namespace dgro {

using Scalar = double;

using Vec = Eigen::VectorX<Scalar>;
using Mat = Eigen::MatrixX<Scalar>;

}  // namespace dgro
