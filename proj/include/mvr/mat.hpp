#pragma once

#include <Eigen/Core>

namespace mvr {

// Row-major dense matrices throughout: image grids are (row=v, col=u) and
// token matrices are (token, channel), both naturally row-major.
template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatXd = MatX<double>;
using MatXf = MatX<float>;
using MatXi = MatX<int32_t>;

}  // namespace mvr
