#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>

namespace pgs {

template <class T> using Vec2 = Eigen::Matrix<T, 2, 1>;
template <class T> using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T> using Vec4 = Eigen::Matrix<T, 4, 1>;
template <class T> using Mat2 = Eigen::Matrix<T, 2, 2>;
template <class T> using Mat3 = Eigen::Matrix<T, 3, 3>;
template <class T> using Mat4 = Eigen::Matrix<T, 4, 4>;
template <class T> using Mat23 = Eigen::Matrix<T, 2, 3>;

template <class T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <class T>
inline T logit(T p) {
    return std::log(p / (T(1) - p));
}

// Logits are kept in [-12, 12] so sigmoid stays strictly inside (0, 1)
// in both float and double.
template <class T>
inline constexpr T kLogitClamp = T(12);

template <class T>
inline T clamp_logit(T x) {
    return std::clamp(x, -kLogitClamp<T>, kLogitClamp<T>);
}

// Rotation matrix from a quaternion given as (w, x, y, z). The quaternion
// is normalized here, so callers may pass non-unit storage.
template <class T>
inline Mat3<T> quat_to_rotation(T w, T x, T y, T z) {
    const T n = std::sqrt(w * w + x * x + y * y + z * z);
    w /= n;
    x /= n;
    y /= n;
    z /= n;
    Mat3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
        T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
        T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

}  // namespace pgs
