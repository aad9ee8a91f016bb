#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pgs/core/camera.hpp"
#include "pgs/core/gaussian_set.hpp"
#include "pgs/core/math.hpp"

namespace pgs {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kCov2dLowPass = 0.3;  // px^2 added to both eigen directions

template <class T>
struct ProjectedGaussian {
    Vec2<T> mean2d;      // pixels
    Mat2<T> cov2d;       // pixels^2, symmetric, eigenvalues >= low-pass floor
    T view_depth = T(0); // camera-space z
    std::int32_t source_index = -1;
};

// Perspective Jacobian of (fx x/z + cx, fy y/z + cy) at camera-space t.
template <class T>
inline Mat23<T> perspective_jacobian(const Vec3<T>& t, T fx, T fy) {
    const T iz = T(1) / t[2];
    const T iz2 = iz * iz;
    Mat23<T> j;
    j << fx * iz, T(0), -fx * t[0] * iz2, T(0), fy * iz, -fy * t[1] * iz2;
    return j;
}

// EWA projection of every primitive in front of the near plane, sorted by
// ascending view depth with ties broken by source index.
template <class T>
inline std::vector<ProjectedGaussian<T>> project(const GaussianSet<T>& set, const Camera& cam) {
    const Mat3<T> rot = cam.rotation().template cast<T>();
    const Vec3<T> trans = cam.translation().template cast<T>();
    const T fx = T(cam.fx), fy = T(cam.fy), cx = T(cam.cx), cy = T(cam.cy);

    std::vector<ProjectedGaussian<T>> out;
    out.reserve(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Vec3<T> t = rot * set.mean(i) + trans;
        if (t[2] <= T(kNearPlane)) continue;

        ProjectedGaussian<T> pg;
        pg.mean2d = Vec2<T>(fx * t[0] / t[2] + cx, fy * t[1] / t[2] + cy);
        const Mat23<T> m = perspective_jacobian(t, fx, fy) * rot;
        pg.cov2d = m * set.covariance(i) * m.transpose();
        pg.cov2d(0, 0) += T(kCov2dLowPass);
        pg.cov2d(1, 1) += T(kCov2dLowPass);
        pg.view_depth = t[2];
        pg.source_index = std::int32_t(i);
        out.push_back(pg);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.view_depth != b.view_depth) return a.view_depth < b.view_depth;
        return a.source_index < b.source_index;
    });
    return out;
}

}  // namespace pgs
