#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pgs/core/camera.hpp"
#include "pgs/core/gaussian_set.hpp"
#include "pgs/core/knn.hpp"
#include "pgs/densify/densify.hpp"
#include "pgs/render/rasterizer.hpp"

namespace pgs {

template <class T>
struct ReinitGateResult {
    T gamma = T(0);
    bool fire = false;
};

// Sparse-initialization indicator: the fraction of the largest-quartile
// primitives (by longest-axis extent, nearest-rank Q3) that sit in the
// medium-sensitivity band. Evaluated once, right after warm-up.
template <class T>
inline ReinitGateResult<T> reinit_gate(const GaussianSet<T>& set, T tau_l, T tau_h, T tau_gamma) {
    ReinitGateResult<T> res;
    const std::size_t n = set.size();
    if (n == 0) return res;

    std::vector<T> s_max(n);
    for (std::size_t i = 0; i < n; ++i) s_max[i] = set.max_scale(i);
    std::vector<T> sorted = s_max;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t rank = std::size_t(std::ceil(0.75 * double(n)));  // 1-based nearest rank
    const T q3 = sorted[rank - 1];

    std::size_t n_large = 0, n_large_medium = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(s_max[i] > q3)) continue;
        ++n_large;
        const T s = set.sensitivity(i);
        if (s >= tau_l && s <= tau_h) ++n_large_medium;
    }
    if (n_large == 0) return res;
    res.gamma = T(n_large_medium) / T(n_large);
    res.fire = res.gamma > tau_gamma;
    return res;
}

template <class T>
struct DepthReinitResult {
    bool replaced = false;
    std::size_t sample_count = 0;
    DensifyEvent event;
};

// Rebuilds the whole set from back-projected surface samples: one primitive
// per grid pixel whose accumulated alpha clears 0.5, colored by the ground
// truth, isotropically scaled by the mean distance to its three nearest
// samples. Keeps the old set when no pixel qualifies.
template <class T>
inline DepthReinitResult<T> depth_reinit(GaussianSet<T>& set, const std::vector<View<T>>& views,
                                         int stride, T scene_extent, int iteration,
                                         const RenderOptions<T>& opts = {}) {
    DepthReinitResult<T> res;
    res.event.iteration = iteration;
    res.event.kind = DensifyKind::depth_reinit;
    res.event.n_before = set.size();

    std::vector<Vec3<T>> points;
    std::vector<Vec3<T>> colors;
    for (const auto& view : views) {
        const auto out = render(set, view.camera, opts);
        const Camera& cam = view.camera;
        const Mat3<T> rot_t = cam.rotation().transpose().template cast<T>();
        const Vec3<T> trans = cam.translation().template cast<T>();
        for (int y = 0; y < cam.height; y += stride) {
            for (int x = 0; x < cam.width; x += stride) {
                if (!(out.accum_alpha.at(y, x) > T(0.5))) continue;
                const T z = out.depth.at(y, x);
                const T px = (T(x) + T(0.5) - T(cam.cx)) / T(cam.fx);
                const T py = (T(y) + T(0.5) - T(cam.cy)) / T(cam.fy);
                const Vec3<T> p_cam(px * z, py * z, z);
                points.push_back(rot_t * (p_cam - trans));
                colors.push_back(Vec3<T>(view.gt_image.at(y, x, 0), view.gt_image.at(y, x, 1),
                                         view.gt_image.at(y, x, 2)));
            }
        }
    }

    if (points.empty()) {
        res.event.n_after = set.size();
        return res;
    }

    const std::vector<T> scales =
        knn_mean_distance(points, 3, T(0.01) * std::max(scene_extent, T(1e-6)));
    GaussianSet<T> fresh;
    fresh.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (int j = 0; j < 3; ++j) {
            fresh.means[3 * i + j] = points[i][j];
            fresh.colors[3 * i + j] = colors[i][j];
            fresh.log_scales[3 * i + j] = std::log(std::max(scales[i], T(1e-7)));
        }
        fresh.rotations[4 * i] = T(1);
        fresh.opacity_logits[i] = T(logit(0.1));
        fresh.sensitivity_logits[i] = T(0);
    }
    set = std::move(fresh);
    res.replaced = true;
    res.sample_count = points.size();
    res.event.n_after = set.size();
    return res;
}

}  // namespace pgs
