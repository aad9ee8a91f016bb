#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "pgs/core/gaussian_set.hpp"
#include "pgs/core/random.hpp"

namespace pgs {

// Maps rows of a post-surgery set back to the pre-surgery set: src[r] is the
// old row carried into new row r, or -1 for a freshly created row. Optimizer
// state follows the same mapping (fresh rows start with zero moments).
struct RowMap {
    std::vector<std::int64_t> src;

    static RowMap identity(std::size_t n) {
        RowMap m;
        m.src.resize(n);
        for (std::size_t i = 0; i < n; ++i) m.src[i] = std::int64_t(i);
        return m;
    }

    // old index -> new index, -1 when the row was removed.
    std::vector<std::int64_t> inverse(std::size_t old_size) const {
        std::vector<std::int64_t> inv(old_size, -1);
        for (std::size_t r = 0; r < src.size(); ++r)
            if (src[r] >= 0) inv[std::size_t(src[r])] = std::int64_t(r);
        return inv;
    }
};

enum class DensifyKind { adc, perceptual_h, perceptual_m, prune, opacity_reset, depth_reinit };

inline const char* to_string(DensifyKind k) {
    switch (k) {
        case DensifyKind::adc: return "adc";
        case DensifyKind::perceptual_h: return "perceptual_h";
        case DensifyKind::perceptual_m: return "perceptual_m";
        case DensifyKind::prune: return "prune";
        case DensifyKind::opacity_reset: return "opacity_reset";
        case DensifyKind::depth_reinit: return "depth_reinit";
    }
    return "?";
}

struct DensifyEvent {
    int iteration = 0;
    DensifyKind kind = DensifyKind::adc;
    std::vector<std::size_t> selected_indices;  // ascending, pre-mutation
    std::size_t n_before = 0;
    std::size_t n_after = 0;
};

struct SurgeryStep {
    DensifyEvent event;
    RowMap map;
};

// ---- Sensitivity-class selection -----------------------------------------

// Strict threshold on sigmoid sensitivity.
template <class T>
inline std::vector<std::size_t> select_high(const GaussianSet<T>& set, T tau_h) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.sensitivity(i) > tau_h) out.push_back(i);
    return out;
}

// Closed interval [tau_l, tau_h]; a primitive sitting exactly at tau_h
// belongs here and not to the high set.
template <class T>
inline std::vector<std::size_t> select_medium(const GaussianSet<T>& set, T tau_l, T tau_h) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const T s = set.sensitivity(i);
        if (s >= tau_l && s <= tau_h) out.push_back(i);
    }
    return out;
}

// Keeps candidates whose maximum view weight strictly exceeds the threshold;
// expects a fresh weight sweep.
template <class T>
inline std::vector<std::size_t> gate_by_weight(const std::vector<std::size_t>& candidates,
                                               const GaussianSet<T>& set, T tau_omega) {
    std::vector<std::size_t> out;
    for (const std::size_t i : candidates)
        if (set.max_view_weight[i] > tau_omega) out.push_back(i);
    return out;
}

// ---- Opacity decline -------------------------------------------------------

// Solving a_hat + (1 - a_hat) a_hat = alpha^k for the per-copy opacity that
// makes two stacked copies composite to alpha^k.
template <class T>
inline T od_transform(T alpha, T k) {
    return T(1) - std::sqrt(T(1) - std::pow(alpha, k));
}

// ---- Surgery -------------------------------------------------------------

namespace detail {

template <class T>
inline void copy_row(GaussianSet<T>& dst, std::size_t d, const GaussianSet<T>& src, std::size_t s) {
    for (int j = 0; j < 3; ++j) {
        dst.means[3 * d + j] = src.means[3 * s + j];
        dst.log_scales[3 * d + j] = src.log_scales[3 * s + j];
        dst.colors[3 * d + j] = src.colors[3 * s + j];
    }
    for (int j = 0; j < 4; ++j) dst.rotations[4 * d + j] = src.rotations[4 * s + j];
    dst.opacity_logits[d] = src.opacity_logits[s];
    dst.sensitivity_logits[d] = src.sensitivity_logits[s];
    dst.accum_posgrad_norm[d] = src.accum_posgrad_norm[s];
    dst.accum_denom[d] = src.accum_denom[s];
    dst.max_view_weight[d] = src.max_view_weight[s];
}

}  // namespace detail

// Keeps exactly the rows with keep[i] != 0, preserving order.
template <class T>
inline RowMap compact(GaussianSet<T>& set, const std::vector<std::uint8_t>& keep) {
    const std::size_t n = set.size();
    GaussianSet<T> out;
    RowMap map;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i) kept += keep[i] ? 1 : 0;
    out.resize(kept);
    map.src.reserve(kept);
    std::size_t d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        detail::copy_row(out, d, set, i);
        map.src.push_back(std::int64_t(i));
        ++d;
    }
    set = std::move(out);
    return map;
}

// Replaces each selected primitive with two children sampled from its own
// density; child extents shrink by the divisor, everything else is inherited.
// Net +1 primitive per selection.
template <class T>
inline RowMap split(GaussianSet<T>& set, const std::vector<std::size_t>& indices, T scale_divisor,
                    Rng& rng) {
    const std::size_t n = set.size();
    std::vector<std::uint8_t> selected(n, 0);
    for (const std::size_t i : indices) selected[i] = 1;

    GaussianSet<T> out;
    out.resize(n - indices.size() + 2 * indices.size());
    RowMap map;
    map.src.reserve(out.size());

    std::size_t d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (selected[i]) continue;
        detail::copy_row(out, d, set, i);
        map.src.push_back(std::int64_t(i));
        ++d;
    }
    const T log_div = std::log(scale_divisor);
    for (const std::size_t i : indices) {
        const Mat3<T> rot = set.rotation(i);
        const Vec3<T> mu = set.mean(i);
        const Vec3<T> sc = set.scale(i);
        for (int child = 0; child < 2; ++child) {
            detail::copy_row(out, d, set, i);
            const Vec3<T> draw(T(rng.normal()) * sc[0], T(rng.normal()) * sc[1],
                               T(rng.normal()) * sc[2]);
            const Vec3<T> pos = mu + rot * draw;
            for (int j = 0; j < 3; ++j) {
                out.means[3 * d + j] = pos[j];
                out.log_scales[3 * d + j] = set.log_scales[3 * i + j] - log_div;
            }
            out.accum_posgrad_norm[d] = T(0);
            out.accum_denom[d] = T(0);
            out.max_view_weight[d] = T(0);
            map.src.push_back(-1);
            ++d;
        }
    }
    set = std::move(out);
    return map;
}

// Duplicates each selected primitive in place; both the original and the
// copy take the opacity-declined value so the stacked pair composites to
// alpha^k over its region.
template <class T>
inline RowMap clone_with_od(GaussianSet<T>& set, const std::vector<std::size_t>& indices, T k) {
    const std::size_t n = set.size();
    GaussianSet<T> out;
    out.resize(n + indices.size());
    RowMap map;
    map.src.reserve(out.size());
    for (std::size_t i = 0; i < n; ++i) {
        detail::copy_row(out, i, set, i);
        map.src.push_back(std::int64_t(i));
    }
    std::size_t d = n;
    for (const std::size_t i : indices) {
        const T alpha = set.opacity(i);
        const T declined = clamp_logit(logit(od_transform(alpha, k)));
        out.opacity_logits[i] = declined;
        detail::copy_row(out, d, out, i);
        out.accum_posgrad_norm[d] = T(0);
        out.accum_denom[d] = T(0);
        out.max_view_weight[d] = T(0);
        map.src.push_back(-1);
        ++d;
    }
    set = std::move(out);
    return map;
}

inline void reset_opacity_logits(auto& set, double alpha) {
    using T = std::remove_reference_t<decltype(set.opacity_logits[0])>;
    const T v = clamp_logit(T(logit(alpha)));
    std::fill(set.opacity_logits.begin(), set.opacity_logits.end(), v);
}

// ---- Perceptual sensitivity-guided densification ---------------------------

template <class T>
struct PerceptualDensifyParams {
    T tau_h = T(0.9);
    T tau_l = T(0.3);
    T tau_h_omega = T(25);
    T tau_m_omega = T(10);
    T tau_beta = T(0.85);
    T od_exponent = T(1.2);
    T split_scale_divisor = T(1.6);
    bool force_split = false;  // ignore the beta branch and always split
};

// Applies the high- and medium-sensitivity events. Both selections are
// resolved against the pre-mutation set; the high event runs first and the
// medium indices are remapped before the second surgery.
template <class T>
inline std::vector<SurgeryStep> perceptual_densify(GaussianSet<T>& set, T beta,
                                                   const PerceptualDensifyParams<T>& p, bool do_high,
                                                   bool do_medium, int iteration, Rng& rng) {
    std::vector<SurgeryStep> steps;
    const std::vector<std::size_t> d_h =
        do_high ? gate_by_weight(select_high(set, p.tau_h), set, p.tau_h_omega)
                : std::vector<std::size_t>{};
    const std::vector<std::size_t> d_m =
        do_medium ? gate_by_weight(select_medium(set, p.tau_l, p.tau_h), set, p.tau_m_omega)
                  : std::vector<std::size_t>{};
    std::vector<std::size_t> d_m_rows = d_m;  // rows to operate on, remapped across the high event

    if (do_high) {
        SurgeryStep step;
        step.event.iteration = iteration;
        step.event.kind = DensifyKind::perceptual_h;
        step.event.selected_indices = d_h;
        step.event.n_before = set.size();
        const std::size_t old_size = set.size();
        if (beta < p.tau_beta && !p.force_split)
            step.map = clone_with_od(set, d_h, p.od_exponent);
        else
            step.map = split(set, d_h, p.split_scale_divisor, rng);
        step.event.n_after = set.size();

        if (!d_m_rows.empty()) {
            const auto inv = step.map.inverse(old_size);
            for (auto& idx : d_m_rows) idx = std::size_t(inv[idx]);  // disjoint from d_h, never removed
            std::sort(d_m_rows.begin(), d_m_rows.end());
        }
        steps.push_back(std::move(step));
    }
    if (do_medium) {
        SurgeryStep step;
        step.event.iteration = iteration;
        step.event.kind = DensifyKind::perceptual_m;
        step.event.selected_indices = d_m;  // pre-mutation frame
        step.event.n_before = set.size();
        step.map = split(set, d_m_rows, p.split_scale_divisor, rng);
        step.event.n_after = set.size();
        steps.push_back(std::move(step));
    }
    return steps;
}

// ---- Vanilla adaptive density control ------------------------------------

template <class T>
struct AdcParams {
    T grad_threshold = T(2e-4);
    T percent_dense = T(0.01);
    T prune_alpha = T(0.005);
    T split_scale_divisor = T(1.6);
    T od_exponent = T(1.2);  // clone opacity decline; 1 disables
    T scene_extent = T(1);
};

// Gradient-driven clone/split followed by an opacity prune. Clones go through
// the opacity decline like every other clone.
template <class T>
inline std::vector<SurgeryStep> vanilla_adc(GaussianSet<T>& set, const AdcParams<T>& p,
                                            int iteration, Rng& rng) {
    std::vector<std::size_t> to_clone, to_split;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const T denom = std::max(set.accum_denom[i], T(1));
        const T avg_grad = set.accum_posgrad_norm[i] / denom;
        if (!(avg_grad > p.grad_threshold)) continue;
        if (set.max_scale(i) < p.percent_dense * p.scene_extent)
            to_clone.push_back(i);
        else
            to_split.push_back(i);
    }

    std::vector<SurgeryStep> steps;
    {
        SurgeryStep step;
        step.event.iteration = iteration;
        step.event.kind = DensifyKind::adc;
        step.event.selected_indices = to_clone;
        step.event.selected_indices.insert(step.event.selected_indices.end(), to_split.begin(),
                                           to_split.end());
        std::sort(step.event.selected_indices.begin(), step.event.selected_indices.end());
        step.event.n_before = set.size();

        RowMap m1 = clone_with_od(set, to_clone, p.od_exponent);
        // clone appends rows and removes none, so split indices stay valid
        RowMap m2 = split(set, to_split, p.split_scale_divisor, rng);
        step.map.src.resize(m2.src.size());
        for (std::size_t r = 0; r < m2.src.size(); ++r)
            step.map.src[r] = m2.src[r] < 0 ? -1 : m1.src[std::size_t(m2.src[r])];
        step.event.n_after = set.size();
        steps.push_back(std::move(step));
    }
    {
        SurgeryStep step;
        step.event.iteration = iteration;
        step.event.kind = DensifyKind::prune;
        step.event.n_before = set.size();
        std::vector<std::uint8_t> keep(set.size(), 1);
        for (std::size_t i = 0; i < set.size(); ++i)
            if (set.opacity(i) < p.prune_alpha) {
                keep[i] = 0;
                step.event.selected_indices.push_back(i);
            }
        step.map = compact(set, keep);
        step.event.n_after = set.size();
        steps.push_back(std::move(step));
    }
    return steps;
}

}  // namespace pgs
