#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pgs/core/math.hpp"
#include "pgs/core/random.hpp"

namespace pgs {

// Structure-of-arrays primitive store. Quaternions are (w, x, y, z) and kept
// unit-length; per-axis extents live in log space; opacity and sensitivity
// are stored as logits.
template <class T>
struct GaussianSet {
    std::vector<T> means;               // 3 per primitive
    std::vector<T> log_scales;          // 3 per primitive
    std::vector<T> rotations;           // 4 per primitive, (w,x,y,z)
    std::vector<T> colors;              // 3 per primitive, rgb in [0,1]
    std::vector<T> opacity_logits;      // 1 per primitive
    std::vector<T> sensitivity_logits;  // 1 per primitive

    // Training accumulators: averaged positional gradient statistic and the
    // per-primitive maximum view weight from the last sweep.
    std::vector<T> accum_posgrad_norm;
    std::vector<T> accum_denom;
    std::vector<T> max_view_weight;

    std::size_t size() const { return opacity_logits.size(); }

    void resize(std::size_t n) {
        means.resize(3 * n, T(0));
        log_scales.resize(3 * n, T(0));
        rotations.resize(4 * n, T(0));
        colors.resize(3 * n, T(0));
        opacity_logits.resize(n, T(0));
        sensitivity_logits.resize(n, T(0));
        accum_posgrad_norm.resize(n, T(0));
        accum_denom.resize(n, T(0));
        max_view_weight.resize(n, T(0));
    }

    Vec3<T> mean(std::size_t i) const {
        return Vec3<T>(means[3 * i], means[3 * i + 1], means[3 * i + 2]);
    }
    Vec3<T> scale(std::size_t i) const {
        return Vec3<T>(std::exp(log_scales[3 * i]), std::exp(log_scales[3 * i + 1]),
                       std::exp(log_scales[3 * i + 2]));
    }
    Vec3<T> color(std::size_t i) const {
        return Vec3<T>(colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]);
    }
    Mat3<T> rotation(std::size_t i) const {
        return quat_to_rotation(rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2],
                                rotations[4 * i + 3]);
    }
    T opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }
    T sensitivity(std::size_t i) const { return sigmoid(sensitivity_logits[i]); }

    // Longest-axis world extent.
    T max_scale(std::size_t i) const {
        const T m = std::max(log_scales[3 * i], std::max(log_scales[3 * i + 1], log_scales[3 * i + 2]));
        return std::exp(m);
    }

    // Full covariance R diag(s^2) R^T.
    Mat3<T> covariance(std::size_t i) const {
        const Mat3<T> r = rotation(i);
        const Vec3<T> s = scale(i);
        return r * Vec3<T>(s[0] * s[0], s[1] * s[1], s[2] * s[2]).asDiagonal() * r.transpose();
    }

    void normalize_rotations() {
        for (std::size_t i = 0; i < size(); ++i) {
            T* q = &rotations[4 * i];
            const T n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
            if (n > T(0)) {
                q[0] /= n;
                q[1] /= n;
                q[2] /= n;
                q[3] /= n;
            } else {
                q[0] = T(1);
                q[1] = q[2] = q[3] = T(0);
            }
        }
    }

    void zero_adc_stats() {
        std::fill(accum_posgrad_norm.begin(), accum_posgrad_norm.end(), T(0));
        std::fill(accum_denom.begin(), accum_denom.end(), T(0));
    }
};

// Diagnostic invariant scan; returns one message per violation, empty when
// the set is well formed. Never mutates.
template <class T>
inline std::vector<std::string> validate(const GaussianSet<T>& set) {
    std::vector<std::string> out;
    const std::size_t n = set.size();
    auto expect_len = [&](std::size_t got, std::size_t want, const char* name) {
        if (got != want)
            out.push_back(std::string(name) + ": length " + std::to_string(got) + ", expected " +
                          std::to_string(want));
    };
    expect_len(set.means.size(), 3 * n, "means");
    expect_len(set.log_scales.size(), 3 * n, "log_scales");
    expect_len(set.rotations.size(), 4 * n, "rotations");
    expect_len(set.colors.size(), 3 * n, "colors");
    expect_len(set.sensitivity_logits.size(), n, "sensitivity_logits");
    expect_len(set.accum_posgrad_norm.size(), n, "accum_posgrad_norm");
    expect_len(set.accum_denom.size(), n, "accum_denom");
    expect_len(set.max_view_weight.size(), n, "max_view_weight");
    if (!out.empty()) return out;

    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            const T s = std::exp(set.log_scales[3 * i + k]);
            if (!std::isfinite(s) || s <= T(0)) {
                out.push_back("scale not finite-positive at index " + std::to_string(i));
                break;
            }
        }
        const T* q = &set.rotations[4 * i];
        const T norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (std::abs(norm - T(1)) > T(1e-6))
            out.push_back("quaternion norm " + std::to_string(double(norm)) + " at index " +
                          std::to_string(i));
        const T a = sigmoid(set.opacity_logits[i]);
        const T e = sigmoid(set.sensitivity_logits[i]);
        if (!(a > T(0) && a < T(1)))
            out.push_back("opacity sigmoid outside (0,1) at index " + std::to_string(i));
        if (!(e > T(0) && e < T(1)))
            out.push_back("sensitivity sigmoid outside (0,1) at index " + std::to_string(i));
    }
    return out;
}

// Random set inside [lo, hi]^3, used by tests and scene generation.
template <class T>
inline GaussianSet<T> init_random(std::size_t n, Rng& rng, T lo = T(-1), T hi = T(1),
                                  T min_scale = T(0.02), T max_scale = T(0.25)) {
    GaussianSet<T> set;
    set.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            set.means[3 * i + k] = T(rng.uniform(double(lo), double(hi)));
            set.log_scales[3 * i + k] = T(std::log(rng.uniform(double(min_scale), double(max_scale))));
            set.colors[3 * i + k] = T(rng.uniform());
        }
        // Uniform random unit quaternion.
        T q[4];
        T norm = T(0);
        do {
            norm = T(0);
            for (int k = 0; k < 4; ++k) {
                q[k] = T(rng.normal());
                norm += q[k] * q[k];
            }
            norm = std::sqrt(norm);
        } while (norm < T(1e-8));
        for (int k = 0; k < 4; ++k) set.rotations[4 * i + k] = q[k] / norm;
        set.opacity_logits[i] = clamp_logit(T(logit(rng.uniform(0.05, 0.95))));
        set.sensitivity_logits[i] = clamp_logit(T(logit(rng.uniform(0.05, 0.95))));
    }
    return set;
}

}  // namespace pgs
