#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pgs/core/gaussian_set.hpp"
#include "pgs/densify/densify.hpp"
#include "pgs/render/backward.hpp"

namespace pgs {

// Adam with one moment pair per parameter group, reference-trainer epsilon.
// Moment arrays follow the primitive set through every surgery event:
// surviving rows carry their moments, fresh rows start at zero.
template <class T>
class AdamOptimizer {
  public:
    struct Group {
        std::vector<T> m, v;
        int stride = 1;
    };

    static constexpr T kBeta1 = T(0.9);
    static constexpr T kBeta2 = T(0.999);
    static constexpr T kEps = T(1e-15);

    explicit AdamOptimizer(std::size_t n = 0) { reset(n); }

    void reset(std::size_t n) {
        step_count_ = 0;
        groups_[0] = Group{std::vector<T>(3 * n, T(0)), std::vector<T>(3 * n, T(0)), 3};
        groups_[1] = Group{std::vector<T>(3 * n, T(0)), std::vector<T>(3 * n, T(0)), 3};
        groups_[2] = Group{std::vector<T>(4 * n, T(0)), std::vector<T>(4 * n, T(0)), 4};
        groups_[3] = Group{std::vector<T>(3 * n, T(0)), std::vector<T>(3 * n, T(0)), 3};
        groups_[4] = Group{std::vector<T>(n, T(0)), std::vector<T>(n, T(0)), 1};
        groups_[5] = Group{std::vector<T>(n, T(0)), std::vector<T>(n, T(0)), 1};
    }

    struct LearningRates {
        T means, log_scales, rotations, colors, opacity, sensitivity;
    };

    void step(GaussianSet<T>& set, const GradientBuffer<T>& gb, const LearningRates& lr) {
        ++step_count_;
        const T bc1 = T(1) - std::pow(kBeta1, T(step_count_));
        const T bc2 = T(1) - std::pow(kBeta2, T(step_count_));
        update(groups_[0], set.means, gb.d_means, lr.means, bc1, bc2);
        update(groups_[1], set.log_scales, gb.d_log_scales, lr.log_scales, bc1, bc2);
        update(groups_[2], set.rotations, gb.d_rotations, lr.rotations, bc1, bc2);
        update(groups_[3], set.colors, gb.d_colors, lr.colors, bc1, bc2);
        update(groups_[4], set.opacity_logits, gb.d_opacity_logits, lr.opacity, bc1, bc2);
        update(groups_[5], set.sensitivity_logits, gb.d_sensitivity_logits, lr.sensitivity, bc1, bc2);
    }

    void remap(const RowMap& map) {
        for (auto& g : groups_) {
            std::vector<T> m(map.src.size() * std::size_t(g.stride), T(0));
            std::vector<T> v(map.src.size() * std::size_t(g.stride), T(0));
            for (std::size_t r = 0; r < map.src.size(); ++r) {
                if (map.src[r] < 0) continue;
                const std::size_t s = std::size_t(map.src[r]);
                for (int j = 0; j < g.stride; ++j) {
                    m[r * g.stride + j] = g.m[s * g.stride + j];
                    v[r * g.stride + j] = g.v[s * g.stride + j];
                }
            }
            g.m = std::move(m);
            g.v = std::move(v);
        }
    }

    void zero_opacity_moments() {
        std::fill(groups_[4].m.begin(), groups_[4].m.end(), T(0));
        std::fill(groups_[4].v.begin(), groups_[4].v.end(), T(0));
    }

    std::size_t tracked_size() const { return groups_[4].m.size(); }
    std::int64_t step_count() const { return step_count_; }

  private:
    static void update(Group& g, std::vector<T>& params, const std::vector<T>& grads, T lr, T bc1,
                       T bc2) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const T grad = grads[i];
            g.m[i] = kBeta1 * g.m[i] + (T(1) - kBeta1) * grad;
            g.v[i] = kBeta2 * g.v[i] + (T(1) - kBeta2) * grad * grad;
            const T m_hat = g.m[i] / bc1;
            const T v_hat = g.v[i] / bc2;
            params[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
        }
    }

    Group groups_[6];
    std::int64_t step_count_ = 0;
};

}  // namespace pgs
