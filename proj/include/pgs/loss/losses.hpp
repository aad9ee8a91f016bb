#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "pgs/core/image.hpp"
#include "pgs/loss/ssim.hpp"

namespace pgs {

template <class T>
struct LossReport {
    T l1 = T(0);
    T dssim = T(0);
    T l_c = T(0);
    T l_s = T(0);
    T total = T(0);  // (1 - lambda_s) * l_c + lambda_s * l_s
};

template <class T>
inline LossReport<T> make_loss_report(T l1, T dssim, T l_s, T ssim_weight, T lambda_s) {
    LossReport<T> r;
    r.l1 = l1;
    r.dssim = dssim;
    r.l_c = (T(1) - ssim_weight) * l1 + ssim_weight * dssim;
    r.l_s = l_s;
    r.total = (T(1) - lambda_s) * r.l_c + lambda_s * r.l_s;
    return r;
}

template <class T>
struct LossWithGrad {
    T value = T(0);
    Image<T> grad;
};

// RGB branch: (1-lambda) * mean|r-g| + lambda * (1 - SSIM), with the analytic
// gradient w.r.t. the rendered image.
template <class T>
inline LossWithGrad<T> rgb_loss(const Image<T>& render, const Image<T>& gt, T lambda,
                                T* l1_out = nullptr, T* dssim_out = nullptr) {
    if (!render.same_shape(gt)) throw std::invalid_argument("rgb_loss: image shapes differ");
    const std::size_t n = render.data.size();

    LossWithGrad<T> out;
    out.grad = Image<T>(render.width, render.height, render.channels);
    T l1 = T(0);
    const T inv_n = T(1) / T(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = render.data[i] - gt.data[i];
        l1 += std::abs(d);
        out.grad.data[i] = (T(1) - lambda) * inv_n * (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)));
    }
    l1 *= inv_n;

    const SsimResult<T> s = ssim_detailed(render, gt, true);
    const T dssim = T(1) - s.value;
    for (std::size_t i = 0; i < n; ++i) out.grad.data[i] -= lambda * s.grad.data[i];

    out.value = (T(1) - lambda) * l1 + lambda * dssim;
    if (l1_out) *l1_out = l1;
    if (dssim_out) *dssim_out = dssim;
    return out;
}

inline constexpr double kBceClamp = 1e-6;

// Sensitivity branch: mean binary cross-entropy against the binary map, with
// the rendered values clamped to [1e-6, 1-1e-6] before the logs. The gradient
// is that of the clamped expression, i.e. zero where the clamp is active.
template <class T>
inline LossWithGrad<T> sens_loss(const Image<T>& render_sens, const Image<T>& gt_map) {
    if (!render_sens.same_shape(gt_map)) throw std::invalid_argument("sens_loss: image shapes differ");
    const std::size_t n = render_sens.data.size();
    const T lo = T(kBceClamp), hi = T(1) - T(kBceClamp);
    const T inv_n = T(1) / T(n);

    LossWithGrad<T> out;
    out.grad = Image<T>(render_sens.width, render_sens.height, render_sens.channels);
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T raw = render_sens.data[i];
        const T p = std::clamp(raw, lo, hi);
        const T y = gt_map.data[i];
        total += -(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
        const bool clamped = raw < lo || raw > hi;
        out.grad.data[i] = clamped ? T(0) : (-y / p + (T(1) - y) / (T(1) - p)) * inv_n;
    }
    out.value = total * inv_n;
    return out;
}

// L1 alternative for the sensitivity branch, used when the targets are raw
// continuous response maps instead of binary ones.
template <class T>
inline LossWithGrad<T> sens_loss_l1(const Image<T>& render_sens, const Image<T>& target) {
    if (!render_sens.same_shape(target)) throw std::invalid_argument("sens_loss_l1: image shapes differ");
    const std::size_t n = render_sens.data.size();
    const T inv_n = T(1) / T(n);
    LossWithGrad<T> out;
    out.grad = Image<T>(render_sens.width, render_sens.height, render_sens.channels);
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = render_sens.data[i] - target.data[i];
        total += std::abs(d);
        out.grad.data[i] = (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0))) * inv_n;
    }
    out.value = total * inv_n;
    return out;
}

template <class T>
inline T total_loss(T l_c, T l_s, T lambda_s) {
    return (T(1) - lambda_s) * l_c + lambda_s * l_s;
}

// PSNR in dB for [0,1] images; capped at 100 when mse < 1e-10. 64-bit.
template <class T>
inline double psnr(const Image<T>& a, const Image<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes differ");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        mse += d * d;
    }
    mse /= double(a.data.size());
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace pgs
