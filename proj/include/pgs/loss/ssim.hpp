#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pgs/core/image.hpp"

namespace pgs {

// SSIM with the reference-trainer convention: 11x11 Gaussian window with
// sigma 1.5, channel-wise zero-padded same-size convolution, C1 = 0.01^2,
// C2 = 0.03^2, averaged over pixels and channels.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

template <class T>
inline std::array<T, kSsimWindow> ssim_kernel() {
    std::array<T, kSsimWindow> k{};
    T sum = T(0);
    for (int i = 0; i < kSsimWindow; ++i) {
        const T d = T(i - kSsimWindow / 2);
        k[std::size_t(i)] = std::exp(-d * d / (T(2) * T(kSsimSigma) * T(kSsimSigma)));
        sum += k[std::size_t(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable zero-padded same-size blur; adjoint of itself since the kernel
// is symmetric.
template <class T>
inline Image<T> blur_same(const Image<T>& img) {
    static const std::array<T, kSsimWindow> k = ssim_kernel<T>();
    const int r = kSsimWindow / 2;
    Image<T> tmp(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                T sum = T(0);
                for (int i = -r; i <= r; ++i) {
                    const int xx = x + i;
                    if (xx < 0 || xx >= img.width) continue;
                    sum += k[std::size_t(i + r)] * img.at(y, xx, c);
                }
                tmp.at(y, x, c) = sum;
            }
    Image<T> out(img.width, img.height, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                T sum = T(0);
                for (int i = -r; i <= r; ++i) {
                    const int yy = y + i;
                    if (yy < 0 || yy >= img.height) continue;
                    sum += k[std::size_t(i + r)] * tmp.at(yy, x, c);
                }
                out.at(y, x, c) = sum;
            }
    return out;
}

template <class T>
inline Image<T> hadamard(const Image<T>& a, const Image<T>& b) {
    Image<T> out(a.width, a.height, a.channels);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    return out;
}

}  // namespace detail

template <class T>
struct SsimResult {
    T value = T(0);
    Image<T> grad;  // d mean-SSIM / d first argument; empty unless requested
};

template <class T>
inline SsimResult<T> ssim_detailed(const Image<T>& x, const Image<T>& y, bool want_grad) {
    if (!x.same_shape(y)) throw std::invalid_argument("ssim: image shapes differ");
    using detail::blur_same;
    using detail::hadamard;
    const T c1 = T(kSsimC1), c2 = T(kSsimC2);

    const Image<T> mu_x = blur_same(x);
    const Image<T> mu_y = blur_same(y);
    const Image<T> pxx = blur_same(hadamard(x, x));
    const Image<T> pyy = blur_same(hadamard(y, y));
    const Image<T> pxy = blur_same(hadamard(x, y));

    const std::size_t n = x.data.size();
    SsimResult<T> res;
    Image<T> d_mu(x.width, x.height, x.channels);
    Image<T> d_pxx(x.width, x.height, x.channels);
    Image<T> d_pxy(x.width, x.height, x.channels);

    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T mx = mu_x.data[i], my = mu_y.data[i];
        const T sxx = pxx.data[i] - mx * mx;
        const T syy = pyy.data[i] - my * my;
        const T sxy = pxy.data[i] - mx * my;
        const T n1 = T(2) * mx * my + c1;
        const T n2 = T(2) * sxy + c2;
        const T d1 = mx * mx + my * my + c1;
        const T d2 = sxx + syy + c2;
        const T s = (n1 * n2) / (d1 * d2);
        total += s;
        if (want_grad) {
            const T g_n1 = n2 / (d1 * d2);
            const T g_n2 = n1 / (d1 * d2);
            const T g_d1 = -s / d1;
            const T g_d2 = -s / d2;
            d_mu.data[i] = T(2) * my * g_n1 - T(2) * my * g_n2 + T(2) * mx * g_d1 - T(2) * mx * g_d2;
            d_pxx.data[i] = g_d2;
            d_pxy.data[i] = T(2) * g_n2;
        }
    }
    res.value = total / T(n);

    if (want_grad) {
        const Image<T> b_mu = blur_same(d_mu);
        const Image<T> b_pxx = blur_same(d_pxx);
        const Image<T> b_pxy = blur_same(d_pxy);
        res.grad = Image<T>(x.width, x.height, x.channels);
        const T inv_n = T(1) / T(n);
        for (std::size_t i = 0; i < n; ++i)
            res.grad.data[i] =
                (b_mu.data[i] + T(2) * x.data[i] * b_pxx.data[i] + y.data[i] * b_pxy.data[i]) * inv_n;
    }
    return res;
}

// Evaluation metric; always computed in 64-bit.
template <class T>
inline double ssim(const Image<T>& a, const Image<T>& b) {
    if constexpr (std::is_same_v<T, double>) {
        return ssim_detailed<double>(a, b, false).value;
    } else {
        return ssim_detailed<double>(a.template cast<double>(), b.template cast<double>(), false).value;
    }
}

}  // namespace pgs
