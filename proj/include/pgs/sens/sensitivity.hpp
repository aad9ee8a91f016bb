#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pgs/core/camera.hpp"
#include "pgs/core/image.hpp"

namespace pgs {

// Binary perceptual sensitivity maps: Sobel response on luminance, a strict
// binarization threshold, then average-pool smoothing with a second strict
// threshold. All stages use replicate padding so image borders do not read
// as edges.

template <class T>
inline Image<T> luminance(const Image<T>& rgb) {
    Image<T> out(rgb.width, rgb.height, 1);
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x)
            out.at(y, x) = T(0.299) * rgb.at(y, x, 0) + T(0.587) * rgb.at(y, x, 1) +
                           T(0.114) * rgb.at(y, x, 2);
    return out;
}

template <class T>
inline Image<T> sobel_magnitude(const Image<T>& gray) {
    static constexpr int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    static constexpr int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    const int w = gray.width, h = gray.height;
    Image<T> out(w, h, 1);
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            T gx = T(0), gy = T(0);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const T v = gray.at(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1));
                    gx += T(kx[dy + 1][dx + 1]) * v;
                    gy += T(ky[dy + 1][dx + 1]) * v;
                }
            }
            out.at(y, x) = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

// Strict threshold: exactly tau_e maps to 0.
template <class T>
inline Image<T> enhance(const Image<T>& response, T tau_e) {
    Image<T> out(response.width, response.height, 1);
    for (std::size_t i = 0; i < response.data.size(); ++i)
        out.data[i] = response.data[i] > tau_e ? T(1) : T(0);
    return out;
}

// Average pooling over a w x w window (stride 1, replicate padding) followed
// by a strict threshold; input and output are both binary.
template <class T>
inline Image<T> smooth(const Image<T>& binary, int window, T tau_s) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("smooth window must be odd");
    const int w = binary.width, h = binary.height, r = window / 2;
    const T inv_area = T(1) / T(window * window);
    Image<T> out(w, h, 1);
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            T sum = T(0);
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    sum += binary.at(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1));
            out.at(y, x) = sum * inv_area > tau_s ? T(1) : T(0);
        }
    }
    return out;
}

struct ExtractOptions {
    double tau_e = 0.05;
    double tau_s = 0.3;
    int window = 3;
};

template <class T>
inline Image<T> extract_sensitivity(const Image<T>& rgb, const ExtractOptions& opt = {}) {
    return smooth(enhance(sobel_magnitude(luminance(rgb)), T(opt.tau_e)), opt.window, T(opt.tau_s));
}

// Raw edge-response target for the no-enhancement ablation: the Sobel
// magnitude clipped to [0,1], no binarization, no smoothing.
template <class T>
inline Image<T> raw_response_map(const Image<T>& rgb) {
    Image<T> map = sobel_magnitude(luminance(rgb));
    for (auto& v : map.data) v = std::clamp(v, T(0), T(1));
    return map;
}

// Scene sensitivity: mean over views of each view's mean pixel sensitivity.
// Per-view means first, so views of unequal size carry equal weight.
template <class T>
inline T scene_sensitivity(const std::vector<View<T>>& views) {
    if (views.empty()) throw std::invalid_argument("scene_sensitivity needs at least one view");
    T sum = T(0);
    for (const auto& v : views) sum += v.avg_sensitivity;
    return sum / T(views.size());
}

}  // namespace pgs
