#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace pgs {

// Row-major, channel-interleaved image buffer.
template <class T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T(0))
        : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

    T& at(int y, int x, int c = 0) {
        return data[(std::size_t(y) * width + x) * channels + c];
    }
    const T& at(int y, int x, int c = 0) const {
        return data[(std::size_t(y) * width + x) * channels + c];
    }

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    template <class U>
    Image<U> cast() const {
        Image<U> out(width, height, channels);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

// Snaps values to the 8-bit lattice used by PNG output (round half away
// from zero), so metrics agree with what a written file would contain.
template <class T>
inline Image<T> quantize_unit(const Image<T>& img) {
    Image<T> out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v = double(img.data[i]);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.data[i] = T(std::floor(v * 255.0 + 0.5) / 255.0);
    }
    return out;
}

}  // namespace pgs
