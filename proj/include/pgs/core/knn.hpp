#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "pgs/core/math.hpp"

namespace pgs {

// Mean distance from each point to its k nearest neighbours (brute force;
// fine at the point counts this project sees). Points with fewer than k
// neighbours available get the fallback value.
template <class T>
inline std::vector<T> knn_mean_distance(const std::vector<Vec3<T>>& points, int k, T fallback) {
    const std::size_t n = points.size();
    std::vector<T> out(n, fallback);
    if (n <= std::size_t(k)) return out;
    std::vector<T> d2(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) d2[j] = (points[j] - points[i]).squaredNorm();
        d2[i] = std::numeric_limits<T>::infinity();
        std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
        T sum = T(0);
        for (int j = 0; j < k; ++j) sum += std::sqrt(d2[std::size_t(j)]);
        out[i] = sum / T(k);
    }
    return out;
}

}  // namespace pgs
