#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "pgs/core/camera.hpp"
#include "pgs/core/image.hpp"
#include "pgs/core/threading.hpp"
#include "pgs/render/projection.hpp"

namespace pgs {

// Compositing thresholds follow the reference rasterizer: contributions with
// alpha*G below skip_weight are dropped, blending ends once transmittance
// falls under stop_transmittance, and primitives only touch pixels inside
// their cutoff ellipse. reference() turns all three off, yielding the smooth
// function the gradient and conservation oracles difference.
template <class T>
struct RenderOptions {
    T skip_weight = T(1) / T(255);
    T stop_transmittance = T(1e-4);
    T cutoff_sq = T(9);  // squared Mahalanobis cutoff (3 sigma)
    int tile_size = 16;
    int threads = 1;
    bool want_weight_sums = false;

    static RenderOptions reference() {
        RenderOptions o;
        o.skip_weight = T(0);
        o.stop_transmittance = T(0);
        o.cutoff_sq = std::numeric_limits<T>::infinity();
        return o;
    }
};

template <class T>
struct RenderOutput {
    Image<T> rgb;          // HxWx3
    Image<T> sens;         // HxW
    Image<T> depth;        // HxW, composited view-space depth
    Image<T> accum_alpha;  // HxW, 1 - final transmittance
    std::vector<T> weight_sums;  // per source primitive, when requested
};

namespace detail {

template <class T>
struct RenderPrim {
    T mx, my;        // projected mean, pixels
    T ia, ib, ic;    // inverse 2D covariance [[ia, ib], [ib, ic]]
    T alpha;
    T col[3];
    T sens;
    T depth;
    std::int32_t src;
};

template <class T>
struct TileGrid {
    int tile_size = 16;
    int tiles_x = 0, tiles_y = 0;
    std::vector<RenderPrim<T>> prims;              // depth order
    std::vector<std::vector<std::int32_t>> bins;   // per tile, indices into prims
    std::vector<std::uint8_t> touches_image;       // per prim, bbox met >= 1 tile

    int tile_count() const { return tiles_x * tiles_y; }
};

template <class T>
inline TileGrid<T> build_tile_grid(const GaussianSet<T>& set, const Camera& cam,
                                   const std::vector<ProjectedGaussian<T>>& projected,
                                   const RenderOptions<T>& opts) {
    TileGrid<T> grid;
    grid.tile_size = opts.tile_size;
    grid.tiles_x = (cam.width + opts.tile_size - 1) / opts.tile_size;
    grid.tiles_y = (cam.height + opts.tile_size - 1) / opts.tile_size;
    grid.bins.resize(std::size_t(grid.tile_count()));
    grid.prims.reserve(projected.size());
    grid.touches_image.assign(projected.size(), 0);

    const bool unbounded = !(opts.cutoff_sq < std::numeric_limits<T>::infinity());
    const T radius_scale = unbounded ? T(0) : std::sqrt(opts.cutoff_sq);

    for (std::size_t pi = 0; pi < projected.size(); ++pi) {
        const auto& pg = projected[pi];
        const T det = pg.cov2d(0, 0) * pg.cov2d(1, 1) - pg.cov2d(0, 1) * pg.cov2d(0, 1);
        // Degenerate or overflowed footprints (floating-point cancellation on
        // extreme anisotropy near the image plane) are skipped for the view.
        if (!(det > T(0)) || !std::isfinite(det)) continue;
        RenderPrim<T> rp;
        rp.mx = pg.mean2d[0];
        rp.my = pg.mean2d[1];
        rp.ia = pg.cov2d(1, 1) / det;
        rp.ib = -pg.cov2d(0, 1) / det;
        rp.ic = pg.cov2d(0, 0) / det;
        const std::size_t s = std::size_t(pg.source_index);
        rp.alpha = set.opacity(s);
        rp.col[0] = set.colors[3 * s];
        rp.col[1] = set.colors[3 * s + 1];
        rp.col[2] = set.colors[3 * s + 2];
        rp.sens = set.sensitivity(s);
        rp.depth = pg.view_depth;
        rp.src = pg.source_index;

        int tx0 = 0, tx1 = grid.tiles_x - 1, ty0 = 0, ty1 = grid.tiles_y - 1;
        if (!unbounded) {
            const T rx = radius_scale * std::sqrt(pg.cov2d(0, 0));
            const T ry = radius_scale * std::sqrt(pg.cov2d(1, 1));
            tx0 = int(std::floor((rp.mx - rx) / T(opts.tile_size)));
            tx1 = int(std::floor((rp.mx + rx) / T(opts.tile_size)));
            ty0 = int(std::floor((rp.my - ry) / T(opts.tile_size)));
            ty1 = int(std::floor((rp.my + ry) / T(opts.tile_size)));
            if (tx1 < 0 || ty1 < 0 || tx0 >= grid.tiles_x || ty0 >= grid.tiles_y) continue;
            tx0 = std::max(tx0, 0);
            ty0 = std::max(ty0, 0);
            tx1 = std::min(tx1, grid.tiles_x - 1);
            ty1 = std::min(ty1, grid.tiles_y - 1);
        }
        const std::int32_t prim_index = std::int32_t(grid.prims.size());
        grid.prims.push_back(rp);
        grid.touches_image[pi] = 1;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                grid.bins[std::size_t(ty) * grid.tiles_x + tx].push_back(prim_index);
    }
    return grid;
}

}  // namespace detail

// Front-to-back alpha compositing of color, sensitivity, and depth. With
// want_weight_sums, also returns each source primitive's summed compositing
// weight over all pixels (merged in tile order, so the result is independent
// of the thread count).
template <class T>
inline RenderOutput<T> render(const GaussianSet<T>& set, const Camera& cam,
                              const RenderOptions<T>& opts = {}) {
    const auto projected = project(set, cam);
    const auto grid = detail::build_tile_grid(set, cam, projected, opts);

    RenderOutput<T> out;
    out.rgb = Image<T>(cam.width, cam.height, 3);
    out.sens = Image<T>(cam.width, cam.height, 1);
    out.depth = Image<T>(cam.width, cam.height, 1);
    out.accum_alpha = Image<T>(cam.width, cam.height, 1);

    std::vector<std::vector<T>> tile_weight_sums;
    if (opts.want_weight_sums) tile_weight_sums.resize(std::size_t(grid.tile_count()));

    parallel_for(grid.tile_count(), opts.threads, [&](int tile) {
        const auto& bin = grid.bins[std::size_t(tile)];
        std::vector<T>* wsum = nullptr;
        if (opts.want_weight_sums) {
            tile_weight_sums[std::size_t(tile)].assign(bin.size(), T(0));
            wsum = &tile_weight_sums[std::size_t(tile)];
        }
        const int x0 = (tile % grid.tiles_x) * grid.tile_size;
        const int y0 = (tile / grid.tiles_x) * grid.tile_size;
        const int x1 = std::min(x0 + grid.tile_size, cam.width);
        const int y1 = std::min(y0 + grid.tile_size, cam.height);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const T px = T(x) + T(0.5), py = T(y) + T(0.5);
                T trans = T(1);
                T acc_r = T(0), acc_g = T(0), acc_b = T(0), acc_s = T(0), acc_d = T(0);
                for (std::size_t k = 0; k < bin.size(); ++k) {
                    const auto& p = grid.prims[std::size_t(bin[k])];
                    const T dx = px - p.mx, dy = py - p.my;
                    const T msq = dx * (p.ia * dx + p.ib * dy) + dy * (p.ib * dx + p.ic * dy);
                    if (msq > opts.cutoff_sq) continue;
                    const T a = p.alpha * std::exp(T(-0.5) * msq);
                    if (a < opts.skip_weight) continue;
                    const T trans_next = trans * (T(1) - a);
                    if (trans_next < opts.stop_transmittance) break;
                    const T w = a * trans;
                    acc_r += w * p.col[0];
                    acc_g += w * p.col[1];
                    acc_b += w * p.col[2];
                    acc_s += w * p.sens;
                    acc_d += w * p.depth;
                    if (wsum) (*wsum)[k] += w;
                    trans = trans_next;
                }
                out.rgb.at(y, x, 0) = acc_r;
                out.rgb.at(y, x, 1) = acc_g;
                out.rgb.at(y, x, 2) = acc_b;
                out.sens.at(y, x) = acc_s;
                out.depth.at(y, x) = acc_d;
                out.accum_alpha.at(y, x) = T(1) - trans;
            }
        }
    });

    if (opts.want_weight_sums) {
        out.weight_sums.assign(set.size(), T(0));
        for (int tile = 0; tile < grid.tile_count(); ++tile) {
            const auto& bin = grid.bins[std::size_t(tile)];
            const auto& partial = tile_weight_sums[std::size_t(tile)];
            for (std::size_t k = 0; k < bin.size(); ++k)
                out.weight_sums[std::size_t(grid.prims[std::size_t(bin[k])].src)] += partial[k];
        }
    }
    return out;
}

// Refreshes max_view_weight with the per-view maximum of summed compositing
// weights. Gradient-free.
template <class T>
inline void weight_sweep(GaussianSet<T>& set, const std::vector<View<T>>& views,
                         RenderOptions<T> opts = {}) {
    opts.want_weight_sums = true;
    std::fill(set.max_view_weight.begin(), set.max_view_weight.end(), T(0));
    for (const auto& view : views) {
        const auto out = render(set, view.camera, opts);
        for (std::size_t i = 0; i < set.size(); ++i)
            set.max_view_weight[i] = std::max(set.max_view_weight[i], out.weight_sums[i]);
    }
}

}  // namespace pgs
