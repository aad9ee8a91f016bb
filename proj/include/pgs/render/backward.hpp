#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pgs/render/rasterizer.hpp"

namespace pgs {

// Per-primitive partials of the scalar loss w.r.t. every parameter group,
// plus the positional-gradient statistic used by density control.
template <class T>
struct GradientBuffer {
    std::vector<T> d_means;               // 3 per primitive
    std::vector<T> d_log_scales;          // 3 per primitive
    std::vector<T> d_rotations;           // 4 per primitive
    std::vector<T> d_colors;              // 3 per primitive
    std::vector<T> d_opacity_logits;      // 1 per primitive
    std::vector<T> d_sensitivity_logits;  // 1 per primitive
    std::vector<T> pos_grad_norm;         // ndc-scaled |dL/d mean2d|
    std::vector<std::uint8_t> visible;    // projected and touching the image

    void resize(std::size_t n) {
        d_means.assign(3 * n, T(0));
        d_log_scales.assign(3 * n, T(0));
        d_rotations.assign(4 * n, T(0));
        d_colors.assign(3 * n, T(0));
        d_opacity_logits.assign(n, T(0));
        d_sensitivity_logits.assign(n, T(0));
        pos_grad_norm.assign(n, T(0));
        visible.assign(n, 0);
    }
};

namespace detail {

// Gradients accumulated per tile against the 2D screen-space quantities of
// one primitive; chained to 3D parameters after the tile merge.
template <class T>
struct ScreenGrad {
    T mx = 0, my = 0;          // d mean2d
    T ca = 0, cb = 0, cc = 0;  // d cov2d entries (0,0), (0,1), (1,1)
    T col[3] = {0, 0, 0};
    T sens = 0;
    T alpha = 0;
};

}  // namespace detail

// Analytic adjoint of render() for the color and sensitivity branches.
// Replays the forward compositing per pixel (same options, same skip and stop
// decisions), so the returned partials differentiate exactly what render()
// computed. Per-tile partial gradients are merged in ascending tile order,
// which keeps the result bit-identical across thread counts.
template <class T>
inline GradientBuffer<T> backward(const GaussianSet<T>& set, const Camera& cam,
                                  const Image<T>& upstream_rgb, const Image<T>& upstream_sens,
                                  const RenderOptions<T>& opts = {}) {
    const auto projected = project(set, cam);
    const auto grid = detail::build_tile_grid(set, cam, projected, opts);

    GradientBuffer<T> gb;
    gb.resize(set.size());

    std::vector<std::vector<detail::ScreenGrad<T>>> tile_grads(std::size_t(grid.tile_count()));

    parallel_for(grid.tile_count(), opts.threads, [&](int tile) {
        const auto& bin = grid.bins[std::size_t(tile)];
        if (bin.empty()) return;
        auto& local = tile_grads[std::size_t(tile)];
        local.assign(bin.size(), detail::ScreenGrad<T>{});

        const int x0 = (tile % grid.tiles_x) * grid.tile_size;
        const int y0 = (tile / grid.tiles_x) * grid.tile_size;
        const int x1 = std::min(x0 + grid.tile_size, cam.width);
        const int y1 = std::min(y0 + grid.tile_size, cam.height);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const T px = T(x) + T(0.5), py = T(y) + T(0.5);
                const T qr = upstream_rgb.at(y, x, 0);
                const T qg = upstream_rgb.at(y, x, 1);
                const T qb = upstream_rgb.at(y, x, 2);
                const T qs = upstream_sens.at(y, x);

                // First replay: total weighted payload, for suffix sums.
                T phi_total = T(0);
                {
                    T trans = T(1);
                    for (std::size_t k = 0; k < bin.size(); ++k) {
                        const auto& p = grid.prims[std::size_t(bin[k])];
                        const T dx = px - p.mx, dy = py - p.my;
                        const T msq = dx * (p.ia * dx + p.ib * dy) + dy * (p.ib * dx + p.ic * dy);
                        if (msq > opts.cutoff_sq) continue;
                        const T a = p.alpha * std::exp(T(-0.5) * msq);
                        if (a < opts.skip_weight) continue;
                        const T trans_next = trans * (T(1) - a);
                        if (trans_next < opts.stop_transmittance) break;
                        const T phi = p.col[0] * qr + p.col[1] * qg + p.col[2] * qb + p.sens * qs;
                        phi_total += a * trans * phi;
                        trans = trans_next;
                    }
                }

                // Second replay: per-contribution partials. For contribution i,
                // dL/da_i = T_i*phi_i - suffix_i/(1-a_i) with suffix_i the
                // weighted payload of everything composited behind it.
                T trans = T(1);
                T prefix = T(0);
                for (std::size_t k = 0; k < bin.size(); ++k) {
                    const auto& p = grid.prims[std::size_t(bin[k])];
                    const T dx = px - p.mx, dy = py - p.my;
                    const T adx = p.ia * dx + p.ib * dy;
                    const T ady = p.ib * dx + p.ic * dy;
                    const T msq = dx * adx + dy * ady;
                    if (msq > opts.cutoff_sq) continue;
                    const T g = std::exp(T(-0.5) * msq);
                    const T a = p.alpha * g;
                    if (a < opts.skip_weight) continue;
                    const T trans_next = trans * (T(1) - a);
                    if (trans_next < opts.stop_transmittance) break;
                    const T w = a * trans;
                    const T phi = p.col[0] * qr + p.col[1] * qg + p.col[2] * qb + p.sens * qs;
                    prefix += w * phi;

                    auto& lg = local[k];
                    lg.col[0] += w * qr;
                    lg.col[1] += w * qg;
                    lg.col[2] += w * qb;
                    lg.sens += w * qs;

                    const T suffix = phi_total - prefix;
                    const T d_a = trans * phi - suffix / (T(1) - a);
                    lg.alpha += g * d_a;
                    const T d_g = p.alpha * d_a;

                    // g = exp(-msq/2): d g/d mean2d = g * A d, and
                    // d g/d cov2d = g/2 * (A d)(A d)^T.
                    const T gd = d_g * g;
                    lg.mx += gd * adx;
                    lg.my += gd * ady;
                    const T half_gd = T(0.5) * gd;
                    lg.ca += half_gd * adx * adx;
                    lg.cb += half_gd * T(2) * adx * ady;
                    lg.cc += half_gd * ady * ady;

                    trans = trans_next;
                }
            }
        }
    });

    // Tile-order merge of screen-space gradients per projected primitive.
    std::vector<detail::ScreenGrad<T>> merged(grid.prims.size());
    for (int tile = 0; tile < grid.tile_count(); ++tile) {
        const auto& bin = grid.bins[std::size_t(tile)];
        const auto& local = tile_grads[std::size_t(tile)];
        if (local.empty()) continue;
        for (std::size_t k = 0; k < bin.size(); ++k) {
            auto& m = merged[std::size_t(bin[k])];
            const auto& l = local[k];
            m.mx += l.mx;
            m.my += l.my;
            m.ca += l.ca;
            m.cb += l.cb;
            m.cc += l.cc;
            m.col[0] += l.col[0];
            m.col[1] += l.col[1];
            m.col[2] += l.col[2];
            m.sens += l.sens;
            m.alpha += l.alpha;
        }
    }

    // Chain screen-space gradients to the 3D parameters.
    const Mat3<T> rot_wc = cam.rotation().template cast<T>();
    const Vec3<T> trans_wc = cam.translation().template cast<T>();
    const T fx = T(cam.fx), fy = T(cam.fy);
    const T half_w = T(cam.width) / T(2), half_h = T(cam.height) / T(2);

    for (std::size_t pi = 0; pi < grid.prims.size(); ++pi) {
        const auto& m = merged[pi];
        const std::size_t s = std::size_t(grid.prims[pi].src);
        gb.visible[s] = 1;

        gb.d_colors[3 * s] += m.col[0];
        gb.d_colors[3 * s + 1] += m.col[1];
        gb.d_colors[3 * s + 2] += m.col[2];

        const T sv = set.sensitivity(s);
        gb.d_sensitivity_logits[s] += m.sens * sv * (T(1) - sv);
        const T av = set.opacity(s);
        gb.d_opacity_logits[s] += m.alpha * av * (T(1) - av);

        const T gx = m.mx * half_w;
        const T gy = m.my * half_h;
        gb.pos_grad_norm[s] = std::sqrt(gx * gx + gy * gy);

        const Vec3<T> t = rot_wc * set.mean(s) + trans_wc;
        const Mat23<T> jac = perspective_jacobian(t, fx, fy);
        const Mat23<T> mw = jac * rot_wc;

        Mat2<T> g2;
        g2 << m.ca, m.cb / T(2), m.cb / T(2), m.cc;
        const Mat3<T> g3 = mw.transpose() * g2 * mw;  // dL/d cov3d

        // Covariance chain: cov3d = (R S)(R S)^T with S = diag(exp(log_s)).
        const Mat3<T> rq = set.rotation(s);
        const Vec3<T> sc = set.scale(s);
        const Mat3<T> m2 = rq * sc.asDiagonal();
        const Mat3<T> d_m2 = T(2) * g3 * m2;
        for (int j = 0; j < 3; ++j)
            gb.d_log_scales[3 * s + j] += sc[j] * rq.col(j).dot(d_m2.col(j));

        const Mat3<T> d_r = d_m2 * sc.asDiagonal();
        // Rotation entries as functions of the normalized quaternion.
        {
            T qw = set.rotations[4 * s], qx = set.rotations[4 * s + 1],
              qy = set.rotations[4 * s + 2], qz = set.rotations[4 * s + 3];
            const T qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
            const T w = qw / qn, x = qx / qn, y = qy / qn, z = qz / qn;
            Vec4<T> dq_hat;
            dq_hat[0] = T(2) * (-z * d_r(0, 1) + y * d_r(0, 2) + z * d_r(1, 0) - x * d_r(1, 2) -
                                y * d_r(2, 0) + x * d_r(2, 1));
            dq_hat[1] = T(2) * (y * d_r(0, 1) + z * d_r(0, 2) + y * d_r(1, 0) -
                                T(2) * x * d_r(1, 1) - w * d_r(1, 2) + z * d_r(2, 0) +
                                w * d_r(2, 1) - T(2) * x * d_r(2, 2));
            dq_hat[2] = T(2) * (-T(2) * y * d_r(0, 0) + x * d_r(0, 1) + w * d_r(0, 2) +
                                x * d_r(1, 0) + z * d_r(1, 2) - w * d_r(2, 0) + z * d_r(2, 1) -
                                T(2) * y * d_r(2, 2));
            dq_hat[3] = T(2) * (-T(2) * z * d_r(0, 0) - w * d_r(0, 1) + x * d_r(0, 2) +
                                w * d_r(1, 0) - T(2) * z * d_r(1, 1) + y * d_r(1, 2) +
                                x * d_r(2, 0) + y * d_r(2, 1));
            // Through the normalization q_hat = q/|q|.
            const Vec4<T> q_hat(w, x, y, z);
            const Vec4<T> dq = (dq_hat - q_hat * q_hat.dot(dq_hat)) / qn;
            for (int j = 0; j < 4; ++j) gb.d_rotations[4 * s + j] += dq[j];
        }

        // Mean chain: through the projected center and through the Jacobian's
        // dependence on the camera-space position.
        const Mat23<T> d_mw = T(2) * g2 * mw * set.covariance(s);
        const Mat23<T> d_jac = d_mw * rot_wc.transpose();
        const T iz = T(1) / t[2];
        const T iz2 = iz * iz;
        const T iz3 = iz2 * iz;
        Vec3<T> d_t = jac.transpose() * Vec2<T>(m.mx, m.my);
        d_t[0] += d_jac(0, 2) * (-fx * iz2);
        d_t[1] += d_jac(1, 2) * (-fy * iz2);
        d_t[2] += d_jac(0, 0) * (-fx * iz2) + d_jac(1, 1) * (-fy * iz2) +
                  d_jac(0, 2) * (T(2) * fx * t[0] * iz3) + d_jac(1, 2) * (T(2) * fy * t[1] * iz3);
        const Vec3<T> d_mean = rot_wc.transpose() * d_t;
        for (int j = 0; j < 3; ++j) gb.d_means[3 * s + j] += d_mean[j];
    }
    return gb;
}

}  // namespace pgs
