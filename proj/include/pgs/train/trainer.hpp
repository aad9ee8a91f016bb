#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pgs/core/checkpoint.hpp"
#include "pgs/core/config.hpp"
#include "pgs/core/knn.hpp"
#include "pgs/densify/densify.hpp"
#include "pgs/densify/reinit.hpp"
#include "pgs/loss/losses.hpp"
#include "pgs/render/backward.hpp"
#include "pgs/render/rasterizer.hpp"
#include "pgs/sens/sensitivity.hpp"
#include "pgs/train/adam.hpp"

namespace pgs {

// Reference-trainer convention: bounding sphere of the camera centers,
// radius inflated by 1.1.
template <class T>
inline T scene_extent(const std::vector<View<T>>& views) {
    if (views.empty()) return T(1);
    Vec3<double> center = Vec3<double>::Zero();
    for (const auto& v : views) center += v.camera.center();
    center /= double(views.size());
    double radius = 0;
    for (const auto& v : views) radius = std::max(radius, (v.camera.center() - center).norm());
    radius *= 1.1;
    return radius < 1e-9 ? T(1) : T(radius);
}

template <class T>
inline GaussianSet<T> init_from_points(const std::vector<Vec3<T>>& points,
                                       const std::vector<Vec3<T>>& point_colors, T extent) {
    GaussianSet<T> set;
    set.resize(points.size());
    const std::vector<T> scales = knn_mean_distance(points, 3, T(0.01) * extent);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (int j = 0; j < 3; ++j) {
            set.means[3 * i + j] = points[i][j];
            set.colors[3 * i + j] = point_colors[i][j];
            set.log_scales[3 * i + j] = std::log(std::max(scales[i], T(1e-7)));
        }
        set.rotations[4 * i] = T(1);
        set.opacity_logits[i] = T(logit(0.1));
        set.sensitivity_logits[i] = T(0);
    }
    return set;
}

struct TraceRow {
    int iter = 0;
    double loss = 0, l1 = 0, dssim = 0, bce = 0;
    double psnr = -1, ssim = -1;  // negative = not evaluated this iteration
    std::size_t n_gaussians = 0;
};

inline std::string trace_csv_header() { return "iter,loss,l1,dssim,bce,psnr,ssim,n_gaussians"; }

inline std::string to_csv(const TraceRow& r) {
    std::ostringstream os;
    os.precision(10);
    os << r.iter << ',' << r.loss << ',' << r.l1 << ',' << r.dssim << ',' << r.bce << ',';
    if (r.psnr >= 0) os << r.psnr;
    os << ',';
    if (r.ssim >= 0) os << r.ssim;
    os << ',' << r.n_gaussians;
    return os.str();
}

template <class T>
struct TrainResult {
    GaussianSet<T> set;
    std::vector<TraceRow> trace;
    std::vector<DensifyEvent> events;
    double final_psnr = 0, final_ssim = 0;
    T beta = T(0);
    T gamma = T(-1);  // negative until the gate has been evaluated
    bool reinit_fired = false;
};

class TrainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
inline void check_finite_loss(int iter, std::initializer_list<std::pair<const char*, T>> parts) {
    for (const auto& [name, value] : parts)
        if (!std::isfinite(double(value)))
            throw TrainError("non-finite loss at iteration " + std::to_string(iter) + " (" + name +
                             ")");
}

template <class T>
inline void check_finite_grads(int iter, const GradientBuffer<T>& gb) {
    const std::pair<const char*, const std::vector<T>*> groups[] = {
        {"means", &gb.d_means},          {"log_scales", &gb.d_log_scales},
        {"rotations", &gb.d_rotations},  {"colors", &gb.d_colors},
        {"opacity", &gb.d_opacity_logits}, {"sensitivity", &gb.d_sensitivity_logits}};
    for (const auto& [name, arr] : groups)
        for (const T v : *arr)
            if (!std::isfinite(double(v)))
                throw TrainError("non-finite gradient at iteration " + std::to_string(iter) +
                                 " (parameter group " + name + ")");
}

template <class T>
inline void clamp_parameters(GaussianSet<T>& set) {
    set.normalize_rotations();
    for (auto& l : set.opacity_logits) l = clamp_logit(l);
    for (auto& l : set.sensitivity_logits) l = clamp_logit(l);
    for (auto& c : set.colors) c = std::clamp(c, T(0), T(1));
}

}  // namespace detail

// Full training loop: per-view gradient steps, the density-control and
// perceptual densification schedules, the one-shot depth-reinitialization
// gate after warm-up, checkpoints, and the metric trace.
template <class T>
inline TrainResult<T> train(const std::vector<View<T>>& views, const GaussianSet<T>& init,
                            const TrainConfig& cfg) {
    if (views.empty()) throw TrainError("training requires at least one view");
    {
        const auto issues = cfg.validate();
        if (!issues.empty()) throw TrainError("bad config: " + issues.front());
    }

    TrainResult<T> res;
    res.set = init;
    GaussianSet<T>& set = res.set;

    const T extent = scene_extent(views);
    const int threads = cfg.threads > 0 ? cfg.threads : default_thread_count();
    RenderOptions<T> ropts;
    ropts.threads = threads;

    res.beta = scene_sensitivity(views);
    AdamOptimizer<T> opt(set.size());
    Rng rng(cfg.seed);

    const bool writing = !cfg.out_dir.empty();
    std::ofstream events_log;
    if (writing) {
        std::filesystem::create_directories(cfg.out_dir);
        events_log.open(cfg.out_dir + "/events.log");
    }
    auto log_event = [&](const DensifyEvent& ev, double beta_or_gamma = -1,
                         const char* extra_key = nullptr) {
        res.events.push_back(ev);
        if (!writing) return;
        events_log << "iter=" << ev.iteration << " kind=" << to_string(ev.kind)
                   << " n_before=" << ev.n_before << " n_after=" << ev.n_after
                   << " n_selected=" << ev.selected_indices.size();
        if (extra_key) events_log << ' ' << extra_key << '=' << beta_or_gamma;
        events_log << '\n';
    };

    auto checkpoint_path = [&](int iter) {
        std::ostringstream os;
        os << cfg.out_dir << "/checkpoint_" << std::setw(6) << std::setfill('0') << iter << ".ckpt";
        return os.str();
    };
    auto evaluate = [&](TraceRow& row) {
        double psnr_sum = 0, ssim_sum = 0;
        for (const auto& v : views) {
            const auto out = render(set, v.camera, ropts);
            const auto q = quantize_unit(out.rgb);
            psnr_sum += psnr(q, v.gt_image);
            ssim_sum += ssim(q, v.gt_image);
        }
        row.psnr = psnr_sum / double(views.size());
        row.ssim = ssim_sum / double(views.size());
    };

    std::vector<std::size_t> order(views.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t order_pos = order.size();  // forces a shuffle on first use

    PerceptualDensifyParams<T> pd;
    pd.tau_h = T(cfg.tau_h);
    pd.tau_l = T(cfg.tau_l);
    pd.tau_h_omega = T(cfg.tau_h_omega);
    pd.tau_m_omega = T(cfg.tau_m_omega);
    pd.tau_beta = T(cfg.tau_beta);
    pd.od_exponent = T(cfg.disable_od ? 1.0 : cfg.od_exponent);
    pd.split_scale_divisor = T(cfg.split_scale_divisor);
    pd.force_split = cfg.disable_pe;  // raw-response guidance pairs with split-only
    AdcParams<T> adc;
    adc.grad_threshold = T(cfg.adc_grad_threshold);
    adc.percent_dense = T(cfg.percent_dense);
    adc.prune_alpha = T(cfg.prune_alpha);
    adc.split_scale_divisor = T(cfg.split_scale_divisor);
    adc.od_exponent = T(cfg.disable_od ? 1.0 : cfg.od_exponent);
    adc.scene_extent = extent;

    if (writing && cfg.checkpoint_interval > 0)
        save_checkpoint(checkpoint_path(0), set, 0, cfg);

    for (int iter = 1; iter <= cfg.total_iters; ++iter) {
        if (order_pos >= order.size()) {
            shuffle(order, rng);
            order_pos = 0;
        }
        const View<T>& view = views[order[order_pos++]];

        const auto out = render(set, view.camera, ropts);
        T l1 = T(0), dssim = T(0);
        const auto lc = rgb_loss(out.rgb, view.gt_image, T(cfg.ssim_weight), &l1, &dssim);
        const auto ls = cfg.disable_pe ? sens_loss_l1(out.sens, view.sens_map)
                                       : sens_loss(out.sens, view.sens_map);
        const T lambda = T(cfg.lambda_s);
        const auto report = make_loss_report(l1, dssim, ls.value, T(cfg.ssim_weight), lambda);
        detail::check_finite_loss<T>(iter, {{"l1", report.l1},
                                            {"dssim", report.dssim},
                                            {"bce", report.l_s},
                                            {"total", report.total}});

        Image<T> up_rgb = lc.grad;
        for (auto& v : up_rgb.data) v *= (T(1) - lambda);
        Image<T> up_sens = ls.grad;
        for (auto& v : up_sens.data) v *= lambda;

        const auto gb = backward(set, view.camera, up_rgb, up_sens, ropts);
        detail::check_finite_grads(iter, gb);

        for (std::size_t i = 0; i < set.size(); ++i) {
            if (!gb.visible[i]) continue;
            set.accum_posgrad_norm[i] += gb.pos_grad_norm[i];
            set.accum_denom[i] += T(1);
        }

        const double progress = double(iter) / double(std::max(cfg.total_iters, 1));
        typename AdamOptimizer<T>::LearningRates lr;
        lr.means = T(cfg.lr_means * double(extent) *
                     std::pow(cfg.lr_means_final / cfg.lr_means, progress));
        lr.log_scales = T(cfg.lr_log_scales);
        lr.rotations = T(cfg.lr_rotations);
        lr.colors = T(cfg.lr_colors);
        lr.opacity = T(cfg.lr_opacity);
        lr.sensitivity = T(cfg.lr_sensitivity);
        opt.step(set, gb, lr);
        detail::clamp_parameters(set);

        // Metrics measure the optimized state, before any surgery this
        // iteration schedules.
        TraceRow row;
        row.iter = iter;
        row.loss = double(report.total);
        row.l1 = double(report.l1);
        row.dssim = double(report.dssim);
        row.bce = double(report.l_s);
        if (iter % cfg.eval_interval == 0 || iter == cfg.total_iters) evaluate(row);

        // Scene-adaptive depth reinitialization: one-shot gate at warm-up end.
        bool reinit_this_iter = false;
        if (iter == cfg.warmup_iters && !cfg.disable_sdr && !cfg.disable_pe) {
            const auto gate = reinit_gate(set, T(cfg.tau_l), T(cfg.tau_h), T(cfg.tau_gamma));
            res.gamma = gate.gamma;
            if (gate.fire) {
                auto rr = depth_reinit(set, views, cfg.reinit_stride, extent, iter, ropts);
                if (rr.replaced) {
                    res.reinit_fired = true;
                    reinit_this_iter = true;
                    opt.reset(set.size());
                    set.zero_adc_stats();
                    log_event(rr.event, double(gate.gamma), "gamma");
                }
            }
        }

        // No surgery on the final iteration: fresh children would reach the
        // checkpoint without a single training step.
        const bool densify_window =
            iter >= cfg.warmup_iters && iter <= cfg.densify_until && iter < cfg.total_iters;
        if (densify_window && !reinit_this_iter) {
            if (iter % cfg.adc_interval == 0) {
                for (auto& step : vanilla_adc(set, adc, iter, rng)) {
                    opt.remap(step.map);
                    log_event(step.event);
                }
                set.zero_adc_stats();
            }
            const bool fire_h = !cfg.disable_hd && iter % cfg.iter_h == 0;
            const bool fire_m = !cfg.disable_md && iter % cfg.iter_m == 0;
            if (fire_h || fire_m) {
                weight_sweep(set, views, ropts);
                for (auto& step : perceptual_densify(set, res.beta, pd, fire_h, fire_m, iter, rng)) {
                    opt.remap(step.map);
                    log_event(step.event, double(res.beta), "beta");
                }
                set.zero_adc_stats();
            }
            if (iter % cfg.opacity_reset_interval == 0 && iter < cfg.total_iters) {
                DensifyEvent ev;
                ev.iteration = iter;
                ev.kind = DensifyKind::opacity_reset;
                ev.n_before = ev.n_after = set.size();
                reset_opacity_logits(set, 0.01);
                opt.zero_opacity_moments();
                log_event(ev);
            }
        }

        row.n_gaussians = set.size();
        res.trace.push_back(row);

        if (writing && cfg.checkpoint_interval > 0 && iter % cfg.checkpoint_interval == 0)
            save_checkpoint(checkpoint_path(iter), set, iter, cfg);
    }

    if (!res.trace.empty()) {
        for (auto it = res.trace.rbegin(); it != res.trace.rend(); ++it)
            if (it->psnr >= 0) {
                res.final_psnr = it->psnr;
                res.final_ssim = it->ssim;
                break;
            }
    } else {
        TraceRow row;
        row.iter = 0;
        row.n_gaussians = set.size();
        evaluate(row);
        res.final_psnr = row.psnr;
        res.final_ssim = row.ssim;
    }

    if (writing) {
        save_checkpoint(cfg.out_dir + "/checkpoint.ckpt", set, cfg.total_iters, cfg);
        std::ofstream trace(cfg.out_dir + "/trace.csv");
        trace << trace_csv_header() << '\n';
        for (const auto& row : res.trace) trace << to_csv(row) << '\n';
    }
    return res;
}

}  // namespace pgs
