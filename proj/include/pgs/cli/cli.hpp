#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pgs/core/checkpoint.hpp"
#include "pgs/io/dataset.hpp"
#include "pgs/train/trainer.hpp"

namespace pgs::cli {

namespace fs = std::filesystem;
using TrainScalar = float;

namespace detail {

struct SceneRun {
    double psnr = 0, ssim = 0;
    std::size_t n_gaussians = 0;
};

inline LoadOptions load_options_for(const TrainConfig& cfg) {
    LoadOptions lo;
    lo.extract.tau_e = cfg.tau_e;
    lo.extract.tau_s = cfg.tau_s;
    lo.extract.window = cfg.smooth_window;
    lo.raw_response_maps = cfg.disable_pe;
    lo.seed = cfg.seed;
    lo.use_cached_sens = !cfg.disable_pe;  // the cache holds full-pipeline maps
    return lo;
}

inline SceneRun run_training(const std::string& data_dir, TrainConfig cfg) {
    cfg.data_dir = data_dir;
    const auto ds = load_dataset<TrainScalar>(data_dir, load_options_for(cfg));
    const auto extent = scene_extent(ds.views);
    const auto init = init_from_points(ds.init_points, ds.init_colors, extent);
    const auto result = train(ds.views, init, cfg);
    return {result.final_psnr, result.final_ssim, result.set.size()};
}

inline void add_train_flags(CLI::App* cmd, TrainConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "key=value config file applied before other flags");
    cmd->add_option("--iters", cfg.total_iters, "total training iterations")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "rng seed")->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = machine default)")
        ->capture_default_str();
    cmd->add_option("--lambda-s", cfg.lambda_s, "sensitivity loss weight")->capture_default_str();
    cmd->add_option("--ssim-weight", cfg.ssim_weight, "D-SSIM weight in the RGB loss")
        ->capture_default_str();
    cmd->add_option("--tau-e", cfg.tau_e, "edge response threshold")->capture_default_str();
    cmd->add_option("--tau-s", cfg.tau_s, "smoothing threshold")->capture_default_str();
    cmd->add_option("--tau-h", cfg.tau_h, "high-sensitivity threshold")->capture_default_str();
    cmd->add_option("--tau-l", cfg.tau_l, "low-sensitivity threshold")->capture_default_str();
    cmd->add_option("--tau-h-omega", cfg.tau_h_omega, "weight gate for high-sensitivity set")
        ->capture_default_str();
    cmd->add_option("--tau-m-omega", cfg.tau_m_omega, "weight gate for medium-sensitivity set")
        ->capture_default_str();
    cmd->add_option("--tau-beta", cfg.tau_beta, "scene sensitivity clone/split threshold")
        ->capture_default_str();
    cmd->add_option("--tau-gamma", cfg.tau_gamma, "depth reinitialization gate threshold")
        ->capture_default_str();
    cmd->add_option("--od-exponent", cfg.od_exponent, "opacity decline exponent k")
        ->capture_default_str();
    cmd->add_option("--iter-h", cfg.iter_h, "high-sensitivity densification interval")
        ->capture_default_str();
    cmd->add_option("--iter-m", cfg.iter_m, "medium-sensitivity densification interval")
        ->capture_default_str();
    cmd->add_option("--warmup-iters", cfg.warmup_iters, "warm-up iterations")->capture_default_str();
    cmd->add_option("--adc-interval", cfg.adc_interval, "density-control interval")
        ->capture_default_str();
    cmd->add_option("--densify-until", cfg.densify_until, "last densification iteration")
        ->capture_default_str();
    cmd->add_option("--opacity-reset-interval", cfg.opacity_reset_interval,
                    "iterations between opacity resets")
        ->capture_default_str();
    cmd->add_option("--percent-dense", cfg.percent_dense,
                    "clone/split size boundary as a fraction of scene extent")
        ->capture_default_str();
    cmd->add_option("--prune-alpha", cfg.prune_alpha, "opacity prune threshold")
        ->capture_default_str();
    cmd->add_option("--checkpoint-interval", cfg.checkpoint_interval, "iterations between snapshots")
        ->capture_default_str();
    cmd->add_option("--eval-interval", cfg.eval_interval, "iterations between metric evaluations")
        ->capture_default_str();
    cmd->add_flag("--disable-pe", cfg.disable_pe, "guide with unsmoothed binarized edge maps");
    cmd->add_flag("--disable-hd", cfg.disable_hd, "skip high-sensitivity densification");
    cmd->add_flag("--disable-md", cfg.disable_md, "skip medium-sensitivity densification");
    cmd->add_flag("--disable-sdr", cfg.disable_sdr, "skip the depth-reinitialization gate");
    cmd->add_flag("--disable-od", cfg.disable_od, "clone without opacity decline");
}

inline Image<TrainScalar> normalize_depth(const Image<TrainScalar>& depth) {
    Image<TrainScalar> out = depth;
    TrainScalar peak = 0;
    for (const auto v : out.data) peak = std::max(peak, v);
    if (peak > 0)
        for (auto& v : out.data) v /= peak;
    return out;
}

}  // namespace detail

inline int run(std::vector<std::string> args) {
    CLI::App app{"Perceptual sensitivity-guided Gaussian splatting trainer"};
    app.require_subcommand(1);

    // A config file provides new defaults; explicit flags override it. The
    // file is applied before CLI11 parses, so the override falls out.
    std::string pre_config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            pre_config = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            pre_config = args[i].substr(9);
    }
    TrainConfig file_cfg;
    if (!pre_config.empty()) {
        try {
            file_cfg = load_config_file(pre_config);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }

    // make-scene
    auto* mk = app.add_subcommand("make-scene", "generate a synthetic teacher dataset");
    TeacherSceneOptions mk_opt;
    std::string mk_out;
    mk->add_option("--out", mk_out, "output dataset directory")->required();
    mk->add_option("--n-gaussians", mk_opt.n_gaussians, "teacher primitive count")
        ->capture_default_str();
    mk->add_option("--views", mk_opt.n_views, "number of ring cameras")->capture_default_str();
    mk->add_option("--resolution", mk_opt.resolution, "image width and height")
        ->capture_default_str();
    mk->add_option("--seed", mk_opt.seed, "rng seed")->capture_default_str();

    // extract-sens
    auto* ex = app.add_subcommand("extract-sens", "compute binary sensitivity maps for a directory");
    std::string ex_images, ex_out;
    TrainConfig ex_cfg;
    ex->add_option("--images", ex_images, "directory of input PNGs")->required();
    ex->add_option("--out", ex_out, "output directory")->required();
    ex->add_option("--tau-e", ex_cfg.tau_e, "edge response threshold")->capture_default_str();
    ex->add_option("--tau-s", ex_cfg.tau_s, "smoothing threshold")->capture_default_str();
    ex->add_option("--window", ex_cfg.smooth_window, "pooling window")->capture_default_str();

    // train
    auto* tr = app.add_subcommand("train", "optimize a primitive set against a dataset");
    TrainConfig tr_cfg = file_cfg;
    std::string tr_data, tr_out, tr_config;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    detail::add_train_flags(tr, tr_cfg, tr_config);

    // render
    auto* rd = app.add_subcommand("render", "render one view from a checkpoint");
    std::string rd_ckpt, rd_data, rd_out, rd_branch = "rgb";
    int rd_view = 0, rd_threads = 0;
    rd->add_option("--checkpoint", rd_ckpt, "checkpoint file")->required();
    rd->add_option("--data", rd_data, "dataset directory providing cameras.json")->required();
    rd->add_option("--view", rd_view, "camera index")->capture_default_str();
    rd->add_option("--out", rd_out, "output PNG")->required();
    rd->add_option("--branch", rd_branch, "rgb|sens|depth|alpha")->capture_default_str();
    rd->add_option("--threads", rd_threads, "worker threads (0 = machine default)")
        ->capture_default_str();

    // eval
    auto* ev = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint against a dataset");
    std::string ev_ckpt, ev_data, ev_csv;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--csv", ev_csv, "also write the table as CSV");

    // ablate
    auto* ab = app.add_subcommand("ablate", "run the module ablation matrix");
    TrainConfig ab_cfg = file_cfg;
    std::string ab_data, ab_out, ab_config, ab_seeds = "1,2,3,4,5";
    ab->add_option("--data", ab_data, "dataset directory")->required();
    ab->add_option("--out", ab_out, "output directory")->required();
    ab->add_option("--seeds", ab_seeds, "comma-separated seed list")->capture_default_str();
    detail::add_train_flags(ab, ab_cfg, ab_config);

    // od-table
    auto* od = app.add_subcommand("od-table", "sweep the opacity-decline exponent");
    TrainConfig od_cfg = file_cfg;
    std::string od_data, od_out, od_config, od_seeds = "1,2,3,4,5";
    od->add_option("--data", od_data, "dataset directory")->required();
    od->add_option("--out", od_out, "output directory")->required();
    od->add_option("--seeds", od_seeds, "comma-separated seed list")->capture_default_str();
    detail::add_train_flags(od, od_cfg, od_config);

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("pgs");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto parse_seeds = [](const std::string& text) {
        std::vector<std::uint64_t> seeds;
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) seeds.push_back(std::stoull(tok));
        if (seeds.empty()) throw std::runtime_error("empty seed list");
        return seeds;
    };

    try {
        if (mk->parsed()) {
            make_teacher_scene(mk_out, mk_opt);
            std::cout << "wrote " << mk_opt.n_views << " views to " << mk_out << "\n";
            return 0;
        }

        if (ex->parsed()) {
            std::vector<fs::path> inputs;
            for (const auto& entry : fs::directory_iterator(ex_images))
                if (entry.path().extension() == ".png") inputs.push_back(entry.path());
            std::sort(inputs.begin(), inputs.end());
            if (inputs.empty()) throw std::runtime_error("no PNG files in '" + ex_images + "'");
            fs::create_directories(ex_out);
            ExtractOptions eo;
            eo.tau_e = ex_cfg.tau_e;
            eo.tau_s = ex_cfg.tau_s;
            eo.window = ex_cfg.smooth_window;
            double beta_sum = 0;
            for (const auto& path : inputs) {
                const auto img = read_png<float>(path.string());
                Image<float> rgb = img;
                if (rgb.channels == 1) {
                    rgb = Image<float>(img.width, img.height, 3);
                    for (int y = 0; y < img.height; ++y)
                        for (int x = 0; x < img.width; ++x)
                            for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x);
                }
                const auto map = extract_sensitivity(rgb, eo);
                write_png((fs::path(ex_out) / path.filename()).string(), map);
                beta_sum += double(View<float>::mean_of(map));
            }
            std::ofstream beta_file(fs::path(ex_out) / "beta.txt");
            beta_file.precision(17);
            beta_file << beta_sum / double(inputs.size()) << "\n";
            std::cout << "beta=" << beta_sum / double(inputs.size()) << " (" << inputs.size()
                      << " maps)\n";
            return 0;
        }

        if (tr->parsed()) {
            tr_cfg.out_dir = tr_out;
            auto run = detail::run_training(tr_data, tr_cfg);
            std::cout << "final psnr=" << run.psnr << " ssim=" << run.ssim
                      << " n_gaussians=" << run.n_gaussians << "\n";
            return 0;
        }

        if (rd->parsed()) {
            const auto ck = load_checkpoint<TrainScalar>(rd_ckpt);
            const auto ds = load_dataset<TrainScalar>(rd_data, LoadOptions{});
            if (rd_view < 0 || rd_view >= int(ds.views.size()))
                throw std::runtime_error("view index out of range");
            RenderOptions<TrainScalar> ropts;
            ropts.threads = rd_threads > 0 ? rd_threads : default_thread_count();
            const auto out = render(ck.set, ds.views[std::size_t(rd_view)].camera, ropts);
            if (rd_branch == "rgb")
                write_png(rd_out, out.rgb);
            else if (rd_branch == "sens")
                write_png(rd_out, out.sens);
            else if (rd_branch == "depth")
                write_png(rd_out, detail::normalize_depth(out.depth));
            else if (rd_branch == "alpha")
                write_png(rd_out, out.accum_alpha);
            else
                throw std::runtime_error("unknown branch '" + rd_branch + "'");
            return 0;
        }

        if (ev->parsed()) {
            const auto ck = load_checkpoint<TrainScalar>(ev_ckpt);
            const auto ds = load_dataset<TrainScalar>(ev_data, LoadOptions{});
            RenderOptions<TrainScalar> ropts;
            ropts.threads = default_thread_count();
            std::ostringstream csv;
            csv << "view,psnr,ssim\n";
            double psnr_sum = 0, ssim_sum = 0;
            std::cout << std::setw(6) << "view" << std::setw(12) << "psnr" << std::setw(12)
                      << "ssim" << "\n";
            for (std::size_t v = 0; v < ds.views.size(); ++v) {
                const auto out = render(ck.set, ds.views[v].camera, ropts);
                const auto q = quantize_unit(out.rgb);
                const double p = psnr(q, ds.views[v].gt_image);
                const double s = ssim(q, ds.views[v].gt_image);
                psnr_sum += p;
                ssim_sum += s;
                std::cout << std::setw(6) << v << std::setw(12) << std::setprecision(6) << p
                          << std::setw(12) << s << "\n";
                csv << v << ',' << p << ',' << s << '\n';
            }
            const double mp = psnr_sum / double(ds.views.size());
            const double ms = ssim_sum / double(ds.views.size());
            std::cout << std::setw(6) << "mean" << std::setw(12) << mp << std::setw(12) << ms
                      << "\n";
            std::cout << "n_gaussians=" << ck.set.size() << "\n";
            csv << "mean," << mp << ',' << ms << '\n';
            csv << "n_gaussians," << ck.set.size() << ",\n";
            if (!ev_csv.empty()) {
                std::ofstream os(ev_csv);
                os << csv.str();
            }
            return 0;
        }

        if (ab->parsed()) {
            const auto seeds = parse_seeds(ab_seeds);
            fs::create_directories(ab_out);
            std::ofstream csv(fs::path(ab_out) / "ablate.csv");
            csv << "config,seed,psnr,ssim,n_gaussians\n";
            const std::pair<std::string, void (*)(TrainConfig&)> rows[] = {
                {"full", [](TrainConfig&) {}},
                {"wo_pe", [](TrainConfig& c) { c.disable_pe = true; }},
                {"wo_hd", [](TrainConfig& c) { c.disable_hd = true; }},
                {"wo_md", [](TrainConfig& c) { c.disable_md = true; }},
                {"wo_sdr", [](TrainConfig& c) { c.disable_sdr = true; }},
                {"wo_od", [](TrainConfig& c) { c.disable_od = true; }},
            };
            for (const auto& [name, tweak] : rows) {
                double psnr_sum = 0, ssim_sum = 0, count_sum = 0;
                for (const auto seed : seeds) {
                    TrainConfig cfg = ab_cfg;
                    tweak(cfg);
                    cfg.seed = seed;
                    cfg.out_dir.clear();
                    const auto run = detail::run_training(ab_data, cfg);
                    csv << name << ',' << seed << ',' << run.psnr << ',' << run.ssim << ','
                        << run.n_gaussians << '\n';
                    psnr_sum += run.psnr;
                    ssim_sum += run.ssim;
                    count_sum += double(run.n_gaussians);
                }
                const double k = double(seeds.size());
                csv << name << ",mean," << psnr_sum / k << ',' << ssim_sum / k << ','
                    << count_sum / k << '\n';
                std::cout << name << ": psnr=" << psnr_sum / k << " ssim=" << ssim_sum / k
                          << " n=" << count_sum / k << "\n";
            }
            return 0;
        }

        if (od->parsed()) {
            const auto seeds = parse_seeds(od_seeds);
            fs::create_directories(od_out);
            std::ofstream csv(fs::path(od_out) / "od_table.csv");
            csv << "k,seed,psnr,ssim,n_gaussians\n";
            for (const double k : {1.0, 1.2, 1.5, 2.0}) {
                double psnr_sum = 0, ssim_sum = 0, count_sum = 0;
                for (const auto seed : seeds) {
                    TrainConfig cfg = od_cfg;
                    cfg.od_exponent = k;
                    cfg.seed = seed;
                    cfg.out_dir.clear();
                    const auto run = detail::run_training(od_data, cfg);
                    csv << k << ',' << seed << ',' << run.psnr << ',' << run.ssim << ','
                        << run.n_gaussians << '\n';
                    psnr_sum += run.psnr;
                    ssim_sum += run.ssim;
                    count_sum += double(run.n_gaussians);
                }
                const double s = double(seeds.size());
                csv << k << ",mean," << psnr_sum / s << ',' << ssim_sum / s << ',' << count_sum / s
                    << '\n';
                std::cout << "k=" << k << ": psnr=" << psnr_sum / s << " ssim=" << ssim_sum / s
                          << " n=" << count_sum / s << "\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace pgs::cli
