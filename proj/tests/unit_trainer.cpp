#include <catch2/catch.hpp>

#include <cmath>

#include "oracles.hpp"
#include "pgs/sens/sensitivity.hpp"
#include "pgs/train/trainer.hpp"

using namespace pgs;

namespace {

Camera ring_camera(double angle, double radius, int res) {
    const Vec3<double> pos(radius * std::cos(angle), radius * std::sin(angle), 0.3);
    const Vec3<double> forward = (-pos).normalized();
    Vec3<double> up(0, 0, 1);
    const Vec3<double> right = forward.cross(up).normalized();
    const Vec3<double> down = forward.cross(right).normalized();
    Camera cam;
    cam.width = cam.height = res;
    cam.fx = cam.fy = 1.2 * res;
    cam.cx = cam.cy = res / 2.0;
    Mat3<double> r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    const Vec3<double> t = -r * pos;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) cam.world_to_cam[std::size_t(4 * i + j)] = r(i, j);
        cam.world_to_cam[std::size_t(4 * i + 3)] = t[i];
    }
    cam.world_to_cam[12] = cam.world_to_cam[13] = cam.world_to_cam[14] = 0;
    cam.world_to_cam[15] = 1;
    return cam;
}

// Tiny in-memory teacher-student fixture.
struct MiniScene {
    std::vector<View<float>> views;
    GaussianSet<float> init;
};

MiniScene make_mini_scene(int res = 32, int n_views = 3, std::uint64_t seed = 7) {
    Rng rng(seed);
    auto teacher = init_random<float>(40, rng, -0.4f, 0.4f, 0.01f, 0.15f);
    for (std::size_t i = 0; i < teacher.size(); ++i)
        teacher.opacity_logits[i] = float(logit(rng.uniform(0.5, 0.95)));

    MiniScene scene;
    for (int v = 0; v < n_views; ++v) {
        View<float> view;
        view.camera = ring_camera(2.0 * 3.14159265358979 * v / n_views, 2.2, res);
        view.gt_image = render(teacher, view.camera, RenderOptions<float>{}).rgb;
        view.sens_map = extract_sensitivity(view.gt_image, ExtractOptions{});
        view.avg_sensitivity = View<float>::mean_of(view.sens_map);
        scene.views.push_back(std::move(view));
    }

    std::vector<Vec3<float>> pts, cols;
    for (std::size_t i = 0; i < teacher.size(); i += 4) {
        pts.push_back(teacher.mean(i) + Vec3<float>(float(0.02 * rng.normal()),
                                                    float(0.02 * rng.normal()),
                                                    float(0.02 * rng.normal())));
        cols.push_back(teacher.color(i));
    }
    scene.init = init_from_points(pts, cols, scene_extent(scene.views));
    return scene;
}

bool same_params(const GaussianSet<float>& a, const GaussianSet<float>& b) {
    return a.means == b.means && a.log_scales == b.log_scales && a.rotations == b.rotations &&
           a.colors == b.colors && a.opacity_logits == b.opacity_logits;
}

}  // namespace

TEST_CASE("init_from_points falls back to 1% of scene extent for one point") {
    const auto set = init_from_points<double>({{0.5, 0.5, 0.5}}, {{1, 0, 0}}, 3.0);
    REQUIRE(set.size() == 1);
    CHECK(std::exp(set.log_scales[0]) == Approx(0.03).margin(1e-12));
    CHECK(set.colors[0] == 1.0);
    CHECK(set.opacity(0) == Approx(0.1).margin(1e-9));
    CHECK(set.sensitivity_logits[0] == 0.0);
    CHECK(set.rotations[0] == 1.0);
}

TEST_CASE("init_from_points on a regular grid recovers the pitch") {
    std::vector<Vec3<double>> pts;
    std::vector<Vec3<double>> cols;
    const double pitch = 0.25;
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y)
            for (int z = 0; z < 3; ++z) {
                pts.push_back(Vec3<double>(x * pitch, y * pitch, z * pitch));
                cols.push_back(Vec3<double>(0.2, 0.4, 0.6));
            }
    const auto set = init_from_points(pts, cols, 10.0);
    // Every point of a 3x3x3 grid has at least three axis neighbours at the
    // pitch distance, so the 3-NN mean is the pitch exactly.
    for (std::size_t i = 0; i < set.size(); ++i)
        CHECK(std::exp(set.log_scales[3 * i]) == Approx(pitch).margin(1e-9));
    CHECK(set.colors[4] == 0.4);
}

TEST_CASE("scene extent is the inflated camera bounding sphere radius") {
    std::vector<View<double>> views(2);
    views[0].camera = ring_camera(0.0, 2.0, 8);
    views[1].camera = ring_camera(3.14159265358979, 2.0, 8);
    // Centers (+/-2, 0, 0.3): the shared height cancels in the mean, so the
    // bounding radius is exactly 2.
    const double extent = scene_extent(views);
    CHECK(extent == Approx(1.1 * 2.0).margin(1e-9));
}

TEST_CASE("zero iterations returns the initialization unchanged") {
    auto scene = make_mini_scene();
    TrainConfig cfg;
    cfg.total_iters = 0;
    cfg.eval_interval = 1;
    const auto res = train(scene.views, scene.init, cfg);
    CHECK(same_params(res.set, scene.init));
    CHECK(res.set.sensitivity_logits == scene.init.sensitivity_logits);
}

TEST_CASE("same seed gives a bit-identical trajectory") {
    auto scene = make_mini_scene();
    TrainConfig cfg;
    cfg.total_iters = 40;
    cfg.warmup_iters = 10;
    cfg.adc_interval = 10;
    cfg.eval_interval = 40;
    cfg.seed = 5;
    cfg.threads = 1;
    const auto a = train(scene.views, scene.init, cfg);
    const auto b = train(scene.views, scene.init, cfg);
    CHECK(same_params(a.set, b.set));
    CHECK(a.set.sensitivity_logits == b.set.sensitivity_logits);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].loss == b.trace[i].loss);
}

TEST_CASE("with lambda zero and features off, sensitivity maps are inert") {
    auto scene = make_mini_scene();
    TrainConfig cfg;
    cfg.total_iters = 60;
    cfg.warmup_iters = 20;
    cfg.adc_interval = 20;
    cfg.eval_interval = 60;
    cfg.lambda_s = 0.0;
    cfg.disable_hd = cfg.disable_md = cfg.disable_sdr = cfg.disable_od = true;
    cfg.seed = 11;

    const auto vanilla = train(scene.views, scene.init, cfg);

    auto scrambled = scene;
    Rng rng(123);
    for (auto& view : scrambled.views) {
        for (auto& v : view.sens_map.data) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
        view.avg_sensitivity = View<float>::mean_of(view.sens_map);
    }
    const auto garbage = train(scrambled.views, scrambled.init, cfg);

    // The color/geometry trajectory matches bit for bit; only the reported
    // BCE value may differ.
    CHECK(same_params(vanilla.set, garbage.set));
    CHECK(vanilla.set.sensitivity_logits == garbage.set.sensitivity_logits);
}

TEST_CASE("disabling both perceptual branches equals never scheduling them") {
    auto scene = make_mini_scene();
    TrainConfig cfg;
    cfg.total_iters = 80;
    cfg.warmup_iters = 10;
    cfg.adc_interval = 20;
    cfg.iter_h = 30;
    cfg.iter_m = 40;
    cfg.eval_interval = 80;
    cfg.seed = 3;

    auto disabled = cfg;
    disabled.disable_hd = disabled.disable_md = true;

    auto never = cfg;
    never.iter_h = 1 << 28;
    never.iter_m = 1 << 28;

    const auto a = train(scene.views, scene.init, disabled);
    const auto b = train(scene.views, scene.init, never);
    CHECK(same_params(a.set, b.set));
    CHECK(a.set.size() == b.set.size());
}

TEST_CASE("loss trace stays finite and the full pipeline runs its schedules") {
    auto scene = make_mini_scene();
    TrainConfig cfg;
    cfg.total_iters = 70;
    cfg.warmup_iters = 20;
    cfg.adc_interval = 25;
    cfg.iter_h = 30;
    cfg.iter_m = 45;
    cfg.eval_interval = 35;
    cfg.seed = 2;
    const auto res = train(scene.views, scene.init, cfg);
    for (const auto& row : res.trace) {
        CHECK(std::isfinite(row.loss));
        CHECK(std::isfinite(row.l1));
        CHECK(std::isfinite(row.bce));
    }
    CHECK(res.beta == Approx(double(scene_sensitivity(scene.views))));
    bool saw_adc = false, saw_h = false, saw_m = false;
    for (const auto& ev : res.events) {
        saw_adc |= ev.kind == DensifyKind::adc;
        saw_h |= ev.kind == DensifyKind::perceptual_h;
        saw_m |= ev.kind == DensifyKind::perceptual_m;
    }
    CHECK(saw_adc);
    CHECK(saw_h);
    CHECK(saw_m);
    CHECK(validate(res.set).empty());
}

TEST_CASE("non-finite ground truth aborts with the iteration in the message") {
    auto scene = make_mini_scene();
    scene.views[0].gt_image.at(2, 2, 1) = std::numeric_limits<float>::quiet_NaN();
    scene.views[1].gt_image.at(2, 2, 1) = std::numeric_limits<float>::quiet_NaN();
    scene.views[2].gt_image.at(2, 2, 1) = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg;
    cfg.total_iters = 3;
    CHECK_THROWS_WITH(train(scene.views, scene.init, cfg), Catch::Contains("iteration 1"));
}

TEST_CASE("optimizer moments track surgery maps") {
    AdamOptimizer<double> opt(4);
    GaussianSet<double> set;
    Rng rng(5);
    set = init_random<double>(4, rng);

    GradientBuffer<double> gb;
    gb.resize(4);
    for (auto& g : gb.d_means) g = 0.5;
    for (auto& g : gb.d_opacity_logits) g = 0.25;
    AdamOptimizer<double>::LearningRates lr{1e-2, 1e-2, 1e-2, 1e-2, 1e-2, 1e-2};
    opt.step(set, gb, lr);

    // Split row 1: rows {0,2,3} survive, two children appended.
    auto map = split(set, {1}, 1.6, rng);
    opt.remap(map);
    CHECK(opt.tracked_size() == set.size());
    // Fresh rows must start from zero moments: a zero-gradient step leaves
    // their parameters untouched.
    GradientBuffer<double> zed;
    zed.resize(set.size());
    const auto before = set.means;
    opt.step(set, zed, lr);
    for (std::size_t r = 0; r < set.size(); ++r) {
        if (map.src[r] >= 0) continue;
        for (int j = 0; j < 3; ++j) CHECK(set.means[3 * r + std::size_t(j)] == before[3 * r + std::size_t(j)]);
    }
}

TEST_CASE("depth reinitialization fires through the trainer on a young model") {
    // Right after a very short warm-up every sensitivity logit is still near
    // zero, so the whole largest quartile is medium-sensitivity and the gate
    // trips.
    auto scene = make_mini_scene();
    TrainConfig cfg;
    cfg.total_iters = 40;
    cfg.warmup_iters = 15;
    cfg.adc_interval = 20;
    cfg.eval_interval = 40;
    cfg.seed = 21;
    const auto res = train(scene.views, scene.init, cfg);
    CHECK(res.gamma > 0.55);
    REQUIRE(res.reinit_fired);
    bool saw = false;
    for (const auto& ev : res.events)
        if (ev.kind == DensifyKind::depth_reinit) {
            saw = true;
            CHECK(ev.iteration == 15);
            CHECK(ev.n_after == res.trace[14].n_gaussians);  // the iteration-15 row
        }
    CHECK(saw);
    CHECK(validate(res.set).empty());
    for (const auto& row : res.trace) CHECK(std::isfinite(row.loss));

    auto off = cfg;
    off.disable_sdr = true;
    const auto res_off = train(scene.views, scene.init, off);
    CHECK_FALSE(res_off.reinit_fired);
    CHECK(res_off.gamma == -1.0f);  // gate never evaluated
}

TEST_CASE("trainer keeps optimizer aligned through a full run with surgeries") {
    auto scene = make_mini_scene(24, 2, 9);
    TrainConfig cfg;
    cfg.total_iters = 100;
    cfg.warmup_iters = 10;
    cfg.adc_interval = 10;
    cfg.iter_h = 40;
    cfg.iter_m = 60;
    cfg.eval_interval = 100;
    cfg.opacity_reset_interval = 50;
    cfg.seed = 13;
    const auto res = train(scene.views, scene.init, cfg);
    CHECK(validate(res.set).empty());
    bool saw_reset = false;
    for (const auto& ev : res.events) saw_reset |= ev.kind == DensifyKind::opacity_reset;
    CHECK(saw_reset);
}
