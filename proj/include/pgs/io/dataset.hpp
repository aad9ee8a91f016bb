#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgs/core/camera.hpp"
#include "pgs/core/checkpoint.hpp"
#include "pgs/core/gaussian_set.hpp"
#include "pgs/core/random.hpp"
#include "pgs/io/png_io.hpp"
#include "pgs/render/rasterizer.hpp"
#include "pgs/sens/sensitivity.hpp"

namespace pgs {

namespace fs = std::filesystem;

// On-disk dataset layout:
//   cameras.json      list of {fx,fy,cx,cy,width,height,world_to_cam,image}
//   images/*.png      ground-truth RGB
//   sens/*.png        optional cached binary maps ({0,255}), written on load
//   points.txt        optional "x y z r g b" per line for initialization
template <class T>
struct Dataset {
    std::vector<View<T>> views;
    std::vector<Vec3<T>> init_points;
    std::vector<Vec3<T>> init_colors;
    T beta = T(0);
};

struct LoadOptions {
    ExtractOptions extract;
    int random_init_points = 100;  // used when points.txt is absent
    std::uint64_t seed = 0;
    bool use_cached_sens = true;
    bool raw_response_maps = false;  // no-enhancement ablation targets
};

namespace detail {

inline Camera camera_from_json(const nlohmann::json& j) {
    Camera cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const auto& w2c = j.at("world_to_cam");
    if (w2c.size() != 16) throw std::runtime_error("world_to_cam must have 16 entries");
    for (int i = 0; i < 16; ++i) cam.world_to_cam[std::size_t(i)] = w2c[std::size_t(i)].get<double>();
    return cam;
}

inline nlohmann::ordered_json camera_to_json(const Camera& cam, const std::string& image_name) {
    nlohmann::ordered_json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["world_to_cam"] = cam.world_to_cam;
    j["image"] = image_name;
    return j;
}

// Uniform points inside the intersection of all camera frusta, found by
// rejection sampling from the scene bounding box.
template <class T>
inline std::vector<Vec3<T>> sample_frustum_points(const std::vector<View<T>>& views, int count,
                                                  std::uint64_t seed) {
    Rng rng(seed ^ 0x9d2c5680u);
    Vec3<double> lo(1e30, 1e30, 1e30), hi(-1e30, -1e30, -1e30);
    for (const auto& v : views) {
        const Vec3<double> c = v.camera.center();
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
    const Vec3<double> mid = (lo + hi) / 2;
    const double span = std::max((hi - lo).norm(), 1.0);
    auto inside_all = [&](const Vec3<double>& p) {
        for (const auto& v : views) {
            const Vec3<double> t = v.camera.to_camera(p);
            if (t[2] <= kNearPlane) return false;
            const double px = v.camera.fx * t[0] / t[2] + v.camera.cx;
            const double py = v.camera.fy * t[1] / t[2] + v.camera.cy;
            if (px < 0 || px >= v.camera.width || py < 0 || py >= v.camera.height) return false;
        }
        return true;
    };
    std::vector<Vec3<T>> out;
    long attempts = 0;
    const long max_attempts = 20000L * std::max(count, 1);
    while (int(out.size()) < count && attempts < max_attempts) {
        ++attempts;
        Vec3<double> p;
        for (int k = 0; k < 3; ++k) p[k] = mid[k] + rng.uniform(-span, span);
        if (inside_all(p)) out.push_back(p.template cast<T>());
    }
    while (int(out.size()) < count) {  // degenerate frusta; fall back to the box
        Vec3<double> p;
        for (int k = 0; k < 3; ++k) p[k] = mid[k] + rng.uniform(-span, span);
        out.push_back(p.template cast<T>());
    }
    return out;
}

}  // namespace detail

template <class T>
inline Dataset<T> load_dataset(const std::string& dir, const LoadOptions& opts = {}) {
    const fs::path root(dir);
    const fs::path cameras_path = root / "cameras.json";
    if (!fs::exists(cameras_path))
        throw std::runtime_error("missing cameras.json in '" + dir + "'");

    nlohmann::json doc;
    {
        std::ifstream in(cameras_path);
        try {
            in >> doc;
        } catch (const std::exception& e) {
            throw std::runtime_error("malformed JSON in '" + cameras_path.string() + "': " + e.what());
        }
    }
    if (!doc.is_array() || doc.empty())
        throw std::runtime_error("'" + cameras_path.string() + "' must be a non-empty array");

    Dataset<T> ds;
    const fs::path sens_dir = root / "sens";
    for (const auto& entry : doc) {
        View<T> view;
        try {
            view.camera = detail::camera_from_json(entry);
        } catch (const std::exception& e) {
            throw std::runtime_error("bad camera entry in cameras.json: " + std::string(e.what()));
        }
        const std::string image_name = entry.at("image").get<std::string>();
        if (const auto issues = view.camera.validate(); !issues.empty())
            throw std::runtime_error("invalid camera for image '" + image_name +
                                     "': " + issues.front());
        const fs::path image_path = root / "images" / image_name;
        if (!fs::exists(image_path))
            throw std::runtime_error("camera references missing image '" + image_path.string() + "'");
        view.gt_image = read_png<T>(image_path.string());
        if (view.gt_image.channels == 1) {
            Image<T> rgb(view.gt_image.width, view.gt_image.height, 3);
            for (int y = 0; y < rgb.height; ++y)
                for (int x = 0; x < rgb.width; ++x)
                    for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = view.gt_image.at(y, x);
            view.gt_image = std::move(rgb);
        }
        if (view.gt_image.width != view.camera.width || view.gt_image.height != view.camera.height)
            throw std::runtime_error("image '" + image_path.string() +
                                     "' does not match its camera dimensions");

        const fs::path sens_path = sens_dir / image_name;
        if (opts.raw_response_maps) {
            view.sens_map = raw_response_map(view.gt_image);
        } else if (opts.use_cached_sens && fs::exists(sens_path)) {
            Image<T> map = read_png<T>(sens_path.string());
            if (map.channels != 1)
                throw std::runtime_error("sensitivity map '" + sens_path.string() +
                                         "' must be single-channel");
            if (map.width != view.camera.width || map.height != view.camera.height)
                throw std::runtime_error("sensitivity map '" + sens_path.string() +
                                         "' does not match image dimensions");
            for (auto& v : map.data) {
                if (v != T(0) && v != T(1)) {
                    if (v > T(0.5))
                        v = T(1);
                    else
                        v = T(0);
                }
            }
            view.sens_map = std::move(map);
        } else {
            view.sens_map = extract_sensitivity(view.gt_image, opts.extract);
            if (opts.use_cached_sens) {
                fs::create_directories(sens_dir);
                write_png(sens_path.string(), view.sens_map);
            }
        }
        view.avg_sensitivity = View<T>::mean_of(view.sens_map);
        ds.views.push_back(std::move(view));
    }
    ds.beta = scene_sensitivity(ds.views);

    const fs::path points_path = root / "points.txt";
    if (fs::exists(points_path)) {
        std::ifstream in(points_path);
        double x, y, z, r, g, b;
        while (in >> x >> y >> z >> r >> g >> b) {
            ds.init_points.push_back(Vec3<T>(T(x), T(y), T(z)));
            ds.init_colors.push_back(Vec3<T>(T(r), T(g), T(b)));
        }
        if (ds.init_points.empty())
            throw std::runtime_error("'" + points_path.string() + "' contains no points");
    } else {
        ds.init_points = detail::sample_frustum_points(ds.views, opts.random_init_points, opts.seed);
        ds.init_colors.assign(ds.init_points.size(), Vec3<T>(T(0.5), T(0.5), T(0.5)));
    }
    return ds;
}

// ---- Synthetic teacher scene ---------------------------------------------

struct TeacherSceneOptions {
    int n_gaussians = 300;
    int n_views = 5;
    int resolution = 128;
    std::uint64_t seed = 7;
    double ring_radius = 2.4;
};

// Ground truth rendered from a known primitive set: large soft background
// shapes plus tight high-frequency clusters so the extracted sensitivity maps
// have structure. Writes images, cameras, a noisy 10% subsample of the
// teacher means as points.txt, and the teacher checkpoint itself.
inline void make_teacher_scene(const std::string& dir, const TeacherSceneOptions& opt = {}) {
    using T = float;
    Rng rng(opt.seed);

    GaussianSet<T> teacher;
    const int n = opt.n_gaussians;
    teacher.resize(std::size_t(n));
    const int n_background = n / 2;
    const int n_cluster_centers = 6;
    std::vector<Vec3<double>> centers;
    for (int c = 0; c < n_cluster_centers; ++c)
        centers.push_back(Vec3<double>(rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35),
                                       rng.uniform(-0.35, 0.35)));

    for (int i = 0; i < n; ++i) {
        Vec3<double> mean;
        double smin, smax;
        const bool background = i < n_background;
        if (background) {
            for (int k = 0; k < 3; ++k) mean[k] = rng.uniform(-0.5, 0.5);
            smin = 0.08;
            smax = 0.22;
        } else {
            const auto& c = centers[std::size_t(rng.next_below(std::uint64_t(centers.size())))];
            for (int k = 0; k < 3; ++k) mean[k] = c[k] + 0.06 * rng.normal();
            smin = 0.008;
            smax = 0.03;
        }
        // Muted background palette keeps the smooth regions edge-free; the
        // clusters carry the high-contrast structure.
        const double tone = rng.uniform(0.35, 0.55);
        for (int k = 0; k < 3; ++k) {
            teacher.means[3 * std::size_t(i) + k] = T(mean[k]);
            teacher.log_scales[3 * std::size_t(i) + k] = T(std::log(rng.uniform(smin, smax)));
            teacher.colors[3 * std::size_t(i) + k] =
                background ? T(tone + rng.uniform(-0.08, 0.08)) : T(rng.uniform(0.05, 0.95));
        }
        T q[4];
        T norm = T(0);
        for (int k = 0; k < 4; ++k) {
            q[k] = T(rng.normal());
            norm += q[k] * q[k];
        }
        norm = std::sqrt(norm);
        for (int k = 0; k < 4; ++k) teacher.rotations[4 * std::size_t(i) + k] = q[k] / norm;
        teacher.opacity_logits[std::size_t(i)] = T(logit(rng.uniform(0.5, 0.95)));
        teacher.sensitivity_logits[std::size_t(i)] = T(0);
    }

    const fs::path root(dir);
    fs::create_directories(root / "images");

    nlohmann::ordered_json cams = nlohmann::ordered_json::array();
    RenderOptions<T> ropts;
    for (int v = 0; v < opt.n_views; ++v) {
        const double angle = 2.0 * 3.14159265358979323846 * double(v) / double(opt.n_views);
        const double elevation = 0.35 * ((v % 2 == 0) ? 1.0 : -1.0);
        const Vec3<double> pos(opt.ring_radius * std::cos(angle), opt.ring_radius * std::sin(angle),
                               opt.ring_radius * std::sin(elevation));

        const Vec3<double> forward = (-pos).normalized();
        Vec3<double> up(0, 0, 1);
        if (std::abs(forward.dot(up)) > 0.99) up = Vec3<double>(0, 1, 0);
        const Vec3<double> right = forward.cross(up).normalized();
        const Vec3<double> down = forward.cross(right).normalized();

        Camera cam;
        cam.width = cam.height = opt.resolution;
        cam.fx = cam.fy = 1.2 * opt.resolution;
        cam.cx = opt.resolution / 2.0;
        cam.cy = opt.resolution / 2.0;
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

        std::ostringstream name;
        name << "view_" << std::setw(3) << std::setfill('0') << v << ".png";
        const auto out = render(teacher, cam, ropts);
        write_png((root / "images" / name.str()).string(), out.rgb);
        cams.push_back(detail::camera_to_json(cam, name.str()));
    }
    {
        std::ofstream os(root / "cameras.json");
        os << cams.dump(2) << "\n";
    }

    // Sparse noisy initialization: 10% of the teacher means.
    {
        std::vector<std::size_t> idx(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        shuffle(idx, rng);
        const std::size_t keep = std::max<std::size_t>(1, std::size_t(n) / 10);
        idx.resize(keep);
        std::sort(idx.begin(), idx.end());
        std::ofstream os(root / "points.txt");
        os.precision(9);
        for (const std::size_t i : idx) {
            for (int k = 0; k < 3; ++k)
                os << teacher.means[3 * i + std::size_t(k)] + T(0.02 * rng.normal()) << ' ';
            os << teacher.colors[3 * i] << ' ' << teacher.colors[3 * i + 1] << ' '
               << teacher.colors[3 * i + 2] << '\n';
        }
    }
    save_checkpoint((root / "teacher.ckpt").string(), teacher, 0, TrainConfig{});
}

}  // namespace pgs
