#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "pgs/io/dataset.hpp"
#include "pgs/loss/losses.hpp"

using namespace pgs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

TeacherSceneOptions small_scene() {
    TeacherSceneOptions opt;
    opt.n_gaussians = 60;
    opt.n_views = 3;
    opt.resolution = 48;
    opt.seed = 5;
    return opt;
}

}  // namespace

TEST_CASE("png round-trip preserves 8-bit data exactly") {
    const fs::path dir = temp_dir("pgs_png_test");
    Rng rng(3);

    Image<float> img(21, 17, 3);
    for (auto& v : img.data) v = float(rng.next_below(256)) / 255.0f;
    write_png((dir / "a.png").string(), img);
    const auto back = read_png<float>((dir / "a.png").string());
    REQUIRE(back.same_shape(img));
    CHECK(back.data == img.data);

    Image<float> gray(9, 11, 1);
    for (auto& v : gray.data) v = float(rng.next_below(2));
    write_png((dir / "g.png").string(), gray);
    const auto gback = read_png<float>((dir / "g.png").string());
    CHECK(gback.channels == 1);
    CHECK(gback.data == gray.data);
    fs::remove_all(dir);
}

TEST_CASE("quantization rounds half away from zero") {
    CHECK(quantize8(0.0) == 0);
    CHECK(quantize8(1.0) == 255);
    CHECK(quantize8(0.5 / 255.0) == 1);          // exactly half rounds up
    CHECK(quantize8(0.49999 / 255.0) == 0);
    CHECK(quantize8(-0.3) == 0);
    CHECK(quantize8(2.0) == 255);
}

TEST_CASE("teacher scene generation is byte-deterministic") {
    const fs::path a = temp_dir("pgs_scene_a");
    const fs::path b = temp_dir("pgs_scene_b");
    make_teacher_scene(a.string(), small_scene());
    make_teacher_scene(b.string(), small_scene());

    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        INFO(rel.string());
        REQUIRE(fs::exists(b / rel));
        CHECK(read_bytes(entry.path()) == read_bytes(b / rel));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("teacher re-render reproduces the written images exactly") {
    const fs::path dir = temp_dir("pgs_scene_rt");
    make_teacher_scene(dir.string(), small_scene());

    const auto ck = load_checkpoint<float>((dir / "teacher.ckpt").string());
    const auto ds = load_dataset<float>(dir.string(), LoadOptions{});
    for (const auto& view : ds.views) {
        const auto out = render(ck.set, view.camera, RenderOptions<float>{});
        const auto q = quantize_unit(out.rgb);
        REQUIRE(q.data == view.gt_image.data);
    }
    fs::remove_all(dir);
}

TEST_CASE("sensitivity maps are cached on first load and reused bit-exactly") {
    const fs::path dir = temp_dir("pgs_scene_cache");
    make_teacher_scene(dir.string(), small_scene());
    CHECK_FALSE(fs::exists(dir / "sens"));

    const auto first = load_dataset<float>(dir.string(), LoadOptions{});
    CHECK(fs::exists(dir / "sens"));
    const auto second = load_dataset<float>(dir.string(), LoadOptions{});
    REQUIRE(first.views.size() == second.views.size());
    for (std::size_t v = 0; v < first.views.size(); ++v)
        CHECK(first.views[v].sens_map.data == second.views[v].sens_map.data);
    CHECK(first.beta == second.beta);
    fs::remove_all(dir);
}

TEST_CASE("teacher scene has a non-trivial sensitivity structure") {
    const fs::path dir = temp_dir("pgs_scene_beta");
    make_teacher_scene(dir.string(), small_scene());
    const auto ds = load_dataset<float>(dir.string(), LoadOptions{});
    CHECK(ds.beta > 0.0f);
    CHECK(ds.beta < 1.0f);
    CHECK(ds.views.size() == 3);
    for (const auto& v : ds.views) {
        CHECK(v.gt_image.width == 48);
        CHECK(v.gt_image.height == 48);
        CHECK(v.sens_map.width == 48);
    }
    CHECK_FALSE(ds.init_points.empty());
    fs::remove_all(dir);
}

TEST_CASE("loader errors name the offending file") {
    const fs::path dir = temp_dir("pgs_scene_err");

    SECTION("missing cameras.json") {
        CHECK_THROWS_WITH(load_dataset<float>(dir.string(), LoadOptions{}),
                          Catch::Contains("cameras.json"));
    }
    SECTION("malformed json") {
        std::ofstream(dir / "cameras.json") << "{ not json";
        CHECK_THROWS_WITH(load_dataset<float>(dir.string(), LoadOptions{}),
                          Catch::Contains("malformed"));
    }
    SECTION("missing image named in the error") {
        make_teacher_scene(dir.string(), small_scene());
        fs::remove(dir / "images" / "view_001.png");
        CHECK_THROWS_WITH(load_dataset<float>(dir.string(), LoadOptions{}),
                          Catch::Contains("view_001.png"));
    }
    SECTION("size-mismatched sensitivity map") {
        make_teacher_scene(dir.string(), small_scene());
        fs::create_directories(dir / "sens");
        Image<float> wrong(12, 12, 1, 1.0f);
        write_png((dir / "sens" / "view_000.png").string(), wrong);
        CHECK_THROWS_WITH(load_dataset<float>(dir.string(), LoadOptions{}),
                          Catch::Contains("view_000.png"));
    }
    SECTION("non-orthonormal camera rotation") {
        make_teacher_scene(dir.string(), small_scene());
        std::ifstream in(dir / "cameras.json");
        nlohmann::json cams;
        in >> cams;
        in.close();
        cams[0]["world_to_cam"][0] = 2.0;
        std::ofstream(dir / "cameras.json") << cams.dump(2);
        CHECK_THROWS_WITH(load_dataset<float>(dir.string(), LoadOptions{}),
                          Catch::Contains("orthonormal"));
    }
    fs::remove_all(dir);
}

TEST_CASE("points.txt feeds initialization; absence falls back to frustum sampling") {
    const fs::path dir = temp_dir("pgs_scene_pts");
    make_teacher_scene(dir.string(), small_scene());

    const auto with_points = load_dataset<float>(dir.string(), LoadOptions{});
    std::size_t file_lines = 0;
    {
        std::ifstream in(dir / "points.txt");
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) ++file_lines;
    }
    CHECK(with_points.init_points.size() == file_lines);

    fs::remove(dir / "points.txt");
    LoadOptions lo;
    lo.random_init_points = 50;
    lo.seed = 4;
    const auto sampled = load_dataset<float>(dir.string(), lo);
    CHECK(sampled.init_points.size() == 50);
    // Sampled points sit inside every camera frustum.
    for (const auto& p : sampled.init_points) {
        for (const auto& view : sampled.views) {
            const Vec3<double> t = view.camera.to_camera(p.cast<double>());
            CHECK(t[2] > kNearPlane);
            const double px = view.camera.fx * t[0] / t[2] + view.camera.cx;
            const double py = view.camera.fy * t[1] / t[2] + view.camera.cy;
            CHECK(px >= 0.0);
            CHECK(px < view.camera.width);
            CHECK(py >= 0.0);
            CHECK(py < view.camera.height);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("gray ground-truth images are promoted to rgb") {
    const fs::path dir = temp_dir("pgs_scene_gray");
    fs::create_directories(dir / "images");
    Image<float> gray(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) gray.at(y, x) = float((x / 4 + y / 4) % 2);
    write_png((dir / "images" / "g.png").string(), gray);
    {
        nlohmann::ordered_json cams = nlohmann::ordered_json::array();
        Camera cam;
        cam.fx = cam.fy = 20;
        cam.cx = cam.cy = 8;
        cam.width = cam.height = 16;
        cams.push_back(detail::camera_to_json(cam, "g.png"));
        std::ofstream(dir / "cameras.json") << cams.dump(2);
    }
    const auto ds = load_dataset<float>(dir.string(), LoadOptions{});
    REQUIRE(ds.views.size() == 1);
    CHECK(ds.views[0].gt_image.channels == 3);
    CHECK(ds.views[0].gt_image.at(2, 2, 0) == ds.views[0].gt_image.at(2, 2, 2));
    fs::remove_all(dir);
}
