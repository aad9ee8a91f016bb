#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "pgs/cli/cli.hpp"

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Shared tiny dataset for the CLI smoke tests.
const fs::path& fixture() {
    static const fs::path dir = [] {
        const fs::path p = temp_dir("pgs_cli_fixture");
        pgs::TeacherSceneOptions opt;
        opt.n_gaussians = 60;
        opt.n_views = 3;
        opt.resolution = 48;
        opt.seed = 11;
        pgs::make_teacher_scene(p.string(), opt);
        return p;
    }();
    return dir;
}

}  // namespace

TEST_CASE("unknown flags exit with the usage code") {
    CHECK(pgs::cli::run({"train", "--no-such-flag"}) == 2);
    CHECK(pgs::cli::run({"definitely-not-a-subcommand"}) == 2);
    CHECK(pgs::cli::run({}) == 2);
}

TEST_CASE("help exits cleanly") {
    CHECK(pgs::cli::run({"--help"}) == 0);
    CHECK(pgs::cli::run({"train", "--help"}) == 0);
    CHECK(pgs::cli::run({"od-table", "--help"}) == 0);
}

TEST_CASE("runtime errors exit with code 1") {
    CHECK(pgs::cli::run({"eval", "--checkpoint", "/definitely/missing.ckpt", "--data",
                         "/also/missing"}) == 1);
    const fs::path out = temp_dir("pgs_cli_badtrain");
    CHECK(pgs::cli::run({"train", "--data", "/nonexistent-dataset", "--out", out.string()}) == 1);
    fs::remove_all(out);
}

TEST_CASE("train smoke run writes checkpoints and a trace") {
    const fs::path out = temp_dir("pgs_cli_train");
    REQUIRE(pgs::cli::run({"train", "--data", fixture().string(), "--out", out.string(), "--iters",
                           "100", "--seed", "3", "--warmup-iters", "30", "--checkpoint-interval",
                           "50", "--eval-interval", "50"}) == 0);
    CHECK(fs::exists(out / "checkpoint.ckpt"));
    CHECK(fs::exists(out / "checkpoint_000050.ckpt"));
    CHECK(fs::exists(out / "checkpoint_000100.ckpt"));
    CHECK(fs::exists(out / "trace.csv"));
    CHECK(fs::exists(out / "events.log"));

    std::ifstream trace(out / "trace.csv");
    std::string header;
    std::getline(trace, header);
    CHECK(header == pgs::trace_csv_header());
    std::size_t rows = 0;
    std::string line;
    while (std::getline(trace, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 100);
    fs::remove_all(out);
}

TEST_CASE("eval of the teacher against its own dataset hits the psnr cap") {
    const fs::path csv = fs::temp_directory_path() / "pgs_cli_eval.csv";
    REQUIRE(pgs::cli::run({"eval", "--checkpoint", (fixture() / "teacher.ckpt").string(), "--data",
                           fixture().string(), "--csv", csv.string()}) == 0);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    int checked = 0;
    while (std::getline(in, line)) {
        if (line.rfind("mean,", 0) == 0) {
            CHECK(line.find("mean,100,1") == 0);
            ++checked;
        }
    }
    CHECK(checked == 1);
    fs::remove(csv);
}

TEST_CASE("render writes every branch") {
    const fs::path out = temp_dir("pgs_cli_render");
    for (const std::string branch : {"rgb", "sens", "depth", "alpha"}) {
        const auto path = (out / (branch + ".png")).string();
        REQUIRE(pgs::cli::run({"render", "--checkpoint", (fixture() / "teacher.ckpt").string(),
                               "--data", fixture().string(), "--view", "1", "--out", path,
                               "--branch", branch}) == 0);
        const auto img = pgs::read_png<float>(path);
        CHECK(img.width == 48);
        CHECK(img.channels == (branch == "rgb" ? 3 : 1));
    }
    CHECK(pgs::cli::run({"render", "--checkpoint", (fixture() / "teacher.ckpt").string(), "--data",
                         fixture().string(), "--view", "99", "--out",
                         (out / "x.png").string()}) == 1);
    fs::remove_all(out);
}

TEST_CASE("extract-sens writes binary maps and beta") {
    const fs::path out = temp_dir("pgs_cli_sens");
    REQUIRE(pgs::cli::run({"extract-sens", "--images", (fixture() / "images").string(), "--out",
                           out.string()}) == 0);
    CHECK(fs::exists(out / "beta.txt"));
    double beta = -1;
    std::ifstream(out / "beta.txt") >> beta;
    CHECK(beta > 0.0);
    CHECK(beta < 1.0);
    const auto map = pgs::read_png<float>((out / "view_000.png").string());
    CHECK(map.channels == 1);
    for (const float v : map.data) CHECK((v == 0.0f || v == 1.0f));
    fs::remove_all(out);
}

TEST_CASE("config file values are applied and flags override them") {
    const fs::path out = temp_dir("pgs_cli_cfg");
    const fs::path cfg_path = out / "run.cfg";
    std::ofstream(cfg_path) << "total_iters=40\nseed=9\nlambda_s=0.25\n";

    REQUIRE(pgs::cli::run({"train", "--data", fixture().string(), "--out", out.string(),
                           "--config", cfg_path.string(), "--iters", "25", "--warmup-iters", "10",
                           "--checkpoint-interval", "25", "--eval-interval", "25"}) == 0);
    const auto ck = pgs::load_checkpoint<float>((out / "checkpoint.ckpt").string());
    CHECK(ck.iteration == 25);            // flag wins
    CHECK(ck.config.lambda_s == 0.25);    // file value survives
    CHECK(ck.config.seed == 9);

    std::ofstream(cfg_path) << "bogus_key=1\n";
    CHECK(pgs::cli::run({"train", "--data", fixture().string(), "--out", out.string(), "--config",
                         cfg_path.string()}) == 1);
    fs::remove_all(out);
}
