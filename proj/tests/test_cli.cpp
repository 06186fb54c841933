#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ctvos/checkpoint.hpp"
#include "ctvos/cli.hpp"
#include "ctvos/png_io.hpp"
#include "ctvos/videogen.hpp"

using namespace ctvos;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    auto path = fs::temp_directory_path() / ("ctvos_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
    return path.string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("unknown subcommands and flags exit with usage errors") {
    CHECK(run_command({"frobnicate"}) == 1);
    CHECK(run_command({"synth", "--no-such-flag", "x"}) == 1);
    CHECK(run_command({}) == 1);
}

TEST_CASE("synth writes a manifest-led corpus and is idempotent") {
    std::string out1 = temp_dir("synth_a");
    std::string out2 = temp_dir("synth_b");
    std::vector<std::string> args = {"synth", "--sequences", "3", "--frames", "8",
                                     "--seed", "5", "--out", ""};
    args.back() = out1;
    REQUIRE(run_command(args) == 0);
    args.back() = out2;
    REQUIRE(run_command(args) == 0);

    auto manifest = read_manifest(out1);
    REQUIRE(manifest.size() == 3);
    CHECK(fs::exists(out1 + "/JPEGImages/seq0000/00000.png"));
    CHECK(fs::exists(out1 + "/Annotations/seq0002/00007.png"));
    CHECK(slurp(out1 + "/manifest.txt") == slurp(out2 + "/manifest.txt"));
    CHECK(slurp(out1 + "/JPEGImages/seq0001/00003.png") ==
          slurp(out2 + "/JPEGImages/seq0001/00003.png"));
}

TEST_CASE("missing corpus paths are data errors, not usage errors") {
    std::string out = temp_dir("train_missing");
    CHECK(run_command({"train", "--corpus", out + "/nope", "--out", out + "/run"}) == 2);
}

TEST_CASE("train then propagate then eval runs end to end") {
    std::string root = temp_dir("e2e");
    std::string corpus = root + "/corpus";
    REQUIRE(run_command({"synth", "--out", corpus, "--sequences", "2", "--frames", "8",
                         "--seed", "3"}) == 0);

    // one tiny-model epoch: exercises the pipeline, not the quality
    REQUIRE(run_command({"train", "--corpus", corpus, "--out", root + "/run", "--model", "tiny",
                         "--epochs", "1", "--sample_m", "8", "--seed", "1"}) == 0);
    REQUIRE(fs::exists(root + "/run/model.ctvs"));
    REQUIRE(fs::exists(root + "/run/loss_log.tsv"));

    REQUIRE(run_command({"propagate", "--ckpt", root + "/run/model.ctvs", "--frames",
                         corpus + "/JPEGImages/seq0000", "--first-mask",
                         corpus + "/Annotations/seq0000/00000.png", "--out",
                         root + "/preds/seq0000"}) == 0);
    CHECK(fs::exists(root + "/preds/seq0000/00007.png"));

    // predictions for the other sequence too, then score everything
    REQUIRE(run_command({"propagate", "--ckpt", root + "/run/model.ctvs", "--frames",
                         corpus + "/JPEGImages/seq0001", "--first-mask",
                         corpus + "/Annotations/seq0001/00000.png", "--out",
                         root + "/preds/seq0001"}) == 0);
    REQUIRE(run_command({"eval", "--pred", root + "/preds", "--gt", corpus, "--out",
                         root + "/report.tsv"}) == 0);
    std::string report = slurp(root + "/report.tsv");
    CHECK(report.find("sequence\tobject\tJ\tF\tG") == 0);
    CHECK(report.find("MEAN") != std::string::npos);
}

TEST_CASE("config file keys are honored and overridden by flags") {
    std::string root = temp_dir("config_precedence");
    std::string corpus = root + "/corpus";
    REQUIRE(run_command({"synth", "--out", corpus, "--sequences", "1", "--frames", "8",
                         "--seed", "2"}) == 0);
    {
        std::ofstream f(root + "/train.cfg");
        f << "model=tiny\nepochs=2\nsample_m=8\nseed=9\n";
    }
    REQUIRE(run_command({"train", "--corpus", corpus, "--out", root + "/run", "--config",
                         root + "/train.cfg", "--epochs", "1"}) == 0);
    // flag epochs=1 overrides the file's 2: one sequence -> exactly 1 step
    std::string log = slurp(root + "/run/loss_log.tsv");
    int rows = -1;  // header
    for (char ch : log)
        if (ch == '\n') ++rows;
    CHECK(rows == 1);
}

TEST_CASE("unknown config keys exit with a usage error") {
    std::string root = temp_dir("bad_config");
    std::string corpus = root + "/corpus";
    REQUIRE(run_command({"synth", "--out", corpus, "--sequences", "1", "--frames", "8"}) == 0);
    {
        std::ofstream f(root + "/train.cfg");
        f << "warp_speed=9\n";
    }
    CHECK(run_command({"train", "--corpus", corpus, "--out", root + "/run", "--config",
                       root + "/train.cfg"}) == 1);
}

TEST_CASE("visualize blends masks over frames") {
    std::string root = temp_dir("visualize");
    std::string corpus = root + "/corpus";
    REQUIRE(run_command({"synth", "--out", corpus, "--sequences", "1", "--frames", "8",
                         "--seed", "4"}) == 0);
    REQUIRE(run_command({"visualize", "--frames", corpus + "/JPEGImages/seq0000", "--masks",
                         corpus + "/Annotations/seq0000", "--out", root + "/viz"}) == 0);
    CHECK(fs::exists(root + "/viz/00000.png"));
    Image blended = read_rgb_png(root + "/viz/00000.png");
    CHECK(blended.h == 64);
}

TEST_CASE("overlay output equals the frame when the mask set is empty") {
    std::string root = temp_dir("overlay");
    Image frame(16, 16, 3, 0.f);
    Rng rng(12);
    for (auto& v : frame.data) v = float(int(rng.uniform() * 255) / 255.0);
    IndexMask empty(16, 16);
    write_overlay(frame, empty, root + "/plain.png");
    Image back = read_rgb_png(root + "/plain.png");
    for (size_t i = 0; i < frame.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(frame.data[i]).epsilon(1e-6));

    IndexMask full(16, 16);
    for (auto& v : full.idx) v = 1;
    write_overlay(frame, full, root + "/tinted.png");
    Image tinted = read_rgb_png(root + "/tinted.png");
    CHECK(tinted.data != back.data);

    IndexMask two(16, 16);
    for (int x = 0; x < 16; ++x) {
        two.at(4, x) = 1;
        two.at(10, x) = 2;
    }
    write_overlay(frame, two, root + "/two.png");
    Image blended = read_rgb_png(root + "/two.png");
    bool differ = false;
    for (int ch = 0; ch < 3 && !differ; ++ch)
        differ = blended.at(ch, 4, 3) != blended.at(ch, 10, 3);
    CHECK(differ);  // two objects, two palette colors
}
