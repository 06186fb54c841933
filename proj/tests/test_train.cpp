#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ctvos/train.hpp"

using namespace ctvos;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    auto path = fs::temp_directory_path() / ("ctvos_train_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
    return path.string();
}

Clip make_clip(uint64_t seed, int frames = 8) {
    SceneConfig config;
    config.max_objects = 2;
    return render_clip(generate_scene(seed, config), frames, cat("clip", seed));
}

TrainConfig tiny_config() {
    TrainConfig config;
    config.model = "tiny";
    config.epochs = 1;
    config.sample_m = 16;
    return config;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("default batch carries 10 frames: 7 past + current + 2 zoom views") {
    Clip clip = make_clip(1);
    TrainConfig config;
    Rng rng(2);
    TrainBatch batch = build_batch(clip, config, rng);
    CHECK(batch.key_inputs.size() == 9);    // 7 past + 2 zoom views
    CHECK(batch.value_inputs.size() == 9);
    CHECK(batch.current.h == 64);
    CHECK(batch.cutout.area() > 0);
    // 10 frames total: current + keys
    CHECK(1 + batch.key_inputs.size() == 10);
}

TEST_CASE("disabling zoom leaves 8 frames") {
    Clip clip = make_clip(3);
    TrainConfig config;
    config.zoom = false;
    Rng rng(2);
    TrainBatch batch = build_batch(clip, config, rng);
    CHECK(batch.key_inputs.size() == 7);
    CHECK(1 + batch.key_inputs.size() == 8);
}

TEST_CASE("zooming three past frames adds six views") {
    Clip clip = make_clip(4);
    TrainConfig config;
    config.zoom_frames = 3;
    Rng rng(2);
    TrainBatch batch = build_batch(clip, config, rng);
    CHECK(batch.key_inputs.size() == 7 + 6);
}

TEST_CASE("batches are reproducible for a fixed seed") {
    Clip clip = make_clip(5);
    TrainConfig config;
    Rng r1(9), r2(9);
    TrainBatch a = build_batch(clip, config, r1);
    TrainBatch b = build_batch(clip, config, r2);
    CHECK(a.current.data == b.current.data);
    CHECK(a.target.data == b.target.data);
    CHECK(a.cutout.m == b.cutout.m);
    for (size_t i = 0; i < a.key_inputs.size(); ++i) {
        CHECK(a.key_inputs[i].data == b.key_inputs[i].data);
        CHECK(a.value_inputs[i].data == b.value_inputs[i].data);
    }
}

TEST_CASE("cutout disabled means clean values and a clean target") {
    Clip clip = make_clip(6);
    TrainConfig config;
    config.cutout = false;
    config.tagging = false;
    config.zoom = false;
    Rng rng(3);
    TrainBatch batch = build_batch(clip, config, rng);
    CHECK(batch.cutout.area() == 0);
    CHECK(batch.target.data == batch.current.data);
    for (size_t i = 0; i < batch.key_inputs.size(); ++i)
        CHECK(batch.key_inputs[i].data == batch.value_inputs[i].data);
}

TEST_CASE("tagging without cutout is rejected") {
    TrainConfig config;
    config.cutout = false;
    CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("train_step reports finite losses and respects toggles") {
    Clip clip = make_clip(7);
    TrainConfig config = tiny_config();
    auto params = ModelParams<float>::init(config.model_dims(), config.seed);
    AdamState<float> opt;
    opt.init(params.param_list());

    SUBCASE("full objective fills every loss field") {
        Rng rng(4);
        TrainBatch batch = build_batch(clip, config, rng);
        LossReport r = train_step(batch, params, opt, config, rng);
        CHECK(r.reconstruction > 0);
        CHECK(r.tagging == doctest::Approx(r.pull + r.push));
        CHECK(r.overall == doctest::Approx(r.reconstruction + r.lambda * r.tagging));
        CHECK(opt.step == 1);
    }
    SUBCASE("tagging off zeroes its report fields exactly") {
        config.tagging = false;
        Rng rng(4);
        TrainBatch batch = build_batch(clip, config, rng);
        LossReport r = train_step(batch, params, opt, config, rng);
        CHECK(r.pull == 0.0);
        CHECK(r.push == 0.0);
        CHECK(r.tagging == 0.0);
        CHECK(r.overall == doctest::Approx(r.reconstruction));
    }
    SUBCASE("plain reconstruction config reduces to the bare objective") {
        config.tagging = false;
        config.cutout = false;
        config.zoom = false;
        Rng rng(4);
        TrainBatch batch = build_batch(clip, config, rng);
        LossReport r = train_step(batch, params, opt, config, rng);
        CHECK(r.tagging == 0.0);
        CHECK(r.overall == doctest::Approx(r.reconstruction));
    }
    SUBCASE("bce substitute lands in the tagging slot") {
        config.tagging = false;
        config.bce = true;
        Rng rng(4);
        TrainBatch batch = build_batch(clip, config, rng);
        LossReport r = train_step(batch, params, opt, config, rng);
        CHECK(r.pull == 0.0);
        CHECK(r.tagging > 0.0);
        CHECK(r.overall == doctest::Approx(r.reconstruction + r.lambda * r.tagging));
    }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    Clip clip = make_clip(8);
    TrainConfig config = tiny_config();
    config.lr = 0.0;
    auto params = ModelParams<float>::init(config.model_dims(), 1);
    AdamState<float> opt;
    opt.init(params.param_list());
    auto before = params.param_list()[0]->value;
    Rng rng(5);
    TrainBatch batch = build_batch(clip, config, rng);
    train_step(batch, params, opt, config, rng);
    CHECK(params.param_list()[0]->value == before);
}

TEST_CASE("with gradients disabled for a term its private parameters stay fixed") {
    // The tag head row (output channel 3) feeds only the tagging objective.
    Clip clip = make_clip(9);
    TrainConfig config = tiny_config();
    config.tagging = false;
    auto params = ModelParams<float>::init(config.model_dims(), 1);
    AdamState<float> opt;
    opt.init(params.param_list());

    const auto& head = params.dec.back();
    int in_ch = head.w->shape[1];
    auto row_of = [&](int out_ch) {
        size_t row = size_t(out_ch) * in_ch * 9;
        return std::vector<float>(head.w->value.begin() + row,
                                  head.w->value.begin() + row + size_t(in_ch) * 9);
    };
    auto tag_row_before = row_of(3);
    auto recon_row_before = row_of(0);
    float tag_bias_before = head.b->value[3];

    Rng rng(6);
    TrainBatch batch = build_batch(clip, config, rng);
    train_step(batch, params, opt, config, rng);

    CHECK(row_of(3) == tag_row_before);
    CHECK(head.b->value[3] == tag_bias_before);
    CHECK(row_of(0) != recon_row_before);
}

TEST_CASE("a single uniform clip is overfit within 20 steps") {
    // Reconstruction-only objective on one static clip: loss must drop.
    Scene scene;
    scene.width = scene.height = 32;
    scene.background.color_a = {0.2f, 0.5f, 0.7f};
    SceneObject obj;
    obj.kind = ShapeKind::square;
    obj.color = {0.9f, 0.2f, 0.1f};
    obj.size = 6;
    obj.position = {16, 16};
    obj.velocity = {0, 0};
    scene.objects.push_back(obj);
    Clip clip = render_clip(scene, 8);

    TrainConfig config = tiny_config();
    config.tagging = false;
    config.zoom = false;
    config.lambda = 0.0;
    config.hflip = config.treverse = config.rcrop = false;
    config.lr = 1e-3;  // overfitting probe, not the training default

    auto params = ModelParams<float>::init(config.model_dims(), 2);
    AdamState<float> opt;
    opt.init(params.param_list());
    Rng rng(7);
    double first = 0, last = 0;
    for (int step = 0; step < 20; ++step) {
        TrainBatch batch = build_batch(clip, config, rng);
        LossReport r = train_step(batch, params, opt, config, rng);
        if (step == 0) first = r.reconstruction;
        last = r.reconstruction;
    }
    CHECK(last < first);
}

TEST_CASE("run_training logs one row per step and writes a checkpoint") {
    std::string out = temp_dir("logging");
    std::vector<Clip> dataset = {make_clip(10), make_clip(11)};
    TrainConfig config = tiny_config();
    TrainResult result = run_training(dataset, config, out);
    CHECK(result.steps == 2);

    std::ifstream log(result.log_path);
    REQUIRE(log.good());
    std::string line;
    std::getline(log, line);
    CHECK(line == "step\treconstruction\tpull\tpush\ttagging\toverall");
    int rows = 0;
    while (std::getline(log, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
    CHECK(fs::exists(result.checkpoint_path));
}

TEST_CASE("resuming restores the optimizer step counter and parameters exactly") {
    std::string out1 = temp_dir("resume_a");
    std::string out2 = temp_dir("resume_b");
    std::vector<Clip> dataset = {make_clip(12), make_clip(13)};
    TrainConfig config = tiny_config();
    config.epochs = 2;
    TrainResult first = run_training(dataset, config, out1);
    CHECK(first.steps == 4);

    LoadedCheckpoint before = load_checkpoint(first.checkpoint_path);
    REQUIRE(before.opt.has_value());
    CHECK(before.opt->step == 4);

    TrainConfig more = config;
    more.epochs = 1;
    TrainResult second = run_training(dataset, more, out2, first.checkpoint_path);
    CHECK(second.steps == 2);
    LoadedCheckpoint after = load_checkpoint(second.checkpoint_path);
    REQUIRE(after.opt.has_value());
    CHECK(after.opt->step == 6);
}

TEST_CASE("identical config and seed give byte-identical logs and checkpoints") {
    std::string out1 = temp_dir("repro_a");
    std::string out2 = temp_dir("repro_b");
    std::vector<Clip> dataset = {make_clip(14), make_clip(15), make_clip(16)};
    TrainConfig config = tiny_config();
    config.epochs = 2;
    TrainResult a = run_training(dataset, config, out1);
    TrainResult b = run_training(dataset, config, out2);
    CHECK(slurp(a.log_path) == slurp(b.log_path));
    CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
    CHECK(!slurp(a.log_path).empty());
}

TEST_CASE("config files round-trip through the parser with unknown keys rejected") {
    std::string dir = temp_dir("config");
    {
        std::ofstream f(dir + "/good.cfg");
        f << "# comment\nlr=0.001\nepochs=3\ncutout_shape=circle\ntagging=false\nzoom=false\n"
          << "cutout=true\nseed=42\n";
    }
    TrainConfig config = parse_config_file(dir + "/good.cfg");
    CHECK(config.lr == doctest::Approx(0.001));
    CHECK(config.epochs == 3);
    CHECK(config.cutout_shape == "circle");
    CHECK(config.tagging == false);
    CHECK(config.seed == 42);

    {
        std::ofstream f(dir + "/bad.cfg");
        f << "learning_rate=0.1\n";
    }
    CHECK_THROWS_AS(parse_config_file(dir + "/bad.cfg"), UsageError);

    CHECK_THROWS_AS(set_config_key(config, "epochs", "three"), UsageError);
}
