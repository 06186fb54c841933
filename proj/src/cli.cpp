#include "ctvos/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "ctvos/infer.hpp"
#include "ctvos/metrics.hpp"
#include "ctvos/png_io.hpp"
#include "ctvos/train.hpp"
#include "ctvos/verify.hpp"

namespace fs = std::filesystem;

namespace ctvos {

void write_overlay(const Image& frame, const IndexMask& masks, const std::string& out_path) {
    write_rgb_png(out_path, overlay(frame, masks));
}

namespace {

std::string frame_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d.png", i);
    return buf;
}

int cmd_synth(const std::string& out, int sequences, int frames, int width, int height, int seed,
              int min_objects, int max_objects, int max_speed, bool gradient_bg) {
    SceneConfig config;
    config.width = width;
    config.height = height;
    config.min_objects = min_objects;
    config.max_objects = max_objects;
    config.max_speed = max_speed;
    config.allow_gradient_background = gradient_bg;

    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < sequences; ++i) {
        uint64_t scene_seed = uint64_t(seed) * 1000003ull + uint64_t(i);
        Scene scene = generate_scene(scene_seed, config);
        char id[16];
        std::snprintf(id, sizeof id, "seq%04d", i);
        Clip clip = render_clip(scene, frames, id);
        write_corpus_sequence(out, clip);
        manifest.push_back({clip.id, scene_seed, frames, width, height, clip.num_objects});
    }
    write_manifest(out, manifest);
    std::cerr << "wrote " << sequences << " sequences to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& corpus, const std::string& out, const std::string& config_file,
              const std::string& resume, const std::map<std::string, std::string>& overrides) {
    TrainConfig config;
    if (!config_file.empty()) config = parse_config_file(config_file);
    for (const auto& [key, value] : overrides) set_config_key(config, key, value);
    config.validate();

    std::vector<Clip> dataset;
    for (const auto& entry : read_manifest(corpus))
        dataset.push_back(load_corpus_sequence(corpus, entry.id, /*with_masks=*/false));

    TrainResult result = run_training(dataset, config, out,
                                      resume.empty() ? std::nullopt
                                                     : std::optional<std::string>(resume),
                                      &std::cerr);
    std::cerr << "trained " << result.steps << " steps; checkpoint at " << result.checkpoint_path
              << "\n";
    return 0;
}

int cmd_propagate(const std::string& ckpt, const std::string& frames_dir,
                  const std::string& first_mask, const std::string& out, int window,
                  bool anchor) {
    LoadedCheckpoint loaded = load_checkpoint(ckpt);
    loaded.params.set_requires_grad(false);
    auto fns = make_model_pipeline(loaded.params);

    Clip clip = load_frame_directory(frames_dir);
    IndexMask first = read_indexed_png(first_mask);

    PropagateOptions options;
    options.window = window;
    options.anchor_first = anchor;
    auto masks = propagate_sequence(clip, first, fns, options);

    fs::create_directories(out);
    for (size_t t = 0; t < masks.size(); ++t)
        write_indexed_png(out + "/" + frame_name(int(t)), masks[t]);
    std::cerr << "wrote " << masks.size() << " masks to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out,
             const std::string& only_seq) {
    std::vector<EvalReport> reports;
    for (const auto& entry : read_manifest(gt)) {
        if (!only_seq.empty() && entry.id != only_seq) continue;
        Clip truth = load_corpus_sequence(gt, entry.id, /*with_masks=*/true);
        check(truth.has_gt(), "sequence ", entry.id, " has no annotations");

        std::string pred_dir = pred + "/" + entry.id;
        check(fs::is_directory(pred_dir), "missing prediction directory ", pred_dir);
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(pred_dir))
            if (e.is_regular_file() && e.path().extension() == ".png")
                names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        check(int(names.size()) == truth.size(), "sequence ", entry.id, ": ", names.size(),
              " predictions vs ", truth.size(), " frames");
        std::vector<IndexMask> masks;
        for (const auto& n : names) masks.push_back(read_indexed_png(pred_dir + "/" + n));
        reports.push_back(evaluate_sequence(entry.id, masks, truth.gt));
    }
    check(!reports.empty(), "nothing evaluated");
    EvalReport combined = combine_reports(reports);

    std::ofstream os(out);
    check(os.good(), "cannot write ", out);
    write_report_tsv(os, combined);
    std::cerr << "J " << combined.j_mean << "  F " << combined.f_mean << "  G " << combined.g()
              << "  -> " << out << "\n";
    return 0;
}

int cmd_visualize(const std::string& frames_dir, const std::string& masks_dir,
                  const std::string& out) {
    Clip clip = load_frame_directory(frames_dir, masks_dir);
    check(clip.has_gt(), "no masks found in ", masks_dir);
    fs::create_directories(out);
    for (int t = 0; t < clip.size(); ++t)
        write_overlay(clip.frames[t], clip.gt[t], out + "/" + frame_name(t));
    std::cerr << "wrote " << clip.size() << " overlays to " << out << "\n";
    return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"CT-VOS: self-supervised video object segmentation via cutout prediction"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic moving-shapes corpus");
    std::string synth_out;
    int sequences = 32, frames = 8, width = 64, height = 64, seed = 7;
    int min_objects = 1, max_objects = 3, max_speed = 3;
    bool gradient_bg = true;
    synth->add_option("--out", synth_out, "corpus root directory")->required();
    synth->add_option("--sequences", sequences, "number of sequences");
    synth->add_option("--frames", frames, "frames per sequence");
    synth->add_option("--width", width, "frame width");
    synth->add_option("--height", height, "frame height");
    synth->add_option("--seed", seed, "corpus seed");
    synth->add_option("--min-objects", min_objects, "minimum objects per scene");
    synth->add_option("--max-objects", max_objects, "maximum objects per scene");
    synth->add_option("--max-speed", max_speed, "maximum per-axis speed, px/frame");
    synth->add_option("--gradient-bg", gradient_bg, "allow 2-color gradient backgrounds");

    // train
    auto* train = app.add_subcommand("train", "train on a corpus");
    std::string train_corpus, train_out, train_config, train_resume;
    train->add_option("--corpus", train_corpus, "corpus root directory")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    std::map<std::string, std::string> overrides;
    for (const auto& key : config_keys()) {
        overrides[key];  // stable storage
        train->add_option("--" + key, overrides[key], "config override");
    }

    // propagate
    auto* prop = app.add_subcommand("propagate", "propagate a first-frame mask through frames");
    std::string prop_ckpt, prop_frames, prop_mask, prop_out;
    int prop_window = 7;
    bool prop_anchor = true;
    prop->add_option("--ckpt", prop_ckpt, "checkpoint file")->required();
    prop->add_option("--frames", prop_frames, "directory of ordered PNG frames")->required();
    prop->add_option("--first-mask", prop_mask, "indexed PNG mask for frame 0")->required();
    prop->add_option("--out", prop_out, "output mask directory")->required();
    prop->add_option("--window", prop_window, "past-frame window size");
    prop->add_option("--anchor-first", prop_anchor, "pin the ground-truth first frame");

    // eval
    auto* eval = app.add_subcommand("eval", "score predictions against corpus annotations");
    std::string eval_pred, eval_gt, eval_out = "eval_report.tsv", eval_seq;
    eval->add_option("--pred", eval_pred, "root of per-sequence prediction directories")
        ->required();
    eval->add_option("--gt", eval_gt, "corpus root with annotations")->required();
    eval->add_option("--out", eval_out, "report file (TSV)");
    eval->add_option("--seq", eval_seq, "evaluate a single sequence");

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference verification of all gradients");

    // visualize
    auto* vis = app.add_subcommand("visualize", "alpha-blend masks over frames");
    std::string vis_frames, vis_masks, vis_out;
    vis->add_option("--frames", vis_frames, "frame directory")->required();
    vis->add_option("--masks", vis_masks, "mask directory")->required();
    vis->add_option("--out", vis_out, "output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (app.got_subcommand("synth"))
            return cmd_synth(synth_out, sequences, frames, width, height, seed, min_objects,
                             max_objects, max_speed, gradient_bg);
        if (app.got_subcommand("train")) {
            std::map<std::string, std::string> set_overrides;
            for (const auto& [key, value] : overrides)
                if (train->count("--" + key)) set_overrides[key] = value;
            return cmd_train(train_corpus, train_out, train_config, train_resume, set_overrides);
        }
        if (app.got_subcommand("propagate"))
            return cmd_propagate(prop_ckpt, prop_frames, prop_mask, prop_out, prop_window,
                                 prop_anchor);
        if (app.got_subcommand("eval")) return cmd_eval(eval_pred, eval_gt, eval_out, eval_seq);
        if (app.got_subcommand("gradcheck"))
            return print_gradient_suite(std::cout) ? 0 : 2;
        if (app.got_subcommand("visualize")) return cmd_visualize(vis_frames, vis_masks, vis_out);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace ctvos
