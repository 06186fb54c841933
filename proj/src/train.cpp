#include "ctvos/train.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace ctvos {

void TrainConfig::validate() const {
    check(clip_len >= 2, "clip_len must be at least 2");
    check(clip_len >= 8, "training requires 8-frame clips (7 past + 1 current), got clip_len=",
          clip_len);
    check(lr > 0 && beta1 > 0 && beta2 > 0 && eps > 0, "optimizer rates must be positive");
    check(beta1 < 1 && beta2 < 1, "adam betas must be below 1");
    check(epochs >= 1, "epochs must be at least 1");
    check(grad_accum >= 1, "grad_accum must be at least 1");
    check(lambda >= 0, "lambda must be non-negative");
    check(margin > 0, "margin must be positive");
    check(sample_m >= 2, "sample_m must be at least 2");
    check(zoom_levels >= 1, "zoom_levels must be at least 1");
    check(zoom_frames == 1 || zoom_frames == 3 || zoom_frames == 5,
          "zoom_frames must be 1, 3, or 5");
    check(!(tagging && !cutout), "tagging loss requires the cutout (no cutout set to tag)");
    check(!(bce && !cutout), "bce loss requires the cutout");
    check(!(bce && tagging), "bce replaces the tagging loss; enable only one");
    check(model == "desk" || model == "tiny", "model must be 'desk' or 'tiny', got '", model, "'");
    cutout_shape_from_name(cutout_shape);
}

ModelDims TrainConfig::model_dims() const {
    return model == "tiny" ? ModelDims::tiny() : ModelDims::desk();
}

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw UsageError(cat("config key '", key, "' expects true/false, got '", value, "'"));
}

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T out;
    is >> out;
    if (is.fail() || !is.eof())
        throw UsageError(cat("config key '", key, "' expects a number, got '", value, "'"));
    return out;
}

}  // namespace

void set_config_key(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "clip_len") c.clip_len = parse_num<int>(key, value);
    else if (key == "zoom") c.zoom = parse_bool(key, value);
    else if (key == "zoom_levels") c.zoom_levels = parse_num<int>(key, value);
    else if (key == "zoom_frames") c.zoom_frames = parse_num<int>(key, value);
    else if (key == "zoom_random_window") c.zoom_random_window = parse_bool(key, value);
    else if (key == "cutout") c.cutout = parse_bool(key, value);
    else if (key == "cutout_shape") c.cutout_shape = value;
    else if (key == "tagging") c.tagging = parse_bool(key, value);
    else if (key == "bce") c.bce = parse_bool(key, value);
    else if (key == "lambda") c.lambda = parse_num<double>(key, value);
    else if (key == "margin") c.margin = parse_num<double>(key, value);
    else if (key == "sample_m") c.sample_m = parse_num<int>(key, value);
    else if (key == "lr") c.lr = parse_num<double>(key, value);
    else if (key == "beta1") c.beta1 = parse_num<double>(key, value);
    else if (key == "beta2") c.beta2 = parse_num<double>(key, value);
    else if (key == "eps") c.eps = parse_num<double>(key, value);
    else if (key == "epochs") c.epochs = parse_num<int>(key, value);
    else if (key == "grad_accum") c.grad_accum = parse_num<int>(key, value);
    else if (key == "hflip") c.hflip = parse_bool(key, value);
    else if (key == "treverse") c.treverse = parse_bool(key, value);
    else if (key == "rcrop") c.rcrop = parse_bool(key, value);
    else if (key == "checkpoint_every") c.checkpoint_every = parse_num<int>(key, value);
    else if (key == "seed") c.seed = parse_num<uint64_t>(key, value);
    else if (key == "model") c.model = value;
    else throw UsageError(cat("unknown config key '", key, "'"));
}

std::vector<std::string> config_keys() {
    return {"clip_len", "zoom", "zoom_levels", "zoom_frames", "zoom_random_window", "cutout",
            "cutout_shape", "tagging", "bce", "lambda", "margin", "sample_m", "lr", "beta1",
            "beta2", "eps", "epochs", "grad_accum", "hflip", "treverse", "rcrop",
            "checkpoint_every", "seed", "model"};
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "cannot open config file ", path);
    TrainConfig config;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(cat(path, ":", lineno, ": expected key=value, got '", line, "'"));
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        set_config_key(config, key, value);
    }
    return config;
}

TrainBatch build_batch(const Clip& clip, const TrainConfig& config, Rng& rng) {
    check(clip.size() >= 8, "training clip '", clip.id, "' has ", clip.size(),
          " frames, need at least 8");

    AugmentFlags flags;
    flags.hflip = config.hflip && rng.coin();
    flags.treverse = config.treverse && rng.coin();
    flags.rcrop = config.rcrop && rng.coin();
    Clip aug = augment_clip(clip, rng, flags);

    ClipSplit split = split_clip(aug);

    TrainBatch batch;
    batch.current = to_model_range(split.current);
    std::vector<Image> past_norm;
    past_norm.reserve(split.past.size());
    for (const auto& f : split.past) past_norm.push_back(to_model_range(f));

    std::vector<Image> past_values = past_norm;
    if (config.cutout) {
        int h = batch.current.h, w = batch.current.w;
        CutoutSpec spec =
            sample_cutout_spec(rng, cutout_shape_from_name(config.cutout_shape), h, w, 0.f);
        batch.cutout = rasterize_cutout(spec, h, w);
        past_values = apply_cutout(past_norm, batch.cutout, spec.fill);
        batch.target = apply_cutout(batch.current, batch.cutout, spec.fill);
    } else {
        batch.target = batch.current;
    }

    batch.key_inputs = past_norm;
    batch.value_inputs = past_values;

    if (config.zoom && config.zoom_levels > 1) {
        int h = batch.current.h, w = batch.current.w;
        int n = std::min(config.zoom_frames, int(past_norm.size()));
        auto picks = rng.sample_indices(int(past_norm.size()), n);
        for (int r : picks) {
            auto windows = config.zoom_random_window
                               ? zoom_windows_random(h, w, config.zoom_levels, rng)
                               : zoom_windows(h, w, config.zoom_levels);
            for (size_t k = 1; k < windows.size(); ++k) {  // level 1 is the clip frame itself
                batch.key_inputs.push_back(apply_zoom(past_norm[r], windows[k]));
                batch.value_inputs.push_back(apply_zoom(past_values[r], windows[k]));
            }
        }
    }
    return batch;
}

LossReport forward_backward(const TrainBatch& batch, ModelParams<float>& params,
                            const TrainConfig& config, Rng& rng) {
    Tape<float> tape;

    std::vector<TensorPtr<float>> keys, values;
    for (const auto& f : batch.key_inputs) keys.push_back(image_to_tensor<float>(f));
    for (const auto& f : batch.value_inputs) values.push_back(image_to_tensor<float>(f));
    check(keys.size() == values.size(), "batch: ", keys.size(), " key frames vs ", values.size(),
          " value frames");

    auto q = encode_current(tape, params, image_to_tensor<float>(batch.current));
    auto k = encode_keys(tape, params, keys);
    auto v = encode_values(tape, params, values);
    auto ctx = attention_read(tape, q, k, v);
    auto out = decode(tape, params, ctx, q);

    auto target = image_to_tensor<float>(batch.target);
    auto l_recon = huber_reconstruction(tape, out.recon, target);

    LossReport report;
    report.lambda = config.lambda;
    report.reconstruction = l_recon->value[0];

    TensorPtr<float> l_extra;
    if (config.tagging) {
        auto tags = reshape(tape, out.tags, {batch.current.h, batch.current.w});
        auto tl = tagging_loss(tape, tags, batch.cutout, config.sample_m, float(config.margin),
                               rng);
        report.pull = tl.pull->value[0];
        report.push = tl.push->value[0];
        report.tagging = tl.total->value[0];
        l_extra = tl.total;
    } else if (config.bce) {
        auto tags = reshape(tape, out.tags, {batch.current.h, batch.current.w});
        auto bce = bce_alternative(tape, tags, batch.cutout);
        report.tagging = bce->value[0];
        l_extra = bce;
    }

    auto l_overall = overall_loss(tape, l_recon, l_extra, float(config.lambda));
    report.overall = l_overall->value[0];

    auto bad = [](double v) { return !std::isfinite(v); };
    if (bad(report.reconstruction)) fail("non-finite reconstruction loss");
    if (bad(report.pull)) fail("non-finite pull loss");
    if (bad(report.push)) fail("non-finite push loss");
    if (bad(report.tagging)) fail("non-finite tagging loss");
    if (bad(report.overall)) fail("non-finite overall loss");

    tape.backward(l_overall);
    return report;
}

LossReport train_step(const TrainBatch& batch, ModelParams<float>& params, AdamState<float>& opt,
                      const TrainConfig& config, Rng& rng) {
    params.zero_grad();
    LossReport report = forward_backward(batch, params, config, rng);
    adam_step(params.param_list(), opt, float(config.lr), float(config.beta1),
              float(config.beta2), float(config.eps));
    return report;
}

TrainResult run_training(const std::vector<Clip>& dataset, const TrainConfig& config,
                         const std::string& out_dir,
                         const std::optional<std::string>& resume_from, std::ostream* diag) {
    config.validate();
    check(!dataset.empty(), "training dataset is empty");
    for (const auto& clip : dataset)
        check(clip.size() >= 8, "sequence '", clip.id, "' has ", clip.size(),
              " frames, need at least 8");

    fs::create_directories(out_dir);
    ModelParams<float> params = ModelParams<float>::init(config.model_dims(), config.seed);
    AdamState<float> opt;
    opt.init(params.param_list());
    if (resume_from) {
        LoadedCheckpoint loaded = load_checkpoint(*resume_from);
        check(loaded.opt.has_value(), *resume_from, " has no optimizer state; cannot resume");
        params = std::move(loaded.params);
        params.set_requires_grad(true);
        opt = std::move(*loaded.opt);
        check(opt.matches(params.param_list()), "resumed optimizer state does not match model");
    }

    TrainResult result;
    result.checkpoint_path = out_dir + "/model.ctvs";
    result.log_path = out_dir + "/loss_log.tsv";

    std::ofstream log(result.log_path);
    check(log.good(), "cannot write ", result.log_path);
    log << "step\treconstruction\tpull\tpush\ttagging\toverall\n";
    log.precision(9);

    Rng rng(config.seed);
    std::vector<int> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);

    auto t0 = std::chrono::steady_clock::now();
    int64_t step = opt.step;
    bool first_recorded = false;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t b = 0; b < order.size(); b += size_t(config.grad_accum)) {
            params.zero_grad();
            LossReport report;
            int group = std::min<int>(config.grad_accum, int(order.size() - b));
            for (int g = 0; g < group; ++g) {
                TrainBatch batch = build_batch(dataset[order[b + g]], config, rng);
                LossReport r = forward_backward(batch, params, config, rng);
                report.reconstruction += r.reconstruction / group;
                report.pull += r.pull / group;
                report.push += r.push / group;
                report.tagging += r.tagging / group;
                report.overall += r.overall / group;
                report.lambda = r.lambda;
            }
            if (config.grad_accum > 1) {
                for (auto& p : params.param_list())
                    for (auto& gv : p->grad) gv /= float(group);
            }
            adam_step(params.param_list(), opt, float(config.lr), float(config.beta1),
                      float(config.beta2), float(config.eps));
            ++step;

            log << step << '\t' << report.reconstruction << '\t' << report.pull << '\t'
                << report.push << '\t' << report.tagging << '\t' << report.overall << '\n';
            if (!first_recorded) {
                result.first_reconstruction = report.reconstruction;
                first_recorded = true;
            }
            result.last_reconstruction = report.reconstruction;
            ++result.steps;

            if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0)
                save_checkpoint(result.checkpoint_path, params, &opt);
            if (diag && (step % 25 == 0 || result.steps == 1)) {
                auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
                *diag << "epoch " << epoch << " step " << step << " recon "
                      << report.reconstruction << " overall " << report.overall << " ("
                      << dt.count() << "s)\n";
            }
        }
    }
    log.flush();
    check(log.good(), "failed writing ", result.log_path);
    save_checkpoint(result.checkpoint_path, params, &opt);
    return result;
}

}  // namespace ctvos
