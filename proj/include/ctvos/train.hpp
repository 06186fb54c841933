// Training orchestration: per-clip batch assembly (7 past + 1 current +
// zoom-in views), the optimization step, checkpointing, and the loss log.
#pragma once

#include <iosfwd>
#include <optional>

#include "ctvos/adam.hpp"
#include "ctvos/augment.hpp"
#include "ctvos/checkpoint.hpp"
#include "ctvos/losses.hpp"

namespace ctvos {

struct TrainConfig {
    int clip_len = 8;
    bool zoom = true;
    int zoom_levels = 3;   // includes the identity view; 3 -> 2 extra frames
    int zoom_frames = 1;   // how many past frames receive zoom views (1|3|5)
    bool zoom_random_window = false;
    bool cutout = true;
    std::string cutout_shape = "square";
    bool tagging = true;
    bool bce = false;      // replace the tagging term with binary cross-entropy
    double lambda = 1.0;
    double margin = 0.5;
    int sample_m = 128;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int epochs = 40;
    int grad_accum = 1;
    bool hflip = true;
    bool treverse = true;
    bool rcrop = true;
    int checkpoint_every = 0;  // steps; 0 = final checkpoint only
    uint64_t seed = 1;
    std::string model = "desk";  // desk | tiny

    void validate() const;
    ModelDims model_dims() const;
};

// Flat key=value config file; unknown keys are errors. set_config_key is the
// single override point shared by the file parser and CLI flags.
TrainConfig parse_config_file(const std::string& path);
void set_config_key(TrainConfig& config, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

struct TrainBatch {
    Image current;                  // normalized, no cutout
    Image target;                   // normalized current, cutout applied when enabled
    std::vector<Image> key_inputs;  // normalized past frames (+ zoom views)
    std::vector<Image> value_inputs;  // cutout versions of key_inputs (or clean w/o cutout)
    CutoutMask cutout;              // empty when cutout is disabled
};

TrainBatch build_batch(const Clip& clip, const TrainConfig& config, Rng& rng);

struct LossReport {
    double reconstruction = 0;
    double pull = 0;      // L_cp
    double push = 0;      // L_rp
    double tagging = 0;   // L_cp + L_rp (or the BCE substitute)
    double overall = 0;
    double lambda = 0;
};

// Forward + backward on one batch; gradients accumulate into the params.
LossReport forward_backward(const TrainBatch& batch, ModelParams<float>& params,
                            const TrainConfig& config, Rng& rng);

// One full optimization step (forward, backward, Adam update).
LossReport train_step(const TrainBatch& batch, ModelParams<float>& params,
                      AdamState<float>& opt, const TrainConfig& config, Rng& rng);

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    int steps = 0;
    double first_reconstruction = 0;
    double last_reconstruction = 0;
};

// Epochs over shuffled clips, one optimization step per clip (times
// grad_accum). Writes <out_dir>/model.ctvs and <out_dir>/loss_log.tsv.
// Progress and timing go to the diagnostic stream, never into data files.
TrainResult run_training(const std::vector<Clip>& dataset, const TrainConfig& config,
                         const std::string& out_dir,
                         const std::optional<std::string>& resume_from = std::nullopt,
                         std::ostream* diag = nullptr);

}  // namespace ctvos
