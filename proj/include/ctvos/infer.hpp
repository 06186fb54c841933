// Mask propagation: values are built by stacking each previous object mask
// across 3 channels (mapped to [-1, 1]); the decoder's 3-channel output is
// averaged, clamped to [-1, 1], and thresholded at 0 (strictly positive =
// foreground). A rolling window of at most 7 past (frame, mask) pairs feeds
// each step; the ground-truth first frame can be pinned against drift.
#pragma once

#include <deque>

#include "ctvos/model.hpp"
#include "ctvos/videogen.hpp"

namespace ctvos {

// Binary mask -> 3-channel value input: 0 -> -1, 1 -> +1 on every channel.
Image masks_to_values(const BinMask& mask);

struct PropagationState {
    struct Entry {
        Image frame;  // normalized to [-1, 1]
        BinMask mask;
    };

    explicit PropagationState(int capacity = 7, bool anchor_first = true)
        : capacity_(capacity), anchor_first_(anchor_first) {}

    void push(Image frame, BinMask mask);
    const std::deque<Entry>& window() const { return window_; }
    int size() const { return int(window_.size()); }
    bool empty() const { return window_.empty(); }

private:
    std::deque<Entry> window_;
    int capacity_;
    bool anchor_first_;
};

struct StepResult {
    BinMask mask;
    std::vector<float> score;  // channel average in [-1, 1] per pixel
};

// One propagation step for a single object. `current` must be normalized.
StepResult propagate_step(const PropagationState& state, const Image& current,
                          const PipelineFns<float>& fns);

struct PropagateOptions {
    int window = 7;
    bool anchor_first = true;
};

// Full sequence: per-object propagation with the shared frame window, then a
// per-pixel argmax over strictly positive scores (ties and non-positive
// scores go to background). Output index 0 echoes the given first-frame mask.
std::vector<IndexMask> propagate_sequence(const Clip& clip, const IndexMask& first_masks,
                                          const PipelineFns<float>& fns,
                                          const PropagateOptions& options = {});

}  // namespace ctvos
