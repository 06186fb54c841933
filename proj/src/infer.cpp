#include "ctvos/infer.hpp"

#include "ctvos/augment.hpp"

namespace ctvos {

Image masks_to_values(const BinMask& mask) {
    Image out(mask.h, mask.w, 3);
    for (size_t p = 0; p < mask.v.size(); ++p) {
        check(mask.v[p] == 0 || mask.v[p] == 1, "masks_to_values: non-binary value ",
              int(mask.v[p]));
        float v = mask.v[p] ? 1.f : -1.f;
        out.data[p] = v;
        out.data[mask.v.size() + p] = v;
        out.data[2 * mask.v.size() + p] = v;
    }
    return out;
}

void PropagationState::push(Image frame, BinMask mask) {
    check(frame.h == mask.h && frame.w == mask.w, "propagation: frame ", frame.h, "x", frame.w,
          " vs mask ", mask.h, "x", mask.w);
    if (!window_.empty())
        check(frame.same_dims(window_.front().frame), "propagation: frame size changed mid-window");
    window_.push_back({std::move(frame), std::move(mask)});
    if (int(window_.size()) > capacity_) {
        // Oldest-first eviction; optionally keep the ground-truth seed pinned
        // by evicting the second-oldest instead.
        window_.erase(window_.begin() + (anchor_first_ ? 1 : 0));
    }
}

StepResult propagate_step(const PropagationState& state, const Image& current,
                          const PipelineFns<float>& fns) {
    check(!state.empty(), "propagate_step: empty window");
    check(current.same_dims(state.window().front().frame), "propagate_step: current frame ",
          current.h, "x", current.w, " differs from window frames ",
          state.window().front().frame.h, "x", state.window().front().frame.w);

    Tape<float> tape(false);
    std::vector<TensorPtr<float>> frames, values;
    for (const auto& e : state.window()) {
        frames.push_back(image_to_tensor<float>(e.frame));
        values.push_back(image_to_tensor<float>(masks_to_values(e.mask)));
    }
    auto q = fns.encode_query(tape, image_to_tensor<float>(current));
    auto k = fns.encode_keys(tape, frames);
    auto v = fns.encode_values(tape, values);
    auto ctx = attention_read(tape, q, k, v);
    auto out = fns.decode(tape, ctx, q);

    const auto& recon = *out.recon;  // [1,3,H,W]
    check(recon.shape == Shape({1, 3, current.h, current.w}),
          "decoder output shape ", shape_str(recon.shape), " does not match the frame");
    size_t plane = size_t(current.h) * current.w;

    StepResult result;
    result.score.resize(plane);
    result.mask = BinMask(current.h, current.w);
    for (size_t p = 0; p < plane; ++p) {
        float avg = (recon.value[p] + recon.value[plane + p] + recon.value[2 * plane + p]) / 3.f;
        avg = std::min(1.f, std::max(-1.f, avg));
        result.score[p] = avg;
        result.mask.v[p] = avg > 0.f ? 1 : 0;
    }
    return result;
}

std::vector<IndexMask> propagate_sequence(const Clip& clip, const IndexMask& first_masks,
                                          const PipelineFns<float>& fns,
                                          const PropagateOptions& options) {
    check(clip.size() >= 2, "propagate_sequence: need at least 2 frames, got ", clip.size());
    check(first_masks.h == clip.frames[0].h && first_masks.w == clip.frames[0].w,
          "first-frame mask ", first_masks.h, "x", first_masks.w, " does not match frames");
    int num_objects = first_masks.max_index();
    check(num_objects >= 1, "first-frame mask set is empty");

    std::vector<IndexMask> out;
    out.push_back(first_masks);

    Image first_norm = to_model_range(clip.frames[0]);
    std::vector<PropagationState> states(size_t(num_objects),
                                         PropagationState(options.window, options.anchor_first));
    for (int obj = 1; obj <= num_objects; ++obj)
        states[obj - 1].push(first_norm, object_mask(first_masks, obj));

    size_t plane = size_t(first_masks.h) * first_masks.w;
    for (int t = 1; t < clip.size(); ++t) {
        Image current = to_model_range(clip.frames[t]);

        std::vector<StepResult> steps;
        steps.reserve(size_t(num_objects));
        for (int obj = 1; obj <= num_objects; ++obj)
            steps.push_back(propagate_step(states[obj - 1], current, fns));

        IndexMask merged(first_masks.h, first_masks.w);
        for (size_t p = 0; p < plane; ++p) {
            float best = 0.f;
            int who = 0;
            for (int obj = 1; obj <= num_objects; ++obj) {
                float s = steps[obj - 1].score[p];
                if (s > 0.f && s > best) {
                    best = s;
                    who = obj;
                }
            }
            merged.idx[p] = uint8_t(who);
        }

        for (int obj = 1; obj <= num_objects; ++obj)
            states[obj - 1].push(current, object_mask(merged, obj));
        out.push_back(std::move(merged));
    }
    return out;
}

}  // namespace ctvos
