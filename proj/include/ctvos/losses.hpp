// Training objective: Huber reconstruction over the cutout frame, a pull
// term drawing sampled cutout-pixel tags toward their mean, a margin push
// term separating cutout-pixel tags from the rest, and a binary
// cross-entropy alternative used by the ablation switch.
#pragma once

#include "ctvos/augment.hpp"
#include "ctvos/ops.hpp"

namespace ctvos {

// Mean over all elements of z(d), d = pred - target:
//   z = 0.5 d^2      for |d| < 1
//   z = |d| - 0.5    otherwise
template <typename T>
TensorPtr<T> huber_reconstruction(Tape<T>& tape, const TensorPtr<T>& pred,
                                  const TensorPtr<T>& target) {
    check_same_shape(pred, target, "huber");
    bool any_grad = pred->requires_grad || target->requires_grad;
    auto out = make_op_output(tape, Shape{1}, any_grad);
    const int64_t n = pred->numel();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
        T d = pred->value[i] - target->value[i];
        T ad = std::abs(d);
        acc += ad < T(1) ? T(0.5) * d * d : ad - T(0.5);
    }
    out->value[0] = acc / T(n);
    check_finite(*out, "huber");
    if (out->requires_grad)
        tape.record([pred, target, out, n] {
            T g = out->grad[0] / T(n);
            for (int64_t i = 0; i < n; ++i) {
                T d = pred->value[i] - target->value[i];
                T dz = std::abs(d) < T(1) ? d : (d > T(0) ? T(1) : T(-1));
                if (pred->requires_grad) pred->grad[i] += g * dz;
                if (target->requires_grad) target->grad[i] -= g * dz;
            }
        });
    return out;
}

// Biased variance of the sampled tags: (1/M) sum (h_m - mean)^2.
template <typename T>
TensorPtr<T> pull_loss(Tape<T>& tape, const TensorPtr<T>& tags) {
    check(tags->numel() >= 2, "pull loss needs at least 2 sampled tags, got ", tags->numel());
    auto mean = mean_all(tape, tags);
    auto centered = sub_scalar(tape, tags, mean);
    return mean_all(tape, mul(tape, centered, centered));
}

// max(0, G - |mean_b - mean_c|)
template <typename T>
TensorPtr<T> push_loss(Tape<T>& tape, const TensorPtr<T>& mean_b, const TensorPtr<T>& mean_c,
                       T margin) {
    check(margin > T(0), "push loss margin must be positive, got ", margin);
    check(mean_b->numel() == 1 && mean_c->numel() == 1, "push loss expects scalar means");
    auto gap = abs_op(tape, sub(tape, mean_b, mean_c));
    return relu(tape, affine(tape, gap, T(-1), margin));
}

template <typename T>
struct TaggingLossOut {
    TensorPtr<T> pull;     // L_cp
    TensorPtr<T> push;     // L_rp
    TensorPtr<T> total;    // L_cp + L_rp
};

// Samples (without replacement) sample_m pixels from the cutout set and from
// its complement, applies the pull term to the cutout sample and the push
// term to the two sample means. full_population uses every pixel of both
// sets, which is what the exhaustive oracle computes.
template <typename T>
TaggingLossOut<T> tagging_loss(Tape<T>& tape, const TensorPtr<T>& tag_map,
                               const CutoutMask& cutout, int sample_m, T margin, Rng& rng,
                               bool full_population = false) {
    check(tag_map->numel() == int64_t(cutout.h) * cutout.w, "tag map ", shape_str(tag_map->shape),
          " does not cover a ", cutout.w, "x", cutout.h, " cutout mask");
    std::vector<int> cut_idx, rest_idx;
    for (size_t i = 0; i < cutout.m.size(); ++i)
        (cutout.m[i] ? cut_idx : rest_idx).push_back(int(i));

    auto pick = [&](std::vector<int>& pool) {
        if (full_population || int(pool.size()) <= sample_m) return pool;
        auto chosen = rng.sample_indices(int(pool.size()), sample_m);
        std::vector<int> out;
        out.reserve(chosen.size());
        for (int c : chosen) out.push_back(pool[c]);
        return out;
    };
    check(int(cut_idx.size()) >= 2, "tagging loss: cutout set has ", cut_idx.size(),
          " pixels, need at least 2");
    check(int(rest_idx.size()) >= 2, "tagging loss: reconstructed set has ", rest_idx.size(),
          " pixels, need at least 2");

    auto cut_tags = gather_flat(tape, tag_map, pick(cut_idx));
    auto rest_tags = gather_flat(tape, tag_map, pick(rest_idx));

    TaggingLossOut<T> out;
    out.pull = pull_loss(tape, cut_tags);
    out.push = push_loss(tape, mean_all(tape, rest_tags), mean_all(tape, cut_tags), margin);
    out.total = add(tape, out.pull, out.push);
    return out;
}

// L_overall = L_reconstruction + lambda * L_tagging
template <typename T>
TensorPtr<T> overall_loss(Tape<T>& tape, const TensorPtr<T>& reconstruction,
                          const TensorPtr<T>& tagging, T lambda) {
    check(lambda >= T(0), "loss weight must be non-negative, got ", lambda);
    if (!tagging || lambda == T(0)) return reconstruction;
    return add(tape, reconstruction, affine(tape, tagging, lambda, T(0)));
}

// Ablation alternative: mean BCE with target 0 on cutout pixels, 1 elsewhere.
// Tags are clamped to [1e-7, 1 - 1e-7] before the logs.
template <typename T>
TensorPtr<T> bce_alternative(Tape<T>& tape, const TensorPtr<T>& tag_map,
                             const CutoutMask& cutout) {
    check(tag_map->numel() == int64_t(cutout.h) * cutout.w, "tag map ", shape_str(tag_map->shape),
          " does not cover a ", cutout.w, "x", cutout.h, " cutout mask");
    const T eps = T(1e-7);
    auto flat = reshape(tape, tag_map, {int(tag_map->numel())});
    auto p = clamp_op(tape, flat, eps, T(1) - eps);
    std::vector<T> keep(size_t(tag_map->numel()));  // 1 where the target label is 1
    for (size_t i = 0; i < cutout.m.size(); ++i) keep[i] = cutout.m[i] ? T(0) : T(1);
    auto target = make_tensor<T>({int(tag_map->numel())}, std::move(keep));
    auto inv_target = affine(tape, target, T(-1), T(1));
    auto log_p = log_op(tape, p);
    auto log_q = log_op(tape, affine(tape, p, T(-1), T(1)));
    auto ll = add(tape, mul(tape, target, log_p), mul(tape, inv_target, log_q));
    return affine(tape, mean_all(tape, ll), T(-1), T(0));
}

}  // namespace ctvos
