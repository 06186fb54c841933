#include "ctvos/verify.hpp"

#include <ostream>

#include "ctvos/losses.hpp"
#include "ctvos/model.hpp"
#include "ctvos/train.hpp"

namespace ctvos {

namespace {

TensorPtr<double> rand_leaf(Rng& rng, Shape shape, double lo, double hi) {
    std::vector<double> data(size_t(shape_numel(shape)));
    for (auto& v : data) v = rng.uniform(lo, hi);
    return make_tensor<double>(std::move(shape), std::move(data), true);
}

using Leaves = std::vector<std::pair<std::string, TensorPtr<double>>>;

template <typename Fn>
SuiteCheck weighted_check(const std::string& name, Rng& rng, Leaves leaves, Fn&& op) {
    TensorPtr<double> probe;
    {
        Tape<double> warmup(false);
        probe = op(warmup);
    }
    auto weights = make_zeros<double>(probe->shape);
    for (auto& v : weights->value) v = rng.uniform(-1.0, 1.0);
    auto forward = [&op, weights](Tape<double>& tape) {
        return sum_all(tape, mul(tape, op(tape), weights));
    };
    return {name, gradient_check<double>(leaves, forward)};
}

Image random_image(Rng& rng, int h, int w) {
    Image img(h, w, 3);
    for (auto& v : img.data) v = float(rng.uniform(0.05, 0.95));
    return img;
}

}  // namespace

SuiteCheck check_full_objective_gradients() {
    // 8x8 frames, two-frame clip (one past + the current frame), tiny model,
    // full-population tag sampling so the objective is deterministic.
    Rng rng(20240 + 5);
    ModelDims dims = ModelDims::tiny();
    auto params = ModelParams<double>::init(dims, 11);

    Image past = random_image(rng, 8, 8);
    Image current = random_image(rng, 8, 8);

    CutoutSpec spec;
    spec.shape = CutoutShape::square;
    spec.x = 2;
    spec.y = 3;
    spec.w = 3;
    spec.h = 3;
    CutoutMask cmask = rasterize_cutout(spec, 8, 8);

    Image past_norm = to_model_range(past);
    Image current_norm = to_model_range(current);
    Image past_cut = apply_cutout(past_norm, cmask, 0.f);
    Image target = apply_cutout(current_norm, cmask, 0.f);

    auto in_current = image_to_tensor<double>(current_norm);
    in_current->requires_grad = true;
    in_current->ensure_grad();
    auto in_past = image_to_tensor<double>(past_norm);
    auto in_value = image_to_tensor<double>(past_cut);
    auto in_target = image_to_tensor<double>(target);

    Leaves leaves = params.named_params();
    leaves.emplace_back("input.current", in_current);

    auto forward = [&](Tape<double>& tape) {
        auto q = encode_current(tape, params, in_current);
        auto k = encode_keys(tape, params, {in_past});
        auto v = encode_values(tape, params, {in_value});
        auto ctx = attention_read(tape, q, k, v);
        auto out = decode(tape, params, ctx, q);
        auto l_recon = huber_reconstruction(tape, out.recon, in_target);
        auto tags = reshape(tape, out.tags, {8, 8});
        Rng unused(0);
        auto tl = tagging_loss<double>(tape, tags, cmask, 4, 0.5, unused,
                                       /*full_population=*/true);
        return overall_loss<double>(tape, l_recon, tl.total, 1.0);
    };
    return {"full training objective (2-frame 8x8 clip)",
            gradient_check<double>(leaves, forward)};
}

std::vector<SuiteCheck> run_gradient_suite() {
    std::vector<SuiteCheck> checks;
    Rng rng(7117);

    {
        auto a = rand_leaf(rng, {3, 4}, -1, 1);
        auto b = rand_leaf(rng, {3, 4}, -1, 1);
        auto s = rand_leaf(rng, {1}, -1, 1);
        checks.push_back(weighted_check(
            "elementwise add/sub/mul/affine/sub_scalar", rng, {{"a", a}, {"b", b}, {"s", s}},
            [&](Tape<double>& t) {
                auto u = add(t, mul(t, a, b), sub(t, a, b));
                return sub_scalar(t, affine(t, u, 1.3, 0.2), s);
            }));
    }
    {
        auto x = rand_leaf(rng, {4, 4}, 0.15, 0.85);
        checks.push_back(weighted_check("sigmoid/tanh/log/abs/clamp", rng, {{"x", x}},
                                        [&](Tape<double>& t) {
                                            auto u = add(t, sigmoid(t, x), tanh_op(t, x));
                                            auto z = abs_op(t, affine(t, x, 1.0, -0.5));
                                            auto c = clamp_op(t, z, 0.02, 0.32);
                                            return add(t, add(t, u, log_op(t, x)), c);
                                        }));
    }
    {
        std::vector<double> vals;
        for (int i = 0; i < 20; ++i) vals.push_back((i % 2 ? 1 : -1) * (0.1 + 0.05 * i));
        auto x = make_tensor<double>({20}, vals, true);
        checks.push_back(weighted_check("relu", rng, {{"x", x}},
                                        [&](Tape<double>& t) { return relu(t, x); }));
    }
    {
        auto a = rand_leaf(rng, {3, 5}, -1, 1);
        auto b = rand_leaf(rng, {5, 4}, -1, 1);
        checks.push_back(weighted_check("matmul/transpose", rng, {{"a", a}, {"b", b}},
                                        [&](Tape<double>& t) {
                                            return matmul(t, a, transpose2d(t, transpose2d(t, b)));
                                        }));
    }
    {
        auto x = rand_leaf(rng, {2, 6}, -4, 4);
        checks.push_back(weighted_check("softmax", rng, {{"x", x}},
                                        [&](Tape<double>& t) { return softmax(t, x, 1); }));
    }
    {
        auto x = rand_leaf(rng, {2, 3, 6, 6}, -1, 1);
        auto w = rand_leaf(rng, {4, 3, 3, 3}, -0.5, 0.5);
        auto b = rand_leaf(rng, {4}, -0.2, 0.2);
        checks.push_back(weighted_check("conv2d stride 2 pad 1 with bias", rng,
                                        {{"x", x}, {"w", w}, {"b", b}}, [&](Tape<double>& t) {
                                            return conv2d(t, x, w, b, 2, 1);
                                        }));
    }
    {
        auto x = rand_leaf(rng, {1, 2, 3, 3}, -1, 1);
        checks.push_back(weighted_check("nearest upsample", rng, {{"x", x}},
                                        [&](Tape<double>& t) {
                                            return upsample_nearest(t, x, 2);
                                        }));
    }
    {
        auto x = rand_leaf(rng, {1, 2, 5, 4}, -1, 1);
        checks.push_back(weighted_check("bilinear resize", rng, {{"x", x}},
                                        [&](Tape<double>& t) {
                                            return resize_bilinear(t, x, 7, 6);
                                        }));
    }
    {
        auto a = rand_leaf(rng, {2, 3}, -1, 1);
        auto b = rand_leaf(rng, {2, 3}, -1, 1);
        checks.push_back(weighted_check("concat/narrow/reshape/gather/reductions", rng,
                                        {{"a", a}, {"b", b}}, [&](Tape<double>& t) {
                                            auto c = concat(t, {a, b}, 1);
                                            auto n = narrow(t, c, 1, 1, 4);
                                            auto r = reshape(t, n, {8});
                                            auto g = gather_flat(t, r, {1, 4, 6, 6});
                                            return add(t, mean_all(t, g), sum_all(t, r));
                                        }));
    }
    {
        auto p = rand_leaf(rng, {3, 3}, -0.9, 0.9);
        auto q = rand_leaf(rng, {3, 3}, -0.9, 0.9);
        checks.push_back(weighted_check("huber mean", rng, {{"p", p}, {"q", q}},
                                        [&](Tape<double>& t) {
                                            return huber_reconstruction(t, p, q);
                                        }));
    }
    {
        auto tags = rand_leaf(rng, {4, 4}, 0.1, 0.9);
        CutoutSpec spec;
        spec.shape = CutoutShape::square;
        spec.x = 0;
        spec.y = 0;
        spec.w = 2;
        spec.h = 2;
        CutoutMask cm = rasterize_cutout(spec, 4, 4);
        checks.push_back(weighted_check("pull/push tagging losses", rng, {{"tags", tags}},
                                        [&, cm](Tape<double>& t) {
                                            Rng unused(0);
                                            auto tl = tagging_loss<double>(t, tags, cm, 4, 0.5,
                                                                           unused, true);
                                            return tl.total;
                                        }));
    }
    {
        auto tags = rand_leaf(rng, {4, 4}, 0.1, 0.9);
        CutoutSpec spec;
        spec.shape = CutoutShape::square;
        spec.x = 1;
        spec.y = 1;
        spec.w = 2;
        spec.h = 2;
        CutoutMask cm = rasterize_cutout(spec, 4, 4);
        checks.push_back(weighted_check("binary cross-entropy alternative", rng, {{"tags", tags}},
                                        [&, cm](Tape<double>& t) {
                                            return bce_alternative<double>(t, tags, cm);
                                        }));
    }

    checks.push_back(check_full_objective_gradients());
    return checks;
}

bool print_gradient_suite(std::ostream& os) {
    bool all = true;
    for (const auto& c : run_gradient_suite()) {
        bool ok = c.report.pass && c.report.checked > 0;
        all = all && ok;
        os << (ok ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.report.checked
           << " components, worst error " << c.report.max_err_ratio
           << "x the 1e-8 + 1e-4*|g| bound";
        if (!ok && !c.report.worst.empty()) os << " (worst: " << c.report.worst << ")";
        os << "\n";
    }
    return all;
}

}  // namespace ctvos
