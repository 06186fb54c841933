// Central finite-difference verification of reverse-mode gradients.
// Run with T = double; float rounding swamps the h^2 truncation term.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctvos/tensor.hpp"

namespace ctvos {

template <typename T>
struct GradCheckReport {
    bool pass = true;
    // Worst |analytic - numeric| / (floor + tol * max(|analytic|, |numeric|));
    // <= 1 everywhere means pass.
    T max_err_ratio = T(0);
    T max_rel_err = T(0);  // plain relative error of the worst component
    int64_t checked = 0;
    int64_t skipped = 0;  // components below the magnitude floor
    std::string worst;
};

// `forward` must rebuild the graph from the leaves' current values and return
// a scalar loss. Analytic gradients come from one taped backward; each leaf
// component is then nudged +/-step for the central difference.
//
// Acceptance rule is the usual mixed bound |a - n| <= floor + tol * scale:
// central differences at step h carry h^2/6 * f''' truncation noise (~1e-10
// absolute here), so a pure relative bound is unattainable for components
// sitting just above the floor even when the analytic gradient is exact.
template <typename T>
GradCheckReport<T> gradient_check(const std::vector<std::pair<std::string, TensorPtr<T>>>& leaves,
                                  const std::function<TensorPtr<T>(Tape<T>&)>& forward,
                                  T step = T(1e-5), T tol = T(1e-4), T floor = T(1e-8)) {
    for (auto& [name, leaf] : leaves) {
        check(leaf->requires_grad, "gradient_check: leaf ", name, " must require gradients");
        leaf->zero_grad();
    }
    std::vector<std::vector<T>> analytic;
    {
        Tape<T> tape;
        auto loss = forward(tape);
        tape.backward(loss);
    }
    for (auto& [name, leaf] : leaves) analytic.push_back(leaf->grad);

    auto eval = [&]() -> T {
        Tape<T> tape(false);
        return forward(tape)->value[0];
    };

    GradCheckReport<T> report;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li].second;
        for (size_t j = 0; j < leaf->value.size(); ++j) {
            T saved = leaf->value[j];
            leaf->value[j] = saved + step;
            T fp = eval();
            leaf->value[j] = saved - step;
            T fm = eval();
            leaf->value[j] = saved;
            T numeric = (fp - fm) / (T(2) * step);
            T a = analytic[li][j];
            T scale = std::max(std::abs(a), std::abs(numeric));
            if (scale <= floor) {
                ++report.skipped;
                continue;
            }
            T ratio = std::abs(a - numeric) / (floor + tol * scale);
            ++report.checked;
            if (ratio > report.max_err_ratio) {
                report.max_err_ratio = ratio;
                report.max_rel_err = std::abs(a - numeric) / scale;
                report.worst = cat(leaves[li].first, "[", j, "]: analytic=", a,
                                   " numeric=", numeric);
            }
            if (ratio > T(1)) report.pass = false;
        }
    }
    return report;
}

}  // namespace ctvos
