// Adam with bias correction. Moment buffers run parallel to the parameter
// list handed to init(); the pairing is positional, so callers keep a fixed
// parameter order (checkpointing relies on that too).
#pragma once

#include <vector>

#include "ctvos/tensor.hpp"

namespace ctvos {

template <typename T>
struct AdamState {
    int64_t step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    void init(const std::vector<TensorPtr<T>>& params) {
        step = 0;
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p->value.size(), T(0));
            v.emplace_back(p->value.size(), T(0));
        }
    }

    bool matches(const std::vector<TensorPtr<T>>& params) const {
        if (m.size() != params.size() || v.size() != params.size()) return false;
        for (size_t i = 0; i < params.size(); ++i)
            if (m[i].size() != params[i]->value.size() || v[i].size() != params[i]->value.size())
                return false;
        return true;
    }
};

// One update from the gradients currently held in each param's grad buffer.
template <typename T>
void adam_step(const std::vector<TensorPtr<T>>& params, AdamState<T>& state, T lr, T beta1,
               T beta2, T eps) {
    check(lr >= T(0), "adam: learning rate must be non-negative");
    check(state.matches(params), "adam: state does not match parameter shapes");
    state.step += 1;
    const T bc1 = T(1) - std::pow(beta1, T(state.step));
    const T bc2 = T(1) - std::pow(beta2, T(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        check(p.grad.size() == p.value.size(), "adam: parameter ", i, " has no gradient buffer");
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.value.size(); ++j) {
            T g = p.grad[j];
            m[j] = beta1 * m[j] + (T(1) - beta1) * g;
            v[j] = beta2 * v[j] + (T(1) - beta2) * g * g;
            T mhat = m[j] / bc1;
            T vhat = v[j] / bc2;
            p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace ctvos
