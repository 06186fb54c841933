// Dense row-major tensors plus a single-use reverse-mode tape.
//
// Ops (ops.hpp) execute eagerly and, when the tape is recording and an input
// requires gradients, push a backward closure. backward() replays the
// closures in reverse recording order, which is a valid topological order of
// the forward graph. Templated on the element type: float for training,
// double for finite-difference verification.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include "ctvos/common.hpp"

namespace ctvos {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

template <typename T>
struct TensorNode {
    static_assert(std::is_floating_point_v<T>);

    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated only on the requires_grad path
    bool requires_grad = false;

    int64_t numel() const { return int64_t(value.size()); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
    void zero_grad() { grad.assign(grad.size(), T(0)); }
};

template <typename T>
using TensorPtr = std::shared_ptr<TensorNode<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> data, bool requires_grad = false) {
    check(shape_numel(shape) == int64_t(data.size()), "tensor: shape ", shape_str(shape),
          " does not match data length ", data.size());
    for (int d : shape) check(d > 0, "tensor: non-positive extent in ", shape_str(shape));
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    if (requires_grad) node->ensure_grad();
    return node;
}

template <typename T>
TensorPtr<T> make_zeros(Shape shape, bool requires_grad = false) {
    size_t n = size_t(shape_numel(shape));
    return make_tensor<T>(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
TensorPtr<T> make_full(Shape shape, T v) {
    size_t n = size_t(shape_numel(shape));
    return make_tensor<T>(std::move(shape), std::vector<T>(n, v));
}

template <typename T>
TensorPtr<T> make_scalar(T v) {
    return make_tensor<T>({1}, {v});
}

// Global toggle for post-op NaN/Inf scans. On by default; forward values are
// required to stay finite and the op name in the error is the diagnostic.
inline bool& finite_checks() {
    static bool on = true;
    return on;
}

template <typename T>
void check_finite(const TensorNode<T>& t, const char* op) {
    if (!finite_checks()) return;
    for (T v : t.value)
        if (!std::isfinite(v)) fail("non-finite value produced by ", op);
}

template <typename T>
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    size_t size() const { return steps_.size(); }
    bool consumed() const { return consumed_; }

    void record(std::function<void()> step) {
        if (recording_) steps_.push_back(std::move(step));
    }

    // Seeds d(loss)/d(loss) = 1 and replays the recorded closures backward.
    // Gradients accumulate into each requires_grad node's grad buffer.
    void backward(const TensorPtr<T>& loss) {
        check(!consumed_, "tape already consumed; one backward per forward pass");
        check(recording_, "backward on a non-recording tape");
        check(loss && loss->numel() == 1, "backward requires a scalar loss, got ",
              loss ? shape_str(loss->shape) : "null");
        check(loss->requires_grad, "loss does not depend on any requires_grad tensor");
        consumed_ = true;
        loss->ensure_grad();
        loss->grad[0] += T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> steps_;
    bool recording_;
    bool consumed_ = false;
};

// Output-node helper shared by the ops: gradients are tracked iff the tape is
// recording and at least one input tracks them.
template <typename T>
TensorPtr<T> make_op_output(Tape<T>& tape, Shape shape, bool any_input_grad) {
    auto out = make_zeros<T>(std::move(shape));
    out->requires_grad = tape.recording() && any_input_grad;
    if (out->requires_grad) out->ensure_grad();
    return out;
}

}  // namespace ctvos
