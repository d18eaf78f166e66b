#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paanet/tensor.hpp"

namespace paanet {

// Define-by-run tape. Operations append a record per call; the implicit
// append order is a topological order of the dataflow, so one reverse sweep
// propagates gradients visiting each node exactly once. The tape is cleared
// after backward.
template <typename T>
class GraphT {
 public:
  struct Node {
    const char* op;
    std::vector<std::shared_ptr<TensorDataT<T>>> inputs;
    std::shared_ptr<TensorDataT<T>> output;
    std::function<void()> backward;
  };

  static GraphT& instance() {
    thread_local GraphT g;
    return g;
  }

  bool recording = true;

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void push(Node&& n) {
    n.output->tracked = true;
    nodes_.push_back(std::move(n));
  }

  void run_backward(const TensorT<T>& loss) {
    if (loss.numel() != 1)
      throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                  detail::shape_str(loss.shape()));
    detail::ensure_grad(loss.ptr());
    loss.ptr()->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!it->output->grad.empty() && it->backward) it->backward();
    }
    nodes_.clear();
  }

 private:
  std::vector<Node> nodes_;
};

// Populates dLoss/dLeaf on every reachable tracked tensor, accumulating
// additively, then frees the tape.
template <typename T>
void backward(const TensorT<T>& loss) {
  GraphT<T>::instance().run_backward(loss);
}

template <typename T>
class NoGradGuardT {
 public:
  NoGradGuardT() : prev_(GraphT<T>::instance().recording) { GraphT<T>::instance().recording = false; }
  ~NoGradGuardT() { GraphT<T>::instance().recording = prev_; }
  NoGradGuardT(const NoGradGuardT&) = delete;
  NoGradGuardT& operator=(const NoGradGuardT&) = delete;

 private:
  bool prev_;
};

using NoGradGuard = NoGradGuardT<float>;

namespace detail {

template <typename T>
bool any_tracked(std::initializer_list<const TensorT<T>*> ts) {
  for (const auto* t : ts)
    if (t->tracked()) return true;
  return false;
}

// Records a node if autograd is active and at least one input is part of the
// graph. `bw` reads output->grad and accumulates into tracked inputs' grads.
template <typename T>
void record(const char* op, std::initializer_list<const TensorT<T>*> inputs,
            const TensorT<T>& output, std::function<void()> bw) {
  auto& g = GraphT<T>::instance();
  if (!g.recording || !any_tracked<T>(inputs)) return;
  typename GraphT<T>::Node node;
  node.op = op;
  node.inputs.reserve(inputs.size());
  for (const auto* t : inputs) node.inputs.push_back(t->ptr());
  node.output = output.ptr();
  node.backward = std::move(bw);
  g.push(std::move(node));
}

template <typename T>
void record_many(const char* op, const std::vector<TensorT<T>>& inputs, const TensorT<T>& output,
                 std::function<void()> bw) {
  auto& g = GraphT<T>::instance();
  if (!g.recording) return;
  bool tracked = false;
  for (const auto& t : inputs) tracked = tracked || t.tracked();
  if (!tracked) return;
  typename GraphT<T>::Node node;
  node.op = op;
  node.inputs.reserve(inputs.size());
  for (const auto& t : inputs) node.inputs.push_back(t.ptr());
  node.output = output.ptr();
  node.backward = std::move(bw);
  g.push(std::move(node));
}

}  // namespace detail

}  // namespace paanet
