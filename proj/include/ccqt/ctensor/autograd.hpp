#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccqt/ctensor/tensor.hpp"

namespace ccqt {

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Attaches a backward rule to `out` when recording is on and some input
// requires grad. Returns true if the op was recorded.
bool record_op(ComplexTensor& out, std::string name,
               std::vector<ComplexTensor> inputs, detail::BackwardFn backward);

struct GradPlanes {
  std::span<double> re;
  std::span<double> im;
};

// Gradient accumulators of `t`, zero-allocated on first use.
GradPlanes grad_buffers(const ComplexTensor& t);

// Op outputs in topological order (inputs before consumers). Each recorded
// node appears once.
struct ComputationGraph {
  std::vector<ComplexTensor> order;
  std::vector<ComplexTensor> leaves;  // requires_grad tensors without grad_fn
};

ComputationGraph build_graph(const ComplexTensor& loss);

// Reverse-mode sweep from a real scalar loss. Every requires_grad leaf
// reachable from the loss ends up with a populated grad (zero if no path
// carried signal). Intermediate gradients are released afterwards.
void backward(const ComplexTensor& loss);
void backward(const ComplexTensor& loss, const ComputationGraph& graph);

}  // namespace ccqt
