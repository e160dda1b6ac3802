#include "ccqt/ctensor/autograd.hpp"

#include <unordered_map>

#include "ccqt/errors.hpp"

namespace ccqt {

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

bool record_op(ComplexTensor& out, std::string name,
               std::vector<ComplexTensor> inputs,
               detail::BackwardFn backward) {
  if (!g_grad_enabled) return false;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return false;
  auto node = std::make_shared<detail::Node>();
  node->name = std::move(name);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl().grad_fn = std::move(node);
  out.impl().requires_grad = true;
  return true;
}

GradPlanes grad_buffers(const ComplexTensor& t) {
  auto& impl = t.impl();
  if (impl.grad_re.empty()) {
    impl.grad_re.assign(impl.re.size(), 0.0);
    impl.grad_im.assign(impl.im.size(), 0.0);
  }
  return {impl.grad_re, impl.grad_im};
}

ComputationGraph build_graph(const ComplexTensor& loss) {
  enum class Mark { kActive, kDone };
  ComputationGraph graph;
  std::unordered_map<const detail::TensorImpl*, Mark> marks;

  // Iterative post-order DFS; a tensor seen again while still on the stack
  // means the links form a cycle.
  struct Frame {
    ComplexTensor t;
    std::size_t next_input = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({loss});
  marks[&loss.impl()] = Mark::kActive;
  while (!stack.empty()) {
    auto& frame = stack.back();
    const auto& node = frame.t.impl().grad_fn;
    if (node && frame.next_input < node->inputs.size()) {
      const ComplexTensor child = node->inputs[frame.next_input++];
      if (!child.requires_grad()) continue;
      auto it = marks.find(&child.impl());
      if (it != marks.end()) {
        if (it->second == Mark::kActive)
          throw GraphError("cycle detected at op '" + node->name + "'");
        continue;
      }
      marks[&child.impl()] = Mark::kActive;
      stack.push_back({child});
      continue;
    }
    marks[&frame.t.impl()] = Mark::kDone;
    if (frame.t.impl().grad_fn)
      graph.order.push_back(frame.t);
    else if (frame.t.requires_grad())
      graph.leaves.push_back(frame.t);
    stack.pop_back();
  }
  return graph;
}

void backward(const ComplexTensor& loss) { backward(loss, build_graph(loss)); }

void backward(const ComplexTensor& loss, const ComputationGraph& graph) {
  if (!loss.defined() || loss.size() != 1)
    throw GraphError("backward requires a scalar loss");
  if (loss.imag()[0] != 0.0)
    throw GraphError("backward requires a real-valued loss (imag = " +
                     std::to_string(loss.imag()[0]) + ")");
  if (!loss.requires_grad()) {
    for (const auto& leaf : graph.leaves) grad_buffers(leaf);
    return;
  }
  auto seed = grad_buffers(loss);
  seed.re[0] += 1.0;

  for (auto it = graph.order.rbegin(); it != graph.order.rend(); ++it) {
    auto& impl = it->impl();
    if (impl.grad_re.empty()) continue;
    impl.grad_fn->backward(impl.grad_re, impl.grad_im);
    if (!it->same(loss)) ComplexTensor(*it).clear_grad();
  }
  for (const auto& leaf : graph.leaves) grad_buffers(leaf);
}

}  // namespace ccqt
