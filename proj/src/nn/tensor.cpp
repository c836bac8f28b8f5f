#include "skyroute/nn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace skyroute::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string shape_str(const Shape& s) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << s[i];
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d < 0) throw ShapeMismatch("negative dimension in " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(Shape shape, Buffer data, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeMismatch("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), Buffer(n, 0.0), requires_grad);
}

int Tensor::rows() const {
    if (node_->shape.size() != 2) throw ShapeMismatch("expected a matrix, got " + shape_str(node_->shape));
    return node_->shape[0];
}

int Tensor::cols() const {
    if (node_->shape.size() != 2) throw ShapeMismatch("expected a matrix, got " + shape_str(node_->shape));
    return node_->shape[1];
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeMismatch("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::detach_history() {
    node_->parents.clear();
    node_->backward = nullptr;
}

void Tensor::backward() {
    if (numel() != 1) throw ShapeMismatch("backward() requires a scalar");
    // Iterative post-order DFS gives a topological order.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    std::vector<std::pair<detail::TensorNode*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::TensorNode* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, Buffer data, std::vector<Tensor> parents,
                   std::function<void(detail::TensorNode&)> backward) {
    Tensor out(std::move(shape), std::move(data));
    if (!g_grad_enabled) return out;
    const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (!any) return out;
    auto* node = out.node();
    node->requires_grad = true;
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(backward);
    return out;
}

}  // namespace skyroute::nn
