#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skyroute::nn {

using Shape = std::vector<int>;

/// 64-byte aligned allocator. Eigen picks vectorized reduction paths from
/// pointer alignment, so fixed alignment keeps results bitwise reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    Buffer data;
    Buffer grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;

    Buffer& grad_buffer() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

/// Dense row-major double tensor. Copies share storage (handle semantics);
/// operations that need gradients record their inputs and a backward closure,
/// forming the tape walked by backward().
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, Buffer data, bool requires_grad = false);
    Tensor(Shape shape, const std::vector<double>& data, bool requires_grad = false)
        : Tensor(std::move(shape), Buffer(data.begin(), data.end()), requires_grad) {}
    Tensor(Shape shape, std::initializer_list<double> data, bool requires_grad = false)
        : Tensor(std::move(shape), Buffer(data), requires_grad) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(std::size_t i) const { return node_->shape.at(i); }
    int rows() const;
    int cols() const;
    std::size_t numel() const { return node_->data.size(); }

    std::span<double> data() { return node_->data; }
    std::span<const double> data() const { return node_->data; }
    double item() const;
    double& operator[](std::size_t i) { return node_->data[i]; }
    double operator[](std::size_t i) const { return node_->data[i]; }

    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
    bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
    /// Gradient buffer; allocated (zeroed) on first access.
    std::span<double> grad() { return node_->grad_buffer(); }
    void zero_grad();

    /// Reverse-mode sweep from this scalar; accumulates into every leaf that
    /// requires grad.
    void backward();

    /// Drops the recorded history; the tensor becomes a leaf.
    void detach_history();

    detail::TensorNode* node() const noexcept { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const noexcept { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

/// True while gradient recording is enabled on this thread.
bool grad_enabled() noexcept;

/// Disables recording for its lifetime (inference).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Builds an op result; records parents and the backward closure only when
/// recording is on and some parent requires grad.
Tensor make_result(Shape shape, Buffer data, std::vector<Tensor> parents,
                   std::function<void(detail::TensorNode&)> backward);

}  // namespace skyroute::nn
