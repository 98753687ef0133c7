#include "seqnas/tensor.hpp"

#include "seqnas/errors.hpp"

#include <algorithm>
#include <numeric>

namespace seqnas {

struct Tensor::Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    const Tape* tape = nullptr;
    std::size_t node = 0;
};

namespace {
thread_local Tape* g_tape = nullptr;
}

std::size_t shape_numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            s += ",";
        }
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->data.assign(shape_numel(shape), value);
    t.impl_->shape = std::move(shape);
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad)
{
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    }
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(values);
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
    return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const
{
    return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= impl_->shape.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(impl_->shape));
    }
    return impl_->shape[axis];
}

std::size_t Tensor::numel() const
{
    return impl_->data.size();
}

std::span<double> Tensor::data() const
{
    return impl_->data;
}

double Tensor::item() const
{
    if (impl_->data.size() != 1) {
        throw ShapeError("item() on tensor of shape " + shape_str(impl_->shape));
    }
    return impl_->data[0];
}

std::span<double> Tensor::grad() const
{
    if (impl_->grad.size() != impl_->data.size()) {
        impl_->grad.assign(impl_->data.size(), 0.0);
    }
    return impl_->grad;
}

bool Tensor::has_grad() const
{
    return impl_->grad.size() == impl_->data.size() && !impl_->data.empty();
}

void Tensor::zero_grad()
{
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

bool Tensor::requires_grad() const
{
    return impl_ != nullptr && impl_->requires_grad;
}

void Tensor::set_requires_grad(bool value)
{
    impl_->requires_grad = value;
}

std::optional<std::size_t> Tensor::tape_id() const
{
    if (impl_->tape == nullptr) {
        return std::nullopt;
    }
    return impl_->node;
}

const Tape* Tensor::tape() const
{
    return impl_->tape;
}

Tensor Tensor::clone() const
{
    return from(impl_->shape, impl_->data, false);
}

void Tape::record(Tensor& output, BackwardFn fn)
{
    output.impl_->requires_grad = true;
    output.impl_->tape = this;
    output.impl_->node = nodes_.size();
    nodes_.push_back(Node{output, std::move(fn)});
}

void Tape::backward(Tensor& loss)
{
    if (loss.numel() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (loss.tape() != this) {
        throw ConfigError("backward(): loss was not recorded on this tape");
    }
    loss.grad()[0] = 1.0;
    for (std::size_t i = *loss.tape_id() + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (node.output.has_grad()) {
            node.backward();
        }
    }
}

void Tape::clear()
{
    for (Node& node : nodes_) {
        node.output.impl_->tape = nullptr;
    }
    nodes_.clear();
}

Tape* active_tape() noexcept
{
    return g_tape;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_tape)
{
    g_tape = &tape;
}

TapeScope::~TapeScope()
{
    g_tape = previous_;
}

NoGradScope::NoGradScope() : previous_(g_tape)
{
    g_tape = nullptr;
}

NoGradScope::~NoGradScope()
{
    g_tape = previous_;
}

void backward(Tensor& loss)
{
    if (!loss.defined() || loss.tape() == nullptr) {
        throw ConfigError("backward(): loss is not on any tape");
    }
    const_cast<Tape*>(loss.tape())->backward(loss);
}

}  // namespace seqnas
