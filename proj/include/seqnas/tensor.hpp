#pragma once

// Dense float64 tensors and the reverse-mode tape that records operations on
// them.
//
// A Tensor is a handle: copies share storage and gradient. Use clone() for a
// deep copy. Operations (see ops.hpp) record a backward rule on the tape that
// is active on the calling thread, but only when at least one input requires
// a gradient. With no active tape nothing is recorded, which is how
// evaluation passes run.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqnas {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return impl_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    // Handle semantics: a const Tensor still grants write access to the
    // shared storage (backward closures capture tensors by value).
    std::span<double> data() const;
    double item() const;
    double& operator[](std::size_t i) const { return data()[i]; }

    // Allocates a zero gradient on first access.
    std::span<double> grad() const;
    bool has_grad() const;
    void zero_grad();

    bool requires_grad() const;
    void set_requires_grad(bool value);

    // Index of the node that produced this tensor on its tape, if recorded.
    std::optional<std::size_t> tape_id() const;
    const Tape* tape() const;

    // Copy of the values with no gradient and no tape history.
    Tensor clone() const;

    bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;

    friend class Tape;
};

class Tape {
public:
    using BackwardFn = std::function<void()>;

    Tape() = default;
    ~Tape() { clear(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Appends a node producing `output`; `fn` reads output.grad() and
    // accumulates into the gradients of the node's inputs.
    void record(Tensor& output, BackwardFn fn);

    // Seeds d(loss)/d(loss) = 1 and runs every node at or before the loss in
    // reverse recording order. Throws ShapeError on a non-scalar loss and
    // ConfigError when the loss was not recorded on this tape.
    void backward(Tensor& loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Tensor output;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

// The tape operations record onto on this thread, or nullptr.
Tape* active_tape() noexcept;

// Makes `tape` active for the current thread for the scope's lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

// Suspends recording for the scope's lifetime.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

// Convenience: loss.tape()->backward(loss).
void backward(Tensor& loss);

}  // namespace seqnas
