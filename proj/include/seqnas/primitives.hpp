#pragma once

// Candidate operations for a cell edge. Every primitive maps
// [batch, channels, time] to the same shape, so any of them can sit on any
// edge.

#include "seqnas/rng.hpp"
#include "seqnas/tensor.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seqnas {

enum class PrimitiveFamily { attention, sep_conv, dil_conv, skip_connect, zero };

struct PrimitiveKind {
    PrimitiveFamily family = PrimitiveFamily::zero;
    std::size_t kernel = 1;
    std::size_t dilation = 1;

    // Stable wire name, e.g. "sep_conv3". Genotype files use these.
    std::string name() const;
    static PrimitiveKind parse(std::string_view name);  // throws FormatError

    friend bool operator==(const PrimitiveKind&, const PrimitiveKind&) = default;
};

// attention, sep_conv3, dil_conv3, skip_connect, zero
const std::vector<PrimitiveKind>& canonical_primitives();
std::vector<std::string> canonical_primitive_names();

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

class Primitive {
public:
    Primitive(PrimitiveKind kind, std::size_t channels, Rng& rng);

    const PrimitiveKind& kind() const noexcept { return kind_; }
    std::string name() const { return kind_.name(); }
    std::size_t channels() const noexcept { return channels_; }
    bool mask_aware() const noexcept { return kind_.family == PrimitiveFamily::attention; }

    // x: [batch, channels, time], mask: [batch, time].
    Tensor apply(const Tensor& x, const Tensor& mask) const;

    std::size_t parameter_count() const;
    void collect_parameters(const std::string& prefix, NamedTensors& out) const;

    // Weight tensors in a fixed order; empty for skip_connect and zero.
    const std::vector<Tensor>& weights() const noexcept { return weights_; }

private:
    PrimitiveKind kind_;
    std::size_t channels_;
    std::vector<Tensor> weights_;
    std::vector<std::string> weight_names_;
};

std::vector<Primitive> default_primitive_set(std::size_t channels, std::uint64_t seed);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialised trainable tensor.
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace seqnas
