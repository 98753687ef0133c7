#pragma once

// The searchable cell: two ReLU-Conv-BN preprocessed inputs feeding a DAG of
// internal nodes. Node j sums one edge from each of s0, s1 and nodes 0..j-1.
// The cell output concatenates all internal nodes along channels and projects
// back to the working width with a 1x1 convolution.

#include "seqnas/ops.hpp"
#include "seqnas/primitives.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace seqnas {

struct CellConfig {
    std::size_t nodes = 3;
    std::size_t channels = 32;
    std::vector<std::string> primitives = canonical_primitive_names();

    // Edges feeding node j are numbered edge_offset(j) + input, where input 0
    // is s0, 1 is s1 and 2 + m is internal node m.
    static std::size_t edge_offset(std::size_t node) { return node * (node + 3) / 2; }
    std::size_t edge_count() const { return edge_offset(nodes); }

    std::vector<PrimitiveKind> kinds() const;
    void validate() const;  // throws ConfigError
};

// Running statistics of a normalization layer, exposed for checkpoints.
struct NamedBuffer {
    std::string name;
    std::vector<double>* values;
};

class ReluConvBn {
public:
    ReluConvBn(std::size_t in_channels, std::size_t out_channels, Rng& rng);

    Tensor forward(const Tensor& x, const Tensor& mask, bool training);

    // With normalization disabled the block is relu -> conv -> mask.
    void set_norm_enabled(bool enabled) noexcept { norm_enabled_ = enabled; }
    Tensor& conv_weight() noexcept { return conv_; }

    void collect_parameters(const std::string& prefix, NamedTensors& out) const;
    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);

private:
    Tensor conv_;
    Tensor gamma_;
    Tensor beta_;
    BatchNormState bn_;
    bool norm_enabled_ = true;
};

// Conv -> BN without the leading ReLU; used by the stem branches.
class ConvBn {
public:
    ConvBn(std::size_t in_channels, std::size_t out_channels, Rng& rng);

    Tensor forward(const Tensor& x, const Tensor& mask, bool training);

    void collect_parameters(const std::string& prefix, NamedTensors& out) const;
    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);

private:
    Tensor conv_;
    Tensor gamma_;
    Tensor beta_;
    BatchNormState bn_;
};

// softmax(alphas)-weighted sum of every primitive applied to x.
Tensor mixed_op(const Tensor& x, const Tensor& edge_alphas, std::span<const Primitive> prims,
                const Tensor& mask);

struct CellEdge {
    std::size_t index = 0;  // position in the full DAG edge numbering
    std::size_t node = 0;
    std::size_t from = 0;
    std::vector<Primitive> ops;
};

// Retained inputs of one node of a discrete cell: (input index, primitive).
using NodeInputs = std::vector<std::pair<std::size_t, PrimitiveKind>>;

class Cell {
public:
    // Search cell: every edge of the full DAG carries the whole primitive set.
    Cell(const CellConfig& config, std::size_t in0_channels, std::size_t in1_channels, Rng& rng);

    // Discrete cell: only the listed edges exist, each with a single op.
    Cell(const CellConfig& config, std::size_t in0_channels, std::size_t in1_channels,
         const std::vector<NodeInputs>& nodes, Rng& rng);

    // alphas: one [K] tensor per DAG edge (search cells); ignored by discrete
    // cells.
    Tensor forward(const Tensor& s0, const Tensor& s1, std::span<const Tensor> alphas,
                   const Tensor& mask, bool training);

    bool discrete() const noexcept { return discrete_; }
    const CellConfig& config() const noexcept { return config_; }
    const std::vector<CellEdge>& edges() const noexcept { return edges_; }
    ReluConvBn& preprocess0() noexcept { return pre0_; }
    ReluConvBn& preprocess1() noexcept { return pre1_; }
    Tensor& projection() noexcept { return projection_; }

    void collect_parameters(const std::string& prefix, NamedTensors& out) const;
    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);

private:
    CellConfig config_;
    bool discrete_;
    ReluConvBn pre0_;
    ReluConvBn pre1_;
    std::vector<CellEdge> edges_;
    Tensor projection_;
};

}  // namespace seqnas
