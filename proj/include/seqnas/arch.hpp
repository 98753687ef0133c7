#pragma once

// Architecture parameters (one logit vector per cell edge, shared by every
// cell in the stack) and the discrete genotype derived from them.

#include "seqnas/cell.hpp"
#include "seqnas/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace seqnas {

// Second-moment state of the adaptive optimizer that updates alphas.
struct AdaptiveState {
    std::vector<std::vector<double>> second_moment;
    std::size_t steps = 0;

    friend bool operator==(const AdaptiveState&, const AdaptiveState&) = default;
};

struct ArchParameters {
    std::vector<Tensor> edges;  // [num_primitives] each, requires_grad
    std::string init_scheme;
    AdaptiveState optimizer;

    // N(0, sigma^2) logits from `seed`.
    static ArchParameters gaussian(const CellConfig& config, double sigma, std::uint64_t seed);
    static ArchParameters zeros(const CellConfig& config);
    static ArchParameters from_values(const std::vector<std::vector<double>>& values);

    std::vector<std::vector<double>> values() const;
    std::size_t primitive_count() const { return edges.empty() ? 0 : edges.front().numel(); }
    void zero_grad();

    // Throws ConfigError on an edge-count/width mismatch or non-finite values.
    void validate(const CellConfig& config) const;
};

nlohmann::ordered_json arch_to_json(const ArchParameters& alphas, const CellConfig& config);
ArchParameters arch_from_json(const nlohmann::json& j, CellConfig* config = nullptr);

struct GenotypeInput {
    std::size_t from = 0;  // 0 = s0, 1 = s1, 2 + m = node m
    std::string op;

    friend bool operator==(const GenotypeInput&, const GenotypeInput&) = default;
};

struct Genotype {
    int version = 1;
    std::vector<std::string> primitives;
    std::vector<std::vector<GenotypeInput>> nodes;
    std::size_t channels = 0;

    // Throws FormatError when names are unknown, an input index is out of
    // range, a node keeps zero or more than two inputs, or "zero" is kept.
    void validate() const;

    // Inputs per node as primitive kinds, for building a discrete cell.
    std::vector<NodeInputs> node_inputs() const;

    friend bool operator==(const Genotype&, const Genotype&) = default;
};

std::string genotype_to_json(const Genotype& g);
Genotype genotype_from_json(std::string_view text);

// Index of the strongest non-"zero" primitive on every edge; ties go to the
// lowest primitive index.
std::vector<std::size_t> select_edge_ops(const ArchParameters& alphas, const CellConfig& config);

// Per edge pick the strongest non-"zero" op; per node keep the two edges whose
// picked op has the largest softmax weight (ties: lowest edge index). Inputs
// are listed in ascending input index.
Genotype derive_genotype(const ArchParameters& alphas, const CellConfig& config);

}  // namespace seqnas
