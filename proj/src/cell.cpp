#include "seqnas/cell.hpp"

#include "seqnas/errors.hpp"

#include <algorithm>

namespace seqnas {

std::vector<PrimitiveKind> CellConfig::kinds() const
{
    std::vector<PrimitiveKind> out;
    for (const auto& n : primitives) {
        out.push_back(PrimitiveKind::parse(n));
    }
    return out;
}

void CellConfig::validate() const
{
    if (nodes == 0) {
        throw ConfigError("cell needs at least one node");
    }
    if (channels == 0) {
        throw ConfigError("cell needs at least one channel");
    }
    if (primitives.empty()) {
        throw ConfigError("cell needs a non-empty primitive set");
    }
    (void)kinds();
}

ReluConvBn::ReluConvBn(std::size_t in_channels, std::size_t out_channels, Rng& rng)
    : conv_(init_uniform({out_channels, in_channels, 1}, in_channels, rng)),
      gamma_(Tensor::full({out_channels}, 1.0, true)),
      beta_(Tensor::zeros({out_channels}, true)),
      bn_(out_channels)
{
}

Tensor ReluConvBn::forward(const Tensor& x, const Tensor& mask, bool training)
{
    const Tensor h = conv1d(relu(x), conv_);
    if (!norm_enabled_) {
        return apply_mask(h, mask);
    }
    return batch_norm(h, gamma_, beta_, mask, bn_, training);
}

void ReluConvBn::collect_parameters(const std::string& prefix, NamedTensors& out) const
{
    out.emplace_back(prefix + ".conv", conv_);
    out.emplace_back(prefix + ".gamma", gamma_);
    out.emplace_back(prefix + ".beta", beta_);
}

void ReluConvBn::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out)
{
    out.push_back({prefix + ".running_mean", &bn_.running_mean});
    out.push_back({prefix + ".running_var", &bn_.running_var});
}

ConvBn::ConvBn(std::size_t in_channels, std::size_t out_channels, Rng& rng)
    : conv_(init_uniform({out_channels, in_channels, 1}, in_channels, rng)),
      gamma_(Tensor::full({out_channels}, 1.0, true)),
      beta_(Tensor::zeros({out_channels}, true)),
      bn_(out_channels)
{
}

Tensor ConvBn::forward(const Tensor& x, const Tensor& mask, bool training)
{
    return batch_norm(conv1d(x, conv_), gamma_, beta_, mask, bn_, training);
}

void ConvBn::collect_parameters(const std::string& prefix, NamedTensors& out) const
{
    out.emplace_back(prefix + ".conv", conv_);
    out.emplace_back(prefix + ".gamma", gamma_);
    out.emplace_back(prefix + ".beta", beta_);
}

void ConvBn::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out)
{
    out.push_back({prefix + ".running_mean", &bn_.running_mean});
    out.push_back({prefix + ".running_var", &bn_.running_var});
}

Tensor mixed_op(const Tensor& x, const Tensor& edge_alphas, std::span<const Primitive> prims,
                const Tensor& mask)
{
    if (prims.empty()) {
        throw ConfigError("mixed_op: empty primitive list");
    }
    if (edge_alphas.numel() != prims.size()) {
        throw ConfigError("mixed_op: " + std::to_string(edge_alphas.numel()) + " alphas for " +
                          std::to_string(prims.size()) + " primitives");
    }
    const Tensor weights = softmax(edge_alphas, 0);
    std::vector<Tensor> outputs;
    outputs.reserve(prims.size());
    for (const Primitive& p : prims) {
        outputs.push_back(p.apply(x, mask));
    }
    return weighted_sum(weights, outputs);
}

Cell::Cell(const CellConfig& config, std::size_t in0_channels, std::size_t in1_channels, Rng& rng)
    : config_(config),
      discrete_(false),
      pre0_(in0_channels, config.channels, rng),
      pre1_(in1_channels, config.channels, rng)
{
    config_.validate();
    const auto kinds = config_.kinds();
    for (std::size_t j = 0; j < config_.nodes; ++j) {
        for (std::size_t i = 0; i < j + 2; ++i) {
            CellEdge edge{CellConfig::edge_offset(j) + i, j, i, {}};
            for (const auto& k : kinds) {
                edge.ops.emplace_back(k, config_.channels, rng);
            }
            edges_.push_back(std::move(edge));
        }
    }
    const std::size_t cat = config_.nodes * config_.channels;
    projection_ = init_uniform({config_.channels, cat, 1}, cat, rng);
}

Cell::Cell(const CellConfig& config, std::size_t in0_channels, std::size_t in1_channels,
           const std::vector<NodeInputs>& nodes, Rng& rng)
    : config_(config),
      discrete_(true),
      pre0_(in0_channels, config.channels, rng),
      pre1_(in1_channels, config.channels, rng)
{
    config_.validate();
    if (nodes.size() != config_.nodes) {
        throw ConfigError("discrete cell: " + std::to_string(nodes.size()) + " node specs for " +
                          std::to_string(config_.nodes) + " nodes");
    }
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (nodes[j].empty()) {
            throw ConfigError("discrete cell: node " + std::to_string(j) + " has no inputs");
        }
        for (const auto& [from, kind] : nodes[j]) {
            if (from >= j + 2) {
                throw ConfigError("discrete cell: node " + std::to_string(j) +
                                  " cannot read input " + std::to_string(from));
            }
            CellEdge edge{CellConfig::edge_offset(j) + from, j, from, {}};
            edge.ops.emplace_back(kind, config_.channels, rng);
            edges_.push_back(std::move(edge));
        }
    }
    const std::size_t cat = config_.nodes * config_.channels;
    projection_ = init_uniform({config_.channels, cat, 1}, cat, rng);
}

Tensor Cell::forward(const Tensor& s0, const Tensor& s1, std::span<const Tensor> alphas,
                     const Tensor& mask, bool training)
{
    if (!discrete_ && alphas.size() != config_.edge_count()) {
        throw ConfigError("cell: " + std::to_string(alphas.size()) + " edge alphas for " +
                          std::to_string(config_.edge_count()) + " edges");
    }
    std::vector<Tensor> states;
    states.reserve(config_.nodes + 2);
    states.push_back(pre0_.forward(s0, mask, training));
    states.push_back(pre1_.forward(s1, mask, training));

    std::size_t e = 0;
    for (std::size_t j = 0; j < config_.nodes; ++j) {
        Tensor acc;
        for (; e < edges_.size() && edges_[e].node == j; ++e) {
            const CellEdge& edge = edges_[e];
            const Tensor& x = states[edge.from];
            Tensor h = discrete_ ? edge.ops.front().apply(x, mask)
                                 : mixed_op(x, alphas[edge.index], edge.ops, mask);
            acc = acc.defined() ? add(acc, h) : h;
        }
        states.push_back(apply_mask(acc, mask));
    }
    const std::span<const Tensor> node_outputs(states.data() + 2, config_.nodes);
    return apply_mask(conv1d(concat_channels(node_outputs), projection_), mask);
}

void Cell::collect_parameters(const std::string& prefix, NamedTensors& out) const
{
    pre0_.collect_parameters(prefix + ".pre0", out);
    pre1_.collect_parameters(prefix + ".pre1", out);
    for (const CellEdge& edge : edges_) {
        for (const Primitive& p : edge.ops) {
            p.collect_parameters(prefix + ".edge" + std::to_string(edge.index), out);
        }
    }
    out.emplace_back(prefix + ".projection", projection_);
}

void Cell::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out)
{
    pre0_.collect_buffers(prefix + ".pre0", out);
    pre1_.collect_buffers(prefix + ".pre1", out);
}

}  // namespace seqnas
