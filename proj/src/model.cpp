#include "seqnas/model.hpp"

#include "seqnas/errors.hpp"

namespace seqnas {

void ModelConfig::validate() const
{
    if (vocab_size == 0 || embed_dim == 0 || channels == 0 || num_cells == 0) {
        throw ConfigError("model sizes must be positive");
    }
    if (num_labels < 2) {
        throw ConfigError("model needs at least two labels");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw ConfigError("dropout_p must lie in [0, 1)");
    }
    if (cell.channels != channels) {
        throw ConfigError("cell channels (" + std::to_string(cell.channels) +
                          ") differ from model channels (" + std::to_string(channels) + ")");
    }
    cell.validate();
}

Tensor BatchInput::mask_tensor() const
{
    std::vector<double> m(attention_mask.begin(), attention_mask.end());
    return Tensor::from({batch, time}, std::move(m));
}

Model::Model(const ModelConfig& config, Rng& rng)
    : config_(config),
      embedding_(init_uniform({config.vocab_size, config.embed_dim}, 1, rng)),
      stem0_(config.embed_dim, config.channels, rng),
      stem1_(config.embed_dim, config.channels, rng)
{
}

Model Model::search_network(const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    Rng rng(seed);
    Model m(config, rng);
    for (std::size_t k = 0; k < config.num_cells; ++k) {
        m.cells_.emplace_back(config.cell, config.channels, config.channels, rng);
    }
    m.classifier_ = init_uniform({config.num_labels, config.channels, 1}, config.channels, rng);
    m.classifier_bias_ = Tensor::zeros({config.num_labels}, true);
    m.dropout_rng_ = Rng(derive_seed(seed, "dropout"));
    return m;
}

Model Model::discrete(const ModelConfig& config, const Genotype& genotype, std::uint64_t seed)
{
    config.validate();
    genotype.validate();
    if (genotype.nodes.size() != config.cell.nodes) {
        throw FormatError("genotype has " + std::to_string(genotype.nodes.size()) +
                          " nodes, model cell has " + std::to_string(config.cell.nodes));
    }
    Rng rng(seed);
    Model m(config, rng);
    const auto inputs = genotype.node_inputs();
    for (std::size_t k = 0; k < config.num_cells; ++k) {
        m.cells_.emplace_back(config.cell, config.channels, config.channels, inputs, rng);
    }
    m.classifier_ = init_uniform({config.num_labels, config.channels, 1}, config.channels, rng);
    m.classifier_bias_ = Tensor::zeros({config.num_labels}, true);
    m.genotype_ = genotype;
    m.dropout_rng_ = Rng(derive_seed(seed, "dropout"));
    return m;
}

Tensor Model::forward(const BatchInput& batch, const ArchParameters* alphas, Mode mode)
{
    const std::size_t n = batch.batch * batch.time;
    if (batch.token_ids.size() != n || batch.attention_mask.size() != n) {
        throw ShapeError("batch arrays do not match [" + std::to_string(batch.batch) + "," +
                         std::to_string(batch.time) + "]");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int id = batch.token_ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
            throw DataError("token id " + std::to_string(id) + " at batch " +
                            std::to_string(i / batch.time) + ", position " +
                            std::to_string(i % batch.time) + " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
        }
    }
    std::span<const Tensor> edge_alphas;
    if (!discrete()) {
        if (alphas == nullptr) {
            throw ConfigError("search network forward needs architecture parameters");
        }
        edge_alphas = alphas->edges;
    }
    const bool training = mode == Mode::train;
    const Tensor mask = batch.mask_tensor();

    const Tensor embedded = apply_mask(embedding(embedding_, batch.token_ids, batch.batch, batch.time), mask);
    Tensor prev_prev = stem0_.forward(embedded, mask, training);
    Tensor prev = stem1_.forward(embedded, mask, training);
    for (Cell& cell : cells_) {
        Tensor out = cell.forward(prev_prev, prev, edge_alphas, mask, training);
        prev_prev = std::move(prev);
        prev = std::move(out);
    }
    const Tensor h = dropout(prev, config_.dropout_p, dropout_rng_, training);
    return transpose12(add_channel_bias(conv1d(h, classifier_), classifier_bias_));
}

MaskedLoss Model::loss(const BatchInput& batch, const ArchParameters* alphas, Mode mode)
{
    const Tensor logits = forward(batch, alphas, mode);
    const Tensor flat = reshape(logits, {batch.batch * batch.time, config_.num_labels});
    return cross_entropy_masked(flat, batch.label_ids, kIgnoreLabel);
}

std::vector<int> Model::predict(const BatchInput& batch, const ArchParameters* alphas)
{
    NoGradScope no_grad;
    return predict_from_logits(forward(batch, alphas, Mode::eval), batch);
}

std::vector<int> predict_from_logits(const Tensor& logits, const BatchInput& batch)
{
    const std::size_t labels = logits.dim(2);
    const auto v = logits.data();
    std::vector<int> out(batch.batch * batch.time, kIgnoreLabel);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (batch.attention_mask[i] == 0) {
            continue;
        }
        if (!batch.label_ids.empty() && batch.label_ids[i] == kIgnoreLabel) {
            continue;
        }
        std::size_t best = 0;
        for (std::size_t c = 1; c < labels; ++c) {
            if (v[i * labels + c] > v[i * labels + best]) {
                best = c;
            }
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

NamedTensors Model::parameters() const
{
    NamedTensors out;
    out.emplace_back("embedding", embedding_);
    stem0_.collect_parameters("stem0", out);
    stem1_.collect_parameters("stem1", out);
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        cells_[k].collect_parameters("cell" + std::to_string(k), out);
    }
    out.emplace_back("classifier.weight", classifier_);
    out.emplace_back("classifier.bias", classifier_bias_);
    return out;
}

std::vector<NamedBuffer> Model::buffers()
{
    std::vector<NamedBuffer> out;
    stem0_.collect_buffers("stem0", out);
    stem1_.collect_buffers("stem1", out);
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        cells_[k].collect_buffers("cell" + std::to_string(k), out);
    }
    return out;
}

std::size_t Model::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& [name, t] : parameters()) {
        n += t.numel();
    }
    return n;
}

void Model::zero_grad()
{
    for (auto& [name, t] : parameters()) {
        t.zero_grad();
    }
}

Model::Snapshot Model::snapshot()
{
    Snapshot s;
    for (const auto& [name, t] : parameters()) {
        s.weights.emplace_back(t.data().begin(), t.data().end());
    }
    for (const auto& b : buffers()) {
        s.buffers.push_back(*b.values);
    }
    return s;
}

void Model::restore(const Snapshot& s)
{
    auto params = parameters();
    auto bufs = buffers();
    if (s.weights.size() != params.size() || s.buffers.size() != bufs.size()) {
        throw ConfigError("snapshot does not match model layout");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto d = params[i].second.data();
        std::copy(s.weights[i].begin(), s.weights[i].end(), d.begin());
    }
    for (std::size_t i = 0; i < bufs.size(); ++i) {
        *bufs[i].values = s.buffers[i];
    }
}

}  // namespace seqnas
