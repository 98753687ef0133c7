#pragma once

// End-to-end sequence labeler:
//   embedding -> two stem branches (s0, s1) -> stacked cells -> dropout ->
//   per-token linear classifier.
// Cell k reads the outputs of cells k-2 and k-1; the stem outputs seed the
// chain.

#include "seqnas/arch.hpp"
#include "seqnas/cell.hpp"
#include "seqnas/ops.hpp"

#include <optional>
#include <vector>

namespace seqnas {

inline constexpr int kIgnoreLabel = -100;

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 32;
    std::size_t channels = 32;
    std::size_t num_cells = 2;
    std::size_t num_labels = 7;
    double dropout_p = 0.1;
    CellConfig cell;

    // Throws ConfigError; also requires cell.channels == channels.
    void validate() const;
};

enum class Mode { train, eval };

// Row-major [batch, time] matrices. Padding carries mask 0 and kIgnoreLabel.
struct BatchInput {
    std::size_t batch = 0;
    std::size_t time = 0;
    std::vector<int> token_ids;
    std::vector<int> attention_mask;
    std::vector<int> label_ids;

    Tensor mask_tensor() const;
};

class Model {
public:
    // Super-network with every primitive on every edge.
    static Model search_network(const ModelConfig& config, std::uint64_t seed);
    // Fixed-architecture network built from a genotype.
    static Model discrete(const ModelConfig& config, const Genotype& genotype, std::uint64_t seed);

    Model(Model&&) = default;
    Model& operator=(Model&&) = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    // Logits [batch, time, num_labels]. `alphas` is required for search
    // networks and ignored by discrete ones. Throws DataError on an
    // out-of-range token id.
    Tensor forward(const BatchInput& batch, const ArchParameters* alphas, Mode mode);

    // Masked cross-entropy of forward() logits against batch.label_ids.
    MaskedLoss loss(const BatchInput& batch, const ArchParameters* alphas, Mode mode);

    // Eval-mode argmax labels; masked and ignored positions get kIgnoreLabel.
    std::vector<int> predict(const BatchInput& batch, const ArchParameters* alphas);

    const ModelConfig& config() const noexcept { return config_; }
    bool discrete() const noexcept { return genotype_.has_value(); }
    const std::optional<Genotype>& genotype() const noexcept { return genotype_; }

    NamedTensors parameters() const;
    std::vector<NamedBuffer> buffers();
    std::size_t parameter_count() const;
    void zero_grad();

    // Copies of all weights and running statistics, and their restoration.
    struct Snapshot {
        std::vector<std::vector<double>> weights;
        std::vector<std::vector<double>> buffers;
    };
    Snapshot snapshot();
    void restore(const Snapshot& s);

    void seed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

    std::vector<Cell>& cells() noexcept { return cells_; }
    ConvBn& stem0() noexcept { return stem0_; }
    ConvBn& stem1() noexcept { return stem1_; }

private:
    Model(const ModelConfig& config, Rng& rng);

    ModelConfig config_;
    std::optional<Genotype> genotype_;
    Tensor embedding_;
    ConvBn stem0_;
    ConvBn stem1_;
    std::vector<Cell> cells_;
    Tensor classifier_;
    Tensor classifier_bias_;
    Rng dropout_rng_{0};
};

// Argmax over [batch, time, labels] logits, honouring mask and ignore labels.
std::vector<int> predict_from_logits(const Tensor& logits, const BatchInput& batch);

}  // namespace seqnas
