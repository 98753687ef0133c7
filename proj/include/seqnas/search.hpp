#pragma once

// Bi-level search loop (first-order), per-epoch trajectory statistics, final
// retraining of the derived architecture and held-out evaluation.

#include "seqnas/arch.hpp"
#include "seqnas/corpus.hpp"
#include "seqnas/metrics.hpp"
#include "seqnas/model.hpp"
#include "seqnas/synthetic.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqnas {

struct SearchSplits {
    std::vector<TaggedSentence> weight_split;  // trains w
    std::vector<TaggedSentence> alpha_split;   // trains alpha
};

// Seeded shuffle, then the first round(ratio * n) sentences train the weights.
// Throws ConfigError for ratio outside (0, 1), DataError when a side would be
// empty.
SearchSplits split_search_data(std::span<const TaggedSentence> corpus, double ratio, std::uint64_t seed);

// Momentum SGD with L2 weight decay and global-norm gradient clipping.
class SgdMomentum {
public:
    double lr = 0.025;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    double clip_norm = 5.0;  // <= 0 disables clipping

    void step(const NamedTensors& params);

private:
    std::vector<std::vector<double>> velocity_;
};

// Adam without first moment (beta1 = 0): step = lr * g / (sqrt(v_hat) + eps).
// State lives in ArchParameters::optimizer so it is saved with the alphas.
struct AlphaOptimizer {
    double lr = 3e-4;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-3;

    void step(ArchParameters& alphas) const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double arch_loss = 0.0;
    double val_loss = 0.0;
    double val_f1_weighted = 0.0;
    double val_accuracy = 0.0;
};

std::vector<AlignedExample> encode_corpus(std::span<const TaggedSentence> corpus, const Vocabulary& vocab,
                                          std::size_t max_len);

// Eval-mode pass (dropout off, running statistics); loss is the token-weighted
// mean over all non-ignored positions.
MetricsReport evaluate(Model& model, const ArchParameters* alphas, std::span<const AlignedExample> data,
                       std::size_t batch_size);

struct SearchConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 8;
    double ratio = 0.5;
    double lr_w = 0.025;
    double lr_alpha = 3e-4;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    double alpha_weight_decay = 1e-3;
    double grad_clip = 5.0;
    double alpha_sigma = 1e-3;

    void validate() const;  // throws ConfigError
};

// One pass over the weight split. For every batch: (a) a w step on L_train
// with alpha frozen, (b) an alpha step on L_val (next alpha-split batch,
// cycling) with w frozen, (c) L_train re-measured on the same batch without
// gradients -> arch_loss. Then a full eval-mode pass over the alpha split.
// Throws NumericError naming epoch and step on a non-finite loss.
EpochStats search_epoch(Model& model, ArchParameters& alphas, SgdMomentum& w_opt, const AlphaOptimizer& a_opt,
                        std::span<const AlignedExample> weight_split, std::span<const AlignedExample> alpha_split,
                        std::size_t batch_size, Rng& shuffle, std::size_t epoch);

// Meta-feature hook: may rewrite the freshly drawn alphas before search
// starts. No semantics are prescribed; the default leaves them untouched.
using AlphaInitHook = std::function<void(ArchParameters&, const MetaFeatures&)>;

struct SearchResult {
    ArchParameters alphas;
    EpochStats initial;  // epoch 0: validation pass before any update
    std::vector<EpochStats> curves;
    Genotype genotype;
};

// Splits `corpus`, builds the super-network and runs config.epochs epochs.
// Seeds for split, weights, alphas, shuffling and dropout all derive from
// `seed`. `on_epoch` sees every EpochStats as it is produced.
SearchResult run_search(const ModelConfig& model_config, const SearchConfig& config,
                        std::span<const TaggedSentence> corpus, const Vocabulary& vocab, std::size_t max_len,
                        std::uint64_t seed, const MetaFeatures* meta = nullptr, const AlphaInitHook& hook = {},
                        const std::function<void(const EpochStats&)>& on_epoch = {});

Model build_discrete_model(const Genotype& genotype, const ModelConfig& model_config, std::uint64_t seed);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 8;
    double lr = 0.025;
    double momentum = 0.9;
    double weight_decay = 3e-4;
    double grad_clip = 5.0;
    bool cosine = true;  // cosine-anneal lr to 0 over the run

    void validate() const;
};

// Single-level training; after every epoch the model is scored on `val` and
// the best weighted-F1 state (first one on ties) is restored at the end.
// arch_loss is reported as 0.
std::vector<EpochStats> train_final(Model& model, std::span<const AlignedExample> train,
                                    std::span<const AlignedExample> val, const TrainConfig& config,
                                    std::uint64_t seed, const std::function<void(const EpochStats&)>& on_epoch = {});

// `epoch,train_loss,arch_loss,val_loss,val_f1,val_acc` plus one row per epoch.
std::string curves_to_csv(std::span<const EpochStats> curves);

}  // namespace seqnas
