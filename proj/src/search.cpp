#include "seqnas/search.hpp"

#include "seqnas/errors.hpp"
#include "seqnas/tokenizer.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace seqnas {
namespace {

void check_finite(double v, const std::string& what, std::size_t epoch, std::size_t step)
{
    if (!std::isfinite(v)) {
        throw NumericError(what + " is not finite at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step));
    }
}

std::vector<const AlignedExample*> gather(std::span<const AlignedExample> data,
                                          const std::vector<std::size_t>& idx)
{
    std::vector<const AlignedExample*> out;
    out.reserve(idx.size());
    for (const auto i : idx) {
        out.push_back(&data[i]);
    }
    return out;
}

// Forward + backward of the training loss on one batch; returns the loss.
double loss_and_grad(Model& model, const ArchParameters* alphas, const BatchInput& batch)
{
    Tape tape;
    TapeScope scope(tape);
    MaskedLoss l = model.loss(batch, alphas, Mode::train);
    if (l.all_ignored()) {
        return 0.0;
    }
    tape.backward(l.value);
    return l.value.item();
}

}  // namespace

SearchSplits split_search_data(std::span<const TaggedSentence> corpus, double ratio, std::uint64_t seed)
{
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("split ratio must lie in (0, 1)");
    }
    const std::size_t n = corpus.size();
    const auto n_w = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    if (n_w == 0 || n_w >= n) {
        throw DataError("corpus of " + std::to_string(n) + " sentences is too small to split at ratio " +
                        std::to_string(ratio));
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(order);
    SearchSplits s;
    for (std::size_t i = 0; i < n; ++i) {
        (i < n_w ? s.weight_split : s.alpha_split).push_back(corpus[order[i]]);
    }
    return s;
}

void SgdMomentum::step(const NamedTensors& params)
{
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        for (const auto& [name, t] : params) {
            velocity_.emplace_back(t.numel(), 0.0);
        }
    }
    double scale = 1.0;
    if (clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& [name, t] : params) {
            if (t.has_grad()) {
                for (const double g : t.grad()) {
                    sq += g * g;
                }
            }
        }
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) {
            scale = clip_norm / (norm + 1e-6);
        }
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor t = params[p].second;
        auto w = t.data();
        auto& v = velocity_[p];
        const bool has = t.has_grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double g = (has ? t.grad()[i] * scale : 0.0) + weight_decay * w[i];
            v[i] = momentum * v[i] + g;
            w[i] -= lr * v[i];
        }
    }
}

void AlphaOptimizer::step(ArchParameters& alphas) const
{
    auto& st = alphas.optimizer;
    if (st.second_moment.size() != alphas.edges.size()) {
        st.second_moment.clear();
        for (const auto& e : alphas.edges) {
            st.second_moment.emplace_back(e.numel(), 0.0);
        }
        st.steps = 0;
    }
    ++st.steps;
    const double correction = 1.0 - std::pow(beta2, static_cast<double>(st.steps));
    for (std::size_t e = 0; e < alphas.edges.size(); ++e) {
        Tensor t = alphas.edges[e];
        auto a = t.data();
        auto& v = st.second_moment[e];
        const bool has = t.has_grad();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double g = (has ? t.grad()[i] : 0.0) + weight_decay * a[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            a[i] -= lr * g / (std::sqrt(v[i] / correction) + eps);
        }
    }
}

std::vector<AlignedExample> encode_corpus(std::span<const TaggedSentence> corpus, const Vocabulary& vocab,
                                          std::size_t max_len)
{
    std::vector<AlignedExample> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) {
        out.push_back(align(s, vocab, max_len));
    }
    return out;
}

MetricsReport evaluate(Model& model, const ArchParameters* alphas, std::span<const AlignedExample> data,
                       std::size_t batch_size)
{
    NoGradScope no_grad;
    ClassCounts counts(default_tag_map().tags());
    double loss_sum = 0.0;
    std::size_t tokens = 0;
    for (const auto& idx : batch_indices(data.size(), batch_size, nullptr)) {
        const auto ptrs = gather(data, idx);
        const BatchInput batch = make_batch(ptrs);
        const Tensor logits = model.forward(batch, alphas, Mode::eval);
        const std::size_t labels = model.config().num_labels;
        const MaskedLoss l = cross_entropy_masked(reshape(logits, {batch.batch * batch.time, labels}),
                                                  batch.label_ids, kIgnoreLabel);
        loss_sum += l.value.item() * static_cast<double>(l.counted);
        tokens += l.counted;
        const auto preds = predict_from_logits(logits, batch);
        counts += count(preds, batch.label_ids, kIgnoreLabel, counts.names);
    }
    MetricsReport r = report(counts);
    r.loss = tokens == 0 ? 0.0 : loss_sum / static_cast<double>(tokens);
    return r;
}

void SearchConfig::validate() const
{
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("ratio must lie in (0, 1)");
    }
    if (!(lr_w >= 0.0) || !(lr_alpha >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) ||
        !(weight_decay >= 0.0) || !(alpha_weight_decay >= 0.0) || !(alpha_sigma >= 0.0) ||
        !std::isfinite(grad_clip)) {
        throw ConfigError("search hyperparameters out of range");
    }
}

EpochStats search_epoch(Model& model, ArchParameters& alphas, SgdMomentum& w_opt, const AlphaOptimizer& a_opt,
                        std::span<const AlignedExample> weight_split, std::span<const AlignedExample> alpha_split,
                        std::size_t batch_size, Rng& shuffle, std::size_t epoch)
{
    if (weight_split.empty() || alpha_split.empty()) {
        throw DataError("search needs non-empty weight and alpha splits");
    }
    const auto w_batches = batch_indices(weight_split.size(), batch_size, &shuffle);
    const auto a_batches = batch_indices(alpha_split.size(), batch_size, &shuffle);
    const NamedTensors params = model.parameters();

    EpochStats st;
    st.epoch = epoch;
    for (std::size_t step = 0; step < w_batches.size(); ++step) {
        const BatchInput wb = make_batch(gather(weight_split, w_batches[step]));
        const BatchInput ab = make_batch(gather(alpha_split, a_batches[step % a_batches.size()]));

        // (a) weights on L_train, alpha frozen
        model.zero_grad();
        alphas.zero_grad();
        const double train_loss = loss_and_grad(model, &alphas, wb);
        check_finite(train_loss, "training loss", epoch, step);
        w_opt.step(params);

        // (b) alpha on L_val, w frozen (first-order)
        model.zero_grad();
        alphas.zero_grad();
        const double val_loss = loss_and_grad(model, &alphas, ab);
        check_finite(val_loss, "architecture validation loss", epoch, step);
        a_opt.step(alphas);
        model.zero_grad();
        alphas.zero_grad();

        // (c) L_train after the alpha step
        double arch_loss = 0.0;
        {
            NoGradScope no_grad;
            arch_loss = model.loss(wb, &alphas, Mode::train).value.item();
        }
        check_finite(arch_loss, "re-evaluated training loss", epoch, step);

        st.train_loss += train_loss;
        st.arch_loss += arch_loss;
    }
    const auto steps = static_cast<double>(w_batches.size());
    st.train_loss /= steps;
    st.arch_loss /= steps;

    const MetricsReport r = evaluate(model, &alphas, alpha_split, batch_size);
    st.val_loss = *r.loss;
    st.val_f1_weighted = r.weighted_f1;
    st.val_accuracy = r.accuracy;
    check_finite(st.val_loss, "validation loss", epoch, w_batches.size());
    return st;
}

SearchResult run_search(const ModelConfig& model_config, const SearchConfig& config,
                        std::span<const TaggedSentence> corpus, const Vocabulary& vocab, std::size_t max_len,
                        std::uint64_t seed, const MetaFeatures* meta, const AlphaInitHook& hook,
                        const std::function<void(const EpochStats&)>& on_epoch)
{
    config.validate();
    model_config.validate();
    const SearchSplits splits = split_search_data(corpus, config.ratio, derive_seed(seed, "split"));
    const auto w_data = encode_corpus(splits.weight_split, vocab, max_len);
    const auto a_data = encode_corpus(splits.alpha_split, vocab, max_len);

    Model model = Model::search_network(model_config, derive_seed(seed, "weights"));
    SearchResult res{ArchParameters::gaussian(model_config.cell, config.alpha_sigma, derive_seed(seed, "alphas")),
                     {},
                     {}};
    if (hook && meta != nullptr) {
        hook(res.alphas, *meta);
        res.alphas.validate(model_config.cell);
    }

    SgdMomentum w_opt;
    w_opt.lr = config.lr_w;
    w_opt.momentum = config.momentum;
    w_opt.weight_decay = config.weight_decay;
    w_opt.clip_norm = config.grad_clip;
    AlphaOptimizer a_opt;
    a_opt.lr = config.lr_alpha;
    a_opt.weight_decay = config.alpha_weight_decay;
    Rng shuffle(derive_seed(seed, "shuffle"));

    const MetricsReport r0 = evaluate(model, &res.alphas, a_data, config.batch_size);
    res.initial.val_loss = *r0.loss;
    res.initial.val_f1_weighted = r0.weighted_f1;
    res.initial.val_accuracy = r0.accuracy;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        res.curves.push_back(search_epoch(model, res.alphas, w_opt, a_opt, w_data, a_data, config.batch_size,
                                          shuffle, e + 1));
        if (on_epoch) {
            on_epoch(res.curves.back());
        }
    }
    res.genotype = derive_genotype(res.alphas, model_config.cell);
    return res;
}

Model build_discrete_model(const Genotype& genotype, const ModelConfig& model_config, std::uint64_t seed)
{
    ModelConfig c = model_config;
    if (genotype.channels != c.channels) {
        throw FormatError("genotype channels " + std::to_string(genotype.channels) + " differ from model channels " +
                          std::to_string(c.channels));
    }
    c.cell.primitives = genotype.primitives;
    return Model::discrete(c, genotype, seed);
}

void TrainConfig::validate() const
{
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    if (!(lr >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0) ||
        !std::isfinite(grad_clip)) {
        throw ConfigError("training hyperparameters out of range");
    }
}

std::vector<EpochStats> train_final(Model& model, std::span<const AlignedExample> train,
                                    std::span<const AlignedExample> val, const TrainConfig& config,
                                    std::uint64_t seed, const std::function<void(const EpochStats&)>& on_epoch)
{
    config.validate();
    std::vector<EpochStats> curves;
    if (config.epochs == 0) {
        return curves;
    }
    if (train.empty() || val.empty()) {
        throw DataError("final training needs non-empty training and validation data");
    }
    SgdMomentum opt;
    opt.momentum = config.momentum;
    opt.weight_decay = config.weight_decay;
    opt.clip_norm = config.grad_clip;
    Rng shuffle(derive_seed(seed, "shuffle"));
    model.seed_dropout(derive_seed(seed, "dropout"));
    const NamedTensors params = model.parameters();

    std::optional<Model::Snapshot> best;
    double best_f1 = -1.0;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        opt.lr = config.cosine ? 0.5 * config.lr *
                                     (1.0 + std::cos(std::numbers::pi * static_cast<double>(e) /
                                                     static_cast<double>(config.epochs)))
                               : config.lr;
        EpochStats st;
        st.epoch = e + 1;
        const auto batches = batch_indices(train.size(), config.batch_size, &shuffle);
        for (std::size_t step = 0; step < batches.size(); ++step) {
            model.zero_grad();
            const double l = loss_and_grad(model, nullptr, make_batch(gather(train, batches[step])));
            check_finite(l, "training loss", st.epoch, step);
            opt.step(params);
            st.train_loss += l;
        }
        model.zero_grad();
        st.train_loss /= static_cast<double>(batches.size());
        const MetricsReport r = evaluate(model, nullptr, val, config.batch_size);
        st.val_loss = *r.loss;
        st.val_f1_weighted = r.weighted_f1;
        st.val_accuracy = r.accuracy;
        check_finite(st.val_loss, "validation loss", st.epoch, batches.size());
        if (st.val_f1_weighted > best_f1) {
            best_f1 = st.val_f1_weighted;
            best = model.snapshot();
        }
        curves.push_back(st);
        if (on_epoch) {
            on_epoch(st);
        }
    }
    model.restore(*best);
    return curves;
}

std::string curves_to_csv(std::span<const EpochStats> curves)
{
    std::string out = "epoch,train_loss,arch_loss,val_loss,val_f1,val_acc\n";
    char buf[160];
    for (const auto& s : curves) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.epoch, s.train_loss, s.arch_loss,
                      s.val_loss, s.val_f1_weighted, s.val_accuracy);
        out += buf;
    }
    return out;
}

}  // namespace seqnas
