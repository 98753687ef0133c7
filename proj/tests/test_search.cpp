#include "helpers.hpp"

#include "seqnas/errors.hpp"
#include "seqnas/search.hpp"
#include "seqnas/tokenizer.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace seqnas;

namespace {

struct Fixture {
    SyntheticCorpus corpus = gen_synthetic(MetaFeatures{}, 120, 3);
    Vocabulary vocab;
    ModelConfig config;

    Fixture()
    {
        std::vector<std::string> words;
        for (const auto& s : corpus.sentences) {
            words.insert(words.end(), s.words.begin(), s.words.end());
        }
        vocab = train_subword(words, 120);
        config.vocab_size = vocab.size();
        config.embed_dim = 8;
        config.channels = 8;
        config.num_cells = 1;
        config.num_labels = 7;
        config.dropout_p = 0.0;
        config.cell.nodes = 2;
        config.cell.channels = 8;
    }
};

std::vector<std::vector<double>> weights_of(Model& m)
{
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : m.parameters()) {
        out.emplace_back(t.data().begin(), t.data().end());
    }
    return out;
}

}  // namespace

TEST_CASE("search split")
{
    std::vector<TaggedSentence> ten;
    for (int i = 0; i < 10; ++i) {
        ten.push_back({{"w" + std::to_string(i)}, {"O"}});
    }
    const SearchSplits s = split_search_data(ten, 0.5, 1);
    CHECK(s.weight_split.size() == 5);
    CHECK(s.alpha_split.size() == 5);
    std::set<std::string> seen;
    for (const auto& part : {s.weight_split, s.alpha_split}) {
        for (const auto& t : part) {
            CHECK(seen.insert(t.words[0]).second);
        }
    }
    CHECK(seen.size() == 10);
    const SearchSplits again = split_search_data(ten, 0.5, 1);
    CHECK(again.weight_split == s.weight_split);
    CHECK(split_search_data(ten, 0.5, 2).weight_split != s.weight_split);
    CHECK_THROWS_AS(split_search_data(ten, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_search_data(ten, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(split_search_data(std::span(ten).first(1), 0.5, 1), DataError);

    const auto big = gen_synthetic(MetaFeatures{}, 2000, 0);
    const SearchSplits st = split_search_data(big.sentences, 0.5, 0);
    for (const auto& part : {st.weight_split, st.alpha_split}) {
        std::set<std::string> tags;
        for (const auto& sent : part) {
            tags.insert(sent.tags.begin(), sent.tags.end());
        }
        CHECK(tags.size() == default_tag_map().size());
    }
}

TEST_CASE("optimizers")
{
    Tensor w = Tensor::from({2}, {1.0, -2.0}, true);
    w.grad()[0] = 0.5;
    w.grad()[1] = -1.0;
    SgdMomentum sgd;
    sgd.lr = 0.1;
    sgd.momentum = 0.9;
    sgd.weight_decay = 0.0;
    sgd.clip_norm = 0.0;
    NamedTensors p{{"w", w}};
    sgd.step(p);
    CHECK(w[0] == doctest::Approx(0.95));
    sgd.step(p);
    CHECK(w[0] == doctest::Approx(0.95 - 0.1 * (0.9 * 0.5 + 0.5)));

    // clipping bounds the update by lr * clip_norm
    Tensor big = Tensor::from({1}, {0.0}, true);
    big.grad()[0] = 100.0;
    SgdMomentum clip;
    clip.lr = 1.0;
    clip.weight_decay = 0.0;
    clip.clip_norm = 5.0;
    clip.step({{"b", big}});
    CHECK(big[0] == doctest::Approx(-5.0).epsilon(1e-6));

    // first adaptive step moves every coordinate by lr * sign(g)
    ArchParameters a = ArchParameters::from_values({{0.0, 0.0, 0.0}});
    a.edges[0].grad()[0] = 3.0;
    a.edges[0].grad()[1] = -0.01;
    AlphaOptimizer opt;
    opt.weight_decay = 0.0;
    opt.step(a);
    CHECK(a.edges[0][0] == doctest::Approx(-3e-4));
    CHECK(a.edges[0][1] == doctest::Approx(3e-4));
    CHECK(a.edges[0][2] == 0.0);
    CHECK(a.optimizer.steps == 1);
}

TEST_CASE("frozen outer loop leaves alphas bit-unchanged; parameter partition")
{
    Fixture f;
    const SearchSplits sp = split_search_data(f.corpus.sentences, 0.5, 4);
    const auto w_data = encode_corpus(sp.weight_split, f.vocab, 32);
    const auto a_data = encode_corpus(sp.alpha_split, f.vocab, 32);

    Model m = Model::search_network(f.config, 5);
    ArchParameters alphas = ArchParameters::gaussian(f.config.cell, 1e-3, 6);
    const auto a0 = alphas.values();
    const auto w0 = weights_of(m);
    SgdMomentum w_opt;
    AlphaOptimizer a_opt;
    a_opt.lr = 0.0;
    Rng shuffle(7);
    search_epoch(m, alphas, w_opt, a_opt, w_data, a_data, 8, shuffle, 1);
    CHECK(alphas.values() == a0);
    CHECK(weights_of(m) != w0);

    // frozen inner loop: weights bit-unchanged, alphas move
    const auto w1 = weights_of(m);
    SgdMomentum frozen;
    frozen.lr = 0.0;
    AlphaOptimizer live;
    search_epoch(m, alphas, frozen, live, w_data, a_data, 8, shuffle, 2);
    CHECK(weights_of(m) == w1);
    CHECK(alphas.values() != a0);
}

TEST_CASE("both learning rates zero: training statistics are pure measurements")
{
    Fixture f;
    // every weight-split batch is the same sentence, so every step sees one loss
    const std::vector<TaggedSentence> same(16, f.corpus.sentences[0]);
    const auto w_data = encode_corpus(same, f.vocab, 32);
    const auto a_data = encode_corpus(std::span(f.corpus.sentences).first(10), f.vocab, 32);
    Model m = Model::search_network(f.config, 8);
    ArchParameters alphas = ArchParameters::gaussian(f.config.cell, 0.5, 9);
    SgdMomentum w_opt;
    w_opt.lr = 0.0;
    AlphaOptimizer a_opt;
    a_opt.lr = 0.0;

    double direct = 0.0;
    {
        NoGradScope ng;
        const std::vector<const AlignedExample*> batch(4, &w_data[0]);
        direct = m.loss(make_batch(batch), &alphas, Mode::train).value.item();
    }
    Rng shuffle(10);
    const EpochStats e1 = search_epoch(m, alphas, w_opt, a_opt, w_data, a_data, 4, shuffle, 1);
    const EpochStats e2 = search_epoch(m, alphas, w_opt, a_opt, w_data, a_data, 4, shuffle, 2);
    CHECK(std::abs(e1.train_loss - direct) < 1e-12);
    CHECK(std::abs(e1.arch_loss - direct) < 1e-12);
    CHECK(e1.train_loss == e2.train_loss);
    CHECK(e1.arch_loss == e2.arch_loss);
}

TEST_CASE("diverging search names the step")
{
    Fixture f;
    const auto data = encode_corpus(std::span(f.corpus.sentences).first(20), f.vocab, 32);
    Model m = Model::search_network(f.config, 1);
    for (auto& [name, t] : m.parameters()) {
        if (name == "classifier.bias") {
            t.data()[0] = std::nan("");
        }
    }
    ArchParameters alphas = ArchParameters::zeros(f.config.cell);
    SgdMomentum w_opt;
    AlphaOptimizer a_opt;
    Rng shuffle(1);
    try {
        search_epoch(m, alphas, w_opt, a_opt, data, data, 8, shuffle, 3);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string what = e.what();
        CHECK(what.find("epoch 3") != std::string::npos);
        CHECK(what.find("step 0") != std::string::npos);
    }
}

TEST_CASE("run_search")
{
    Fixture f;
    SearchConfig cfg;
    cfg.epochs = 0;
    const SearchResult zero = run_search(f.config, cfg, f.corpus.sentences, f.vocab, 32, 11);
    CHECK(zero.curves.empty());
    const ArchParameters init = ArchParameters::gaussian(f.config.cell, cfg.alpha_sigma, derive_seed(11, "alphas"));
    CHECK(zero.alphas.values() == init.values());
    CHECK(zero.genotype == derive_genotype(init, f.config.cell));
    CHECK(zero.initial.val_loss > 0.0);

    cfg.epochs = 2;
    std::vector<EpochStats> seen;
    const SearchResult a =
        run_search(f.config, cfg, f.corpus.sentences, f.vocab, 32, 11, nullptr, {},
                   [&](const EpochStats& s) { seen.push_back(s); });
    const SearchResult b = run_search(f.config, cfg, f.corpus.sentences, f.vocab, 32, 11);
    REQUIRE(a.curves.size() == 2);
    CHECK(seen.size() == 2);
    CHECK(a.curves[1].epoch == 2);
    CHECK(curves_to_csv(a.curves) == curves_to_csv(b.curves));
    CHECK(a.alphas.values() == b.alphas.values());
    CHECK(a.genotype == b.genotype);
    for (const auto& s : a.curves) {
        CHECK(s.train_loss >= 0.0);
        CHECK(s.arch_loss >= 0.0);
        CHECK(s.val_loss >= 0.0);
        CHECK(s.val_f1_weighted >= 0.0);
        CHECK(s.val_f1_weighted <= 1.0);
        CHECK(s.val_accuracy <= 1.0);
    }

    // the meta-feature hook sees the fresh alphas before any update
    const MetaFeatures meta;
    cfg.epochs = 0;
    const SearchResult hooked =
        run_search(f.config, cfg, f.corpus.sentences, f.vocab, 32, 11, &meta,
                   [](ArchParameters& al, const MetaFeatures&) {
                       for (auto& e : al.edges) {
                           e.data()[2] = 10.0;
                       }
                   });
    for (const auto& node : hooked.genotype.nodes) {
        for (const auto& in : node) {
            CHECK(in.op == "dil_conv3");
        }
    }
    SearchConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(run_search(f.config, bad, f.corpus.sentences, f.vocab, 32, 11), ConfigError);
}

TEST_CASE("final training")
{
    Fixture f;
    const auto data = encode_corpus(f.corpus.sentences, f.vocab, 32);
    const std::span<const AlignedExample> train(data.data(), 100);
    const std::span<const AlignedExample> val(data.data() + 100, 20);
    Genotype g;
    g.primitives = canonical_primitive_names();
    g.channels = 8;
    g.nodes = {{{0, "sep_conv3"}, {1, "skip_connect"}}, {{0, "dil_conv3"}, {2, "attention"}}};
    Model m = build_discrete_model(g, f.config, 12);
    const auto w0 = weights_of(m);

    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK(train_final(m, train, val, cfg, 1).empty());
    CHECK(weights_of(m) == w0);

    cfg.epochs = 3;
    cfg.lr = 0.0;
    Model frozen = build_discrete_model(g, f.config, 12);
    const auto flat = train_final(frozen, train, val, cfg, 1);
    CHECK(flat.size() == 3);
    CHECK(weights_of(frozen) == w0);

    cfg.lr = 0.05;
    const auto curves = train_final(m, train, val, cfg, 1);
    REQUIRE(curves.size() == 3);
    CHECK(curves.back().train_loss < curves.front().train_loss);
    double best = 0.0;
    for (const auto& s : curves) {
        CHECK(s.arch_loss == 0.0);
        best = std::max(best, s.val_f1_weighted);
    }
    // the restored weights are the best epoch's
    CHECK(evaluate(m, nullptr, val, 8).weighted_f1 == best);

    Model small = build_discrete_model(g, f.config, 12);
    Model super = Model::search_network(f.config, 12);
    CHECK(small.parameter_count() < super.parameter_count());
    Genotype wrong = g;
    wrong.channels = 16;
    CHECK_THROWS_AS(build_discrete_model(wrong, f.config, 1), FormatError);
}

TEST_CASE("curves csv")
{
    CHECK(curves_to_csv({}) == "epoch,train_loss,arch_loss,val_loss,val_f1,val_acc\n");
    const std::vector<EpochStats> c{{1, 0.5, 0.25, 0.125, 0.9, 0.95}};
    CHECK(curves_to_csv(c) ==
          "epoch,train_loss,arch_loss,val_loss,val_f1,val_acc\n1,0.500000,0.250000,0.125000,0.900000,0.950000\n");
}
