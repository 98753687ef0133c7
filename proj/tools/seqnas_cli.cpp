// seqnas command-line driver: gen-data, train-tokenizer, search, derive,
// train, eval.
//
// Every command reads one flat JSON config (--config) whose keys can be
// overridden individually with --key value. Exit codes: 0 ok, 1 config,
// 2 data, 3 numeric; failures print a single "seqnas: <kind>-error: <reason>"
// line on stderr.

#include "seqnas/checkpoint.hpp"
#include "seqnas/corpus.hpp"
#include "seqnas/errors.hpp"
#include "seqnas/search.hpp"
#include "seqnas/synthetic.hpp"
#include "seqnas/tokenizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace seqnas;
using nlohmann::json;

namespace {

enum class Kind { integer, real, text };

struct Key {
    const char* name;
    Kind kind;
    json fallback;  // null: no default
};

// clang-format off
const std::vector<Key> kKeys{
    {"seed", Kind::integer, 0},
    // paths
    {"meta", Kind::text, nullptr},
    {"out_dir", Kind::text, nullptr},
    {"corpus", Kind::text, nullptr},
    {"val_corpus", Kind::text, nullptr},
    {"vocab", Kind::text, nullptr},
    {"alphas", Kind::text, nullptr},
    {"genotype", Kind::text, nullptr},
    {"checkpoint", Kind::text, nullptr},
    {"curves", Kind::text, nullptr},
    {"report", Kind::text, nullptr},
    {"out", Kind::text, nullptr},
    // data
    {"n", Kind::integer, 2000},
    {"variant", Kind::text, "morph"},
    {"offset", Kind::integer, 4},
    {"vocab_size", Kind::integer, 600},
    {"profile", Kind::text, "generic"},
    {"max_len", Kind::integer, 64},
    // model
    {"embed_dim", Kind::integer, 32},
    {"channels", Kind::integer, 32},
    {"num_cells", Kind::integer, 2},
    {"nodes", Kind::integer, 3},
    {"dropout_p", Kind::real, 0.1},
    // search
    {"epochs", Kind::integer, 5},
    {"batch_size", Kind::integer, 8},
    {"ratio", Kind::real, 0.5},
    {"lr_w", Kind::real, 0.025},
    {"lr_alpha", Kind::real, 3e-4},
    {"momentum", Kind::real, 0.9},
    {"weight_decay", Kind::real, 3e-4},
    {"alpha_weight_decay", Kind::real, 1e-3},
    {"grad_clip", Kind::real, 5.0},
    {"alpha_sigma", Kind::real, 1e-3},
    // final training
    {"train_epochs", Kind::integer, 10},
    {"lr", Kind::real, 0.025},
};
// clang-format on

const Key* find_key(const std::string& name)
{
    for (const auto& k : kKeys) {
        if (name == k.name) {
            return &k;
        }
    }
    return nullptr;
}

json convert(const Key& key, const json& raw)
{
    const std::string where = "config key '" + std::string(key.name) + "'";
    if (raw.is_string() && key.kind != Kind::text) {
        const std::string s = raw.get<std::string>();
        std::size_t used = 0;
        try {
            if (key.kind == Kind::integer) {
                const long long v = std::stoll(s, &used);
                if (used == s.size()) {
                    return convert(key, v);
                }
            } else {
                const double v = std::stod(s, &used);
                if (used == s.size()) {
                    return convert(key, v);
                }
            }
        } catch (const std::exception&) {
        }
        throw ConfigError(where + ": cannot parse '" + s + "'");
    }
    switch (key.kind) {
    case Kind::integer:
        if (!raw.is_number_integer() || raw.get<long long>() < 0) {
            throw ConfigError(where + " must be a non-negative integer");
        }
        return raw;
    case Kind::real:
        if (!raw.is_number() || !std::isfinite(raw.get<double>())) {
            throw ConfigError(where + " must be a finite number");
        }
        return raw.get<double>();
    case Kind::text:
        if (!raw.is_string()) {
            throw ConfigError(where + " must be a string");
        }
        return raw;
    }
    return raw;
}

class RunConfig {
public:
    void load_file(const std::string& path)
    {
        json j;
        try {
            j = json::parse(read_text_file(path));
        } catch (const json::exception& e) {
            throw ConfigError("config " + path + ": " + e.what());
        }
        if (!j.is_object()) {
            throw ConfigError("config " + path + " must be a JSON object");
        }
        for (const auto& [name, value] : j.items()) {
            set(name, value);
        }
    }

    void set(const std::string& name, const json& raw)
    {
        const Key* key = find_key(name);
        if (key == nullptr) {
            throw ConfigError("unknown config key '" + name + "'");
        }
        values_[name] = convert(*key, raw);
    }

    bool has(const std::string& name) const { return values_.contains(name) || !find_key(name)->fallback.is_null(); }

    const json& get(const std::string& name) const
    {
        if (auto it = values_.find(name); it != values_.end()) {
            return it->second;
        }
        const json& d = find_key(name)->fallback;
        if (d.is_null()) {
            throw ConfigError("missing required setting '" + name + "'");
        }
        return d;
    }

    std::size_t size(const std::string& name) const { return get(name).get<std::size_t>(); }
    double real(const std::string& name) const { return get(name).get<double>(); }
    std::string text(const std::string& name) const { return get(name).get<std::string>(); }

    // Input file that must exist at command start (DataError otherwise).
    std::string input(const std::string& name) const
    {
        const std::string p = text(name);
        if (!fs::is_regular_file(p)) {
            throw DataError(name + " file not found: " + p);
        }
        return p;
    }

    std::uint64_t seed() const { return get("seed").get<std::uint64_t>(); }

private:
    std::map<std::string, json> values_;
};

ModelConfig model_config(const RunConfig& cfg, std::size_t vocab_size)
{
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.embed_dim = cfg.size("embed_dim");
    m.channels = cfg.size("channels");
    m.num_cells = cfg.size("num_cells");
    m.num_labels = default_tag_map().size();
    m.dropout_p = cfg.real("dropout_p");
    m.cell.nodes = cfg.size("nodes");
    m.cell.channels = m.channels;
    m.cell.primitives = canonical_primitive_names();
    return m;
}

std::vector<TaggedSentence> load_corpus(const RunConfig& cfg, const std::string& key)
{
    auto corpus = read_corpus_file(cfg.input(key));
    const NormalizationProfile profile = parse_profile(cfg.text("profile"));
    for (auto& s : corpus) {
        for (auto& w : s.words) {
            w = normalize(w, profile);
        }
    }
    return corpus;
}

void log_epoch(const char* phase, const EpochStats& s)
{
    std::fprintf(stderr, "%s epoch %zu: train_loss %.4f arch_loss %.4f val_loss %.4f val_f1 %.4f val_acc %.4f\n",
                 phase, s.epoch, s.train_loss, s.arch_loss, s.val_loss, s.val_f1_weighted, s.val_accuracy);
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw DataError("cannot create directory " + dir + ": " + ec.message());
    }
}

void cmd_gen_data(const RunConfig& cfg)
{
    const std::size_t n = cfg.size("n");
    if (n < 3) {
        throw ConfigError("gen-data needs n >= 3 for a three-way split");
    }
    const std::string variant = cfg.text("variant");
    SyntheticCorpus corpus;
    MetaFeatures meta;
    if (variant == "morph") {
        if (cfg.has("meta")) {
            json j;
            try {
                j = json::parse(read_text_file(cfg.input("meta")));
            } catch (const json::exception& e) {
                throw ConfigError(std::string("meta file: ") + e.what());
            }
            meta = meta_from_json(j);
        }
        corpus = gen_synthetic(meta, n, derive_seed(cfg.seed(), "gen-data"));
    } else if (variant == "long_range") {
        corpus = gen_long_range(n, cfg.size("offset"), derive_seed(cfg.seed(), "gen-data"));
    } else {
        throw ConfigError("variant must be 'morph' or 'long_range'");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    const std::span<const TaggedSentence> all(corpus.sentences);
    const std::string dir = cfg.text("out_dir");
    ensure_dir(dir);
    write_corpus_file(dir + "/train.tsv", all.subspan(0, n_train));
    write_corpus_file(dir + "/val.tsv", all.subspan(n_train, n_val));
    write_corpus_file(dir + "/test.tsv", all.subspan(n_train + n_val));
    write_text_file(dir + "/lexicon.tsv", serialize_lexicon(corpus.lexicon));
    if (variant == "morph") {
        write_text_file(dir + "/meta.json", meta_to_json(meta).dump(2) + "\n");
    }
}

void cmd_train_tokenizer(const RunConfig& cfg)
{
    const auto corpus = load_corpus(cfg, "corpus");
    std::vector<std::string> words;
    for (const auto& s : corpus) {
        words.insert(words.end(), s.words.begin(), s.words.end());
    }
    const Vocabulary vocab = train_subword(words, cfg.size("vocab_size"), derive_seed(cfg.seed(), "tokenizer"));
    write_vocabulary_file(cfg.text("out"), vocab);
}

SearchConfig search_config(const RunConfig& cfg)
{
    SearchConfig s;
    s.epochs = cfg.size("epochs");
    s.batch_size = cfg.size("batch_size");
    s.ratio = cfg.real("ratio");
    s.lr_w = cfg.real("lr_w");
    s.lr_alpha = cfg.real("lr_alpha");
    s.momentum = cfg.real("momentum");
    s.weight_decay = cfg.real("weight_decay");
    s.alpha_weight_decay = cfg.real("alpha_weight_decay");
    s.grad_clip = cfg.real("grad_clip");
    s.alpha_sigma = cfg.real("alpha_sigma");
    return s;
}

void cmd_search(const RunConfig& cfg)
{
    const auto corpus = load_corpus(cfg, "corpus");
    const Vocabulary vocab = read_vocabulary_file(cfg.input("vocab"));
    const ModelConfig mc = model_config(cfg, vocab.size());
    const SearchConfig sc = search_config(cfg);
    const std::string dir = cfg.text("out_dir");
    ensure_dir(dir);
    SearchResult res = run_search(mc, sc, corpus, vocab, cfg.size("max_len"), cfg.seed(), nullptr, {},
                                  [](const EpochStats& s) { log_epoch("search", s); });
    write_text_file(dir + "/curves.csv", curves_to_csv(res.curves));
    write_text_file(dir + "/alphas.json", arch_to_json(res.alphas, mc.cell).dump(2) + "\n");
    write_text_file(dir + "/genotype.json", genotype_to_json(res.genotype));
}

void cmd_derive(const RunConfig& cfg)
{
    json j;
    try {
        j = json::parse(read_text_file(cfg.input("alphas")));
    } catch (const json::exception& e) {
        throw FormatError(std::string("alphas file: ") + e.what());
    }
    CellConfig cell;
    const ArchParameters alphas = arch_from_json(j, &cell);
    write_text_file(cfg.text("out"), genotype_to_json(derive_genotype(alphas, cell)));
}

TrainConfig train_config(const RunConfig& cfg)
{
    TrainConfig t;
    t.epochs = cfg.size("train_epochs");
    t.batch_size = cfg.size("batch_size");
    t.lr = cfg.real("lr");
    t.momentum = cfg.real("momentum");
    t.weight_decay = cfg.real("weight_decay");
    t.grad_clip = cfg.real("grad_clip");
    return t;
}

void cmd_train(const RunConfig& cfg)
{
    const Genotype genotype = genotype_from_json(read_text_file(cfg.input("genotype")));
    const auto train = load_corpus(cfg, "corpus");
    const auto val = load_corpus(cfg, "val_corpus");
    const Vocabulary vocab = read_vocabulary_file(cfg.input("vocab"));
    const TrainConfig tc = train_config(cfg);
    ModelConfig mc = model_config(cfg, vocab.size());
    Model model = build_discrete_model(genotype, mc, derive_seed(cfg.seed(), "final-weights"));
    const std::size_t max_len = cfg.size("max_len");
    const auto curves = train_final(model, encode_corpus(train, vocab, max_len), encode_corpus(val, vocab, max_len),
                                    tc, derive_seed(cfg.seed(), "final-train"),
                                    [](const EpochStats& s) { log_epoch("train", s); });
    save_checkpoint(cfg.text("checkpoint"), model);
    if (cfg.has("curves")) {
        write_text_file(cfg.text("curves"), curves_to_csv(curves));
    }
}

void cmd_eval(const RunConfig& cfg)
{
    Checkpoint cp = load_checkpoint(cfg.input("checkpoint"));
    const auto corpus = load_corpus(cfg, "corpus");
    const Vocabulary vocab = read_vocabulary_file(cfg.input("vocab"));
    if (vocab.size() != cp.model.config().vocab_size) {
        throw DataError("vocabulary has " + std::to_string(vocab.size()) + " entries, checkpoint expects " +
                        std::to_string(cp.model.config().vocab_size));
    }
    const auto data = encode_corpus(corpus, vocab, cfg.size("max_len"));
    const MetricsReport r =
        evaluate(cp.model, cp.alphas ? &*cp.alphas : nullptr, data, cfg.size("batch_size"));
    const std::string prefix = cfg.text("report");
    write_text_file(prefix + ".json", report_to_json(r).dump(2) + "\n");
    write_text_file(prefix + ".txt", report_to_text(r));
    std::cout << report_to_text(r);
}

std::string one_line(std::string s)
{
    for (char& c : s) {
        if (c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    return s;
}

int fail(const char* kind, int code, const std::string& what)
{
    std::cerr << "seqnas: " << kind << "-error: " << one_line(what) << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Differentiable architecture search for sequence labeling"};
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const RunConfig&);
    };
    const std::vector<Command> commands{
        {"gen-data", "write a synthetic train/val/test corpus and its lexicon", cmd_gen_data},
        {"train-tokenizer", "learn a subword vocabulary from a corpus", cmd_train_tokenizer},
        {"search", "run the architecture search; writes curves, alphas and genotype", cmd_search},
        {"derive", "derive a genotype from saved architecture parameters", cmd_derive},
        {"train", "train the discrete architecture from scratch", cmd_train},
        {"eval", "evaluate a checkpoint and write the report", cmd_eval},
    };

    std::string config_path;
    std::map<std::string, std::string> overrides;
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "JSON config file");
        for (const auto& k : kKeys) {
            const std::string name = k.name;
            sub->add_option_function<std::string>(
                "--" + name, [&overrides, name](const std::string& v) { overrides[name] = v; },
                "override config key " + name);
        }
        subs.emplace_back(sub, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", 1, e.what());
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            if (!fs::is_regular_file(config_path)) {
                throw ConfigError("config file not found: " + config_path);
            }
            cfg.load_file(config_path);
        }
        for (const auto& [name, value] : overrides) {
            cfg.set(name, value);
        }
        for (const auto& [sub, cmd] : subs) {
            if (sub->parsed()) {
                cmd->run(cfg);
            }
        }
    } catch (const ConfigError& e) {
        return fail("config", 1, e.what());
    } catch (const DataError& e) {
        return fail("data", 2, e.what());
    } catch (const NumericError& e) {
        return fail("numeric", 3, e.what());
    } catch (const std::exception& e) {
        return fail("config", 1, e.what());
    }
    return 0;
}
