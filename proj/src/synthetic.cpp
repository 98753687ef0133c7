#include "seqnas/synthetic.hpp"

#include "seqnas/errors.hpp"
#include "seqnas/rng.hpp"

#include <unicode/uchar.h>
#include <unicode/unorm2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace seqnas {
namespace {

constexpr std::size_t kStemsPerEntityClass = 40;
constexpr std::size_t kOutsideStems = 160;
constexpr std::size_t kSuffixes = 12;
constexpr std::size_t kMinSentence = 6;
constexpr std::size_t kMaxSentence = 14;
constexpr std::size_t kMaxSpan = 3;
const std::vector<std::string> kEntityClasses{"PER", "ORG", "LOC"};

const std::vector<std::string>& letter_pool()
{
    static const std::vector<std::string> pool = [] {
        std::vector<std::string> out;
        for (UChar32 c = 0x0C85; c < 0x1100; ++c) {
            if (u_charType(c) != U_OTHER_LETTER || u_getCombiningClass(c) != 0) {
                continue;
            }
            if (u_getIntPropertyValue(c, UCHAR_DECOMPOSITION_TYPE) != U_DT_NONE ||
                u_getIntPropertyValue(c, UCHAR_NFC_QUICK_CHECK) != UNORM_YES) {
                continue;
            }
            std::string s;
            icu::UnicodeString(c).toUTF8String(s);
            out.push_back(std::move(s));
        }
        return out;
    }();
    return pool;
}

std::string random_string(const std::vector<std::string>& alphabet, std::size_t len, Rng& rng)
{
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
        s += alphabet[rng.below(alphabet.size())];
    }
    return s;
}

bool prefix_clash(const std::set<std::string>& stems, const std::string& candidate)
{
    // Any stem that is a prefix of the candidate sorts at or before it.
    auto it = stems.upper_bound(candidate);
    if (it != stems.end() && it->starts_with(candidate)) {
        return true;
    }
    while (it != stems.begin()) {
        --it;
        if (candidate.starts_with(*it)) {
            return true;
        }
        if (it->empty() || (*it)[0] != candidate[0]) {
            break;
        }
    }
    return false;
}

}  // namespace

void MetaFeatures::validate() const
{
    if (script_size < 2 || script_size > letter_pool().size()) {
        throw ConfigError("script_size must lie in [2, " + std::to_string(letter_pool().size()) + "]");
    }
    const auto [lo, hi] = stem_length_range;
    if (lo < 1 || lo > hi || hi > 12) {
        throw ConfigError("stem_length_range must satisfy 1 <= min <= max <= 12");
    }
    if (!(entity_density >= 0.0 && entity_density < 1.0)) {
        throw ConfigError("entity_density must lie in [0, 1)");
    }
    if (agglutination_depth > 8) {
        throw ConfigError("agglutination_depth must be at most 8");
    }
    if (!(avg_suffixes_per_word >= 0.0) ||
        avg_suffixes_per_word > static_cast<double>(agglutination_depth)) {
        throw ConfigError("avg_suffixes_per_word must lie in [0, agglutination_depth]");
    }
    const double capacity = std::pow(static_cast<double>(script_size), static_cast<double>(lo));
    if (capacity < 2.0 * static_cast<double>(3 * kStemsPerEntityClass + kOutsideStems)) {
        throw ConfigError("script_size and stem lengths admit too few distinct stems");
    }
}

nlohmann::ordered_json meta_to_json(const MetaFeatures& m)
{
    nlohmann::ordered_json j;
    j["script_size"] = m.script_size;
    j["avg_suffixes_per_word"] = m.avg_suffixes_per_word;
    j["stem_length_range"] = {m.stem_length_range.first, m.stem_length_range.second};
    j["entity_density"] = m.entity_density;
    j["agglutination_depth"] = m.agglutination_depth;
    return j;
}

MetaFeatures meta_from_json(const nlohmann::json& j)
{
    static const std::set<std::string> fields{"script_size", "avg_suffixes_per_word", "stem_length_range",
                                              "entity_density", "agglutination_depth"};
    try {
        if (!j.is_object()) {
            throw ConfigError("meta-features must be a JSON object");
        }
        for (const auto& [key, value] : j.items()) {
            if (!fields.contains(key)) {
                throw ConfigError("unknown meta-feature field '" + key + "'");
            }
        }
        MetaFeatures m;
        m.script_size = j.at("script_size").get<std::size_t>();
        m.avg_suffixes_per_word = j.at("avg_suffixes_per_word").get<double>();
        const auto range = j.at("stem_length_range").get<std::vector<std::size_t>>();
        if (range.size() != 2) {
            throw ConfigError("stem_length_range must have two entries");
        }
        m.stem_length_range = {range[0], range[1]};
        m.entity_density = j.at("entity_density").get<double>();
        m.agglutination_depth = j.at("agglutination_depth").get<std::size_t>();
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("meta-features: ") + e.what());
    }
}

std::string Lexicon::lookup(const std::string& word) const
{
    auto it = stem_class.upper_bound(word);
    while (it != stem_class.begin()) {
        --it;
        if (word.starts_with(it->first)) {
            return it->second;
        }
        if (it->first.empty() || word.empty() || it->first[0] != word[0]) {
            break;
        }
    }
    return "O";
}

std::string serialize_lexicon(const Lexicon& lex)
{
    std::string out;
    for (const auto& [stem, cls] : lex.stem_class) {
        out += stem + "\t" + cls + "\n";
    }
    return out;
}

std::vector<std::string> synthetic_alphabet(std::size_t size)
{
    const auto& pool = letter_pool();
    if (size > pool.size()) {
        throw ConfigError("synthetic script supports at most " + std::to_string(pool.size()) + " letters");
    }
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size)};
}

SyntheticCorpus gen_synthetic(const MetaFeatures& meta, std::size_t n_sentences, std::uint64_t seed)
{
    meta.validate();
    if (n_sentences == 0) {
        throw ConfigError("gen_synthetic: need at least one sentence");
    }
    Rng rng(seed);
    const auto alphabet = synthetic_alphabet(meta.script_size);
    const auto [lo, hi] = meta.stem_length_range;

    std::set<std::string> all_stems;
    auto draw_stems = [&](std::size_t count) {
        std::vector<std::string> stems;
        while (stems.size() < count) {
            const std::size_t len = lo + rng.below(hi - lo + 1);
            std::string s = random_string(alphabet, len, rng);
            if (all_stems.contains(s) || prefix_clash(all_stems, s)) {
                continue;
            }
            all_stems.insert(s);
            stems.push_back(std::move(s));
        }
        return stems;
    };

    SyntheticCorpus corpus;
    std::map<std::string, std::vector<std::string>> pools;
    for (const auto& cls : kEntityClasses) {
        pools[cls] = draw_stems(kStemsPerEntityClass);
        for (const auto& s : pools[cls]) {
            corpus.lexicon.stem_class[s] = cls;
        }
    }
    pools["O"] = draw_stems(kOutsideStems);
    for (const auto& s : pools["O"]) {
        corpus.lexicon.stem_class[s] = "O";
    }

    std::set<std::string> suffix_set;
    while (meta.agglutination_depth > 0 && suffix_set.size() < kSuffixes) {
        suffix_set.insert(random_string(alphabet, 1 + rng.below(2), rng));
    }
    corpus.lexicon.suffixes.assign(suffix_set.begin(), suffix_set.end());

    const double p_suffix = meta.agglutination_depth == 0
                                ? 0.0
                                : meta.avg_suffixes_per_word / static_cast<double>(meta.agglutination_depth);
    auto surface = [&](const std::string& stem) {
        std::string w = stem;
        for (std::size_t d = 0; d < meta.agglutination_depth; ++d) {
            if (rng.bernoulli(p_suffix)) {
                w += corpus.lexicon.suffixes[rng.below(corpus.lexicon.suffixes.size())];
            }
        }
        return w;
    };
    auto pick = [&](const std::string& cls) -> const std::string& {
        const auto& pool = pools[cls];
        return pool[rng.below(pool.size())];
    };

    for (std::size_t n = 0; n < n_sentences; ++n) {
        TaggedSentence s;
        const std::size_t len = kMinSentence + rng.below(kMaxSentence - kMinSentence + 1);
        bool after_entity = false;
        while (s.words.size() < len) {
            if (!after_entity && rng.bernoulli(meta.entity_density)) {
                const std::string& cls = kEntityClasses[rng.below(kEntityClasses.size())];
                const std::size_t span = std::min(1 + rng.below(kMaxSpan), len - s.words.size());
                for (std::size_t i = 0; i < span; ++i) {
                    s.words.push_back(surface(pick(cls)));
                    s.tags.push_back((i == 0 ? "B-" : "I-") + cls);
                }
                after_entity = true;
                continue;
            }
            s.words.push_back(surface(pick("O")));
            s.tags.emplace_back("O");
            after_entity = false;
        }
        corpus.sentences.push_back(std::move(s));
    }
    return corpus;
}

SyntheticCorpus gen_long_range(std::size_t n_sentences, std::size_t offset, std::uint64_t seed,
                               std::size_t script_size)
{
    if (n_sentences == 0 || offset == 0) {
        throw ConfigError("gen_long_range: need sentences and a positive offset");
    }
    constexpr std::size_t kWordsPerKey = 6;
    constexpr std::size_t kMinLen = 8;
    constexpr std::size_t kMaxLen = 16;
    Rng rng(seed);
    const auto alphabet = synthetic_alphabet(script_size);
    const std::vector<std::string> keys{"O", "PER", "ORG", "LOC"};

    SyntheticCorpus corpus;
    std::vector<std::string> words;
    std::vector<std::string> key_of;
    std::set<std::string> seen;
    for (const auto& key : keys) {
        for (std::size_t i = 0; i < kWordsPerKey;) {
            std::string w = random_string(alphabet, 2, rng);
            if (!seen.insert(w).second) {
                continue;
            }
            corpus.lexicon.stem_class[w] = key;
            words.push_back(w);
            key_of.push_back(key);
            ++i;
        }
    }
    for (std::size_t n = 0; n < n_sentences; ++n) {
        TaggedSentence s;
        const std::size_t len = kMinLen + rng.below(kMaxLen - kMinLen + 1);
        std::vector<std::size_t> picks;
        for (std::size_t t = 0; t < len; ++t) {
            picks.push_back(rng.below(words.size()));
            s.words.push_back(words[picks.back()]);
            const std::string& key = t >= offset ? key_of[picks[t - offset]] : keys[0];
            s.tags.push_back(key == "O" ? "O" : "B-" + key);
        }
        corpus.sentences.push_back(std::move(s));
    }
    return corpus;
}

std::vector<std::string> lexicon_tags(const Lexicon& lex, const std::vector<std::string>& words)
{
    std::vector<std::string> tags;
    std::string prev = "O";
    for (const auto& w : words) {
        const std::string cls = lex.lookup(w);
        if (cls == "O") {
            tags.emplace_back("O");
        } else {
            tags.push_back((prev == cls ? "I-" : "B-") + cls);
        }
        prev = cls;
    }
    return tags;
}

}  // namespace seqnas
