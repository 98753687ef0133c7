#pragma once

// Synthetic morphology-rich NER corpora. Entity class is a property of the
// word stem (learnable by construction); surface forms vary through chains of
// suffixes. The generator is parameterized by MetaFeatures.

#include "seqnas/corpus.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace seqnas {

struct MetaFeatures {
    std::size_t script_size = 40;
    double avg_suffixes_per_word = 1.0;
    std::pair<std::size_t, std::size_t> stem_length_range{2, 4};
    double entity_density = 0.15;
    std::size_t agglutination_depth = 3;

    // Throws ConfigError on out-of-range or mutually inconsistent fields.
    void validate() const;

    friend bool operator==(const MetaFeatures&, const MetaFeatures&) = default;
};

nlohmann::ordered_json meta_to_json(const MetaFeatures& m);
MetaFeatures meta_from_json(const nlohmann::json& j);  // exact field names; throws ConfigError

// Stem -> entity class ("PER", "ORG", "LOC" or "O").
struct Lexicon {
    std::map<std::string, std::string> stem_class;
    std::vector<std::string> suffixes;

    // Class of the unique stem that prefixes `word`, or "O" when none does.
    std::string lookup(const std::string& word) const;
};

std::string serialize_lexicon(const Lexicon& lex);

struct SyntheticCorpus {
    std::vector<TaggedSentence> sentences;
    Lexicon lexicon;
};

// Letters used as the synthetic script; NFC-stable and free of combining
// marks. Throws ConfigError when more are requested than available.
std::vector<std::string> synthetic_alphabet(std::size_t size);

SyntheticCorpus gen_synthetic(const MetaFeatures& meta, std::size_t n_sentences, std::uint64_t seed);

// Variant whose labels depend only on context: the tag of word t is B-<key of
// word t - offset> (O when that key is O or t < offset), where every word of a
// small closed vocabulary carries a fixed key class. The word itself says
// nothing about its own tag.
SyntheticCorpus gen_long_range(std::size_t n_sentences, std::size_t offset, std::uint64_t seed,
                               std::size_t script_size = 40);

// Stem-lookup tagger: B-/I- from the lexicon class, I- when the previous word
// has the same entity class.
std::vector<std::string> lexicon_tags(const Lexicon& lex, const std::vector<std::string>& words);

}  // namespace seqnas
