#pragma once

// Word-level BIO-tagged corpora: the tab-separated column format, text
// normalization, subword/tag alignment and batching.

#include "seqnas/errors.hpp"
#include "seqnas/model.hpp"
#include "seqnas/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqnas {

class Vocabulary;

class TagError : public DataError {
public:
    using DataError::DataError;
};

struct TaggedSentence {
    std::vector<std::string> words;
    std::vector<std::string> tags;

    friend bool operator==(const TaggedSentence&, const TaggedSentence&) = default;
};

// Token-level label inventory, ordered lexicographically:
// B-LOC B-ORG B-PER I-LOC I-ORG I-PER O.
class TagMap {
public:
    TagMap();

    int id(std::string_view tag) const;  // throws TagError
    const std::string& tag(int id) const;
    std::size_t size() const noexcept { return tags_.size(); }
    const std::vector<std::string>& tags() const noexcept { return tags_; }
    bool contains(std::string_view tag) const;

private:
    std::vector<std::string> tags_;
};

const TagMap& default_tag_map();

// Index of the first I-X that does not continue a B-X/I-X, if any.
std::optional<std::size_t> find_bio_violation(const TaggedSentence& sentence);

// Parses `word<TAB>tag` lines with blank lines between sentences. Wrong
// column counts raise ParseError, unknown tags TagError, both with the line
// number. BIO violations raise TagError unless `bio_violations` is given, in
// which case they are appended there as messages.
std::vector<TaggedSentence> parse_corpus(std::string_view text,
                                         std::vector<std::string>* bio_violations = nullptr);
std::string serialize_corpus(std::span<const TaggedSentence> corpus);

std::vector<TaggedSentence> read_corpus_file(const std::string& path);
void write_corpus_file(const std::string& path, std::span<const TaggedSentence> corpus);

// Character folding applied on top of NFC composition and whitespace
// collapsing.
enum class NormalizationProfile { generic, devanagari, kannada };

NormalizationProfile parse_profile(std::string_view name);

// NFC composition, profile-specific folding (zero-width joiners dropped and
// native digits mapped to ASCII for the Indic profiles), Unicode whitespace
// collapsed to single spaces and trimmed. Idempotent.
std::string normalize(std::string_view text, NormalizationProfile profile = NormalizationProfile::generic);

struct AlignedExample {
    std::vector<int> ids;
    std::vector<int> labels;      // tag id on first subwords, kIgnoreLabel elsewhere
    std::vector<int> word_index;  // source word of every subword
    std::size_t words_kept = 0;   // words that survived truncation
};

// First subword of each word carries the word's tag id; later subwords carry
// kIgnoreLabel. Whole trailing words are dropped once max_len would be
// exceeded; a single over-long first word keeps its first max_len subwords.
AlignedExample align(const TaggedSentence& sentence, const Vocabulary& vocab, std::size_t max_len,
                     const TagMap& tags = default_tag_map());

// Pads to the longest example; padding is pad id 0, mask 0, kIgnoreLabel.
BatchInput make_batch(std::span<const AlignedExample* const> examples);
BatchInput make_batch(std::span<const AlignedExample> examples);

// Consecutive index groups of at most batch_size over [0, n), optionally
// shuffled first.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    Rng* shuffle);

}  // namespace seqnas
