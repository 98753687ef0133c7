#pragma once

// Byte-pair subword vocabulary learned from word frequencies. Symbols are
// Unicode code points; merges never cross word boundaries.

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace seqnas {

// Splits UTF-8 text into code point substrings. Invalid bytes become
// single-byte symbols.
std::vector<std::string> utf8_symbols(std::string_view text);

class Vocabulary {
public:
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;

    Vocabulary() = default;

    // Ids: 0 pad, 1 unk, then base symbols in byte order, then one id per
    // merge in learning order.
    Vocabulary(std::vector<std::string> alphabet, std::vector<std::pair<std::string, std::string>> merges,
               std::vector<std::size_t> merge_counts = {});

    std::vector<int> encode(std::string_view word) const;
    std::vector<std::string> encode_pieces(std::string_view word) const;
    std::string decode(std::span<const int> ids) const;

    // Total ids including the two specials.
    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t alphabet_size() const noexcept { return alphabet_.size(); }
    const std::vector<std::string>& alphabet() const noexcept { return alphabet_; }
    const std::vector<std::pair<std::string, std::string>>& merges() const noexcept { return merges_; }
    // Weighted pair frequency at the step each merge was learned.
    const std::vector<std::size_t>& merge_counts() const noexcept { return merge_counts_; }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int id(const std::string& piece) const;  // unk_id when absent

    nlohmann::ordered_json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);  // throws FormatError

    friend bool operator==(const Vocabulary& a, const Vocabulary& b)
    {
        return a.tokens_ == b.tokens_ && a.merges_ == b.merges_;
    }

private:
    std::vector<std::string> alphabet_;
    std::vector<std::pair<std::string, std::string>> merges_;
    std::vector<std::size_t> merge_counts_;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    std::unordered_map<std::string, std::size_t> rank_;  // "left\x1fright" -> merge index
};

// Greedy merge learning: repeatedly merge the most frequent adjacent pair
// (ties: lexicographically smallest (left, right)) until the vocabulary holds
// `vocab_size` non-special entries or no pair occurs twice. Deterministic;
// `seed` is accepted for interface symmetry and does not affect the result.
// Throws ConfigError when vocab_size <= alphabet size.
Vocabulary train_subword(std::span<const std::string> words, std::size_t vocab_size,
                         std::uint64_t seed = 0);

Vocabulary read_vocabulary_file(const std::string& path);
void write_vocabulary_file(const std::string& path, const Vocabulary& vocab);

}  // namespace seqnas
