#include "seqnas/tokenizer.hpp"

#include "seqnas/errors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace seqnas {
namespace {

std::string pair_key(const std::string& a, const std::string& b)
{
    std::string k = a;
    k += '\x1f';
    k += b;
    return k;
}

std::size_t utf8_length(unsigned char lead)
{
    if (lead < 0x80) {
        return 1;
    }
    if ((lead >> 5) == 0x6) {
        return 2;
    }
    if ((lead >> 4) == 0xE) {
        return 3;
    }
    if ((lead >> 3) == 0x1E) {
        return 4;
    }
    return 1;
}

// Merges every left-to-right occurrence of (a, b) in place.
void apply_merge(std::vector<std::string>& symbols, const std::string& a, const std::string& b)
{
    std::vector<std::string> out;
    out.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
            out.push_back(a + b);
            ++i;
        } else {
            out.push_back(std::move(symbols[i]));
        }
    }
    symbols = std::move(out);
}

}  // namespace

std::vector<std::string> utf8_symbols(std::string_view text)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < text.size();) {
        std::size_t len = utf8_length(static_cast<unsigned char>(text[i]));
        if (i + len > text.size()) {
            len = 1;
        }
        out.emplace_back(text.substr(i, len));
        i += len;
    }
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> alphabet,
                       std::vector<std::pair<std::string, std::string>> merges,
                       std::vector<std::size_t> merge_counts)
    : alphabet_(std::move(alphabet)), merges_(std::move(merges)), merge_counts_(std::move(merge_counts))
{
    std::sort(alphabet_.begin(), alphabet_.end());
    alphabet_.erase(std::unique(alphabet_.begin(), alphabet_.end()), alphabet_.end());
    tokens_ = {"<pad>", "<unk>"};
    for (const auto& s : alphabet_) {
        tokens_.push_back(s);
    }
    for (std::size_t i = 0; i < merges_.size(); ++i) {
        tokens_.push_back(merges_[i].first + merges_[i].second);
        rank_.emplace(pair_key(merges_[i].first, merges_[i].second), i);
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        // A merged string can coincide with an earlier token; keep the first id.
        ids_.emplace(tokens_[i], static_cast<int>(i));
    }
}

int Vocabulary::id(const std::string& piece) const
{
    const auto it = ids_.find(piece);
    return it == ids_.end() ? unk_id : it->second;
}

std::vector<std::string> Vocabulary::encode_pieces(std::string_view word) const
{
    std::vector<std::string> symbols = utf8_symbols(word);
    while (symbols.size() > 1) {
        std::size_t best_rank = merges_.size();
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            const auto it = rank_.find(pair_key(symbols[i], symbols[i + 1]));
            if (it != rank_.end() && it->second < best_rank) {
                best_rank = it->second;
            }
        }
        if (best_rank == merges_.size()) {
            break;
        }
        apply_merge(symbols, merges_[best_rank].first, merges_[best_rank].second);
    }
    return symbols;
}

std::vector<int> Vocabulary::encode(std::string_view word) const
{
    std::vector<int> ids;
    for (const auto& piece : encode_pieces(word)) {
        ids.push_back(id(piece));
    }
    return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const
{
    std::string out;
    for (const int i : ids) {
        if (i == pad_id || i == unk_id || i < 0 || static_cast<std::size_t>(i) >= tokens_.size()) {
            continue;
        }
        out += tokens_[static_cast<std::size_t>(i)];
    }
    return out;
}

nlohmann::ordered_json Vocabulary::to_json() const
{
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["pad_id"] = pad_id;
    j["unk_id"] = unk_id;
    j["alphabet"] = alphabet_;
    nlohmann::ordered_json merges = nlohmann::ordered_json::array();
    for (const auto& [a, b] : merges_) {
        merges.push_back({a, b});
    }
    j["merges"] = std::move(merges);
    j["merge_counts"] = merge_counts_;
    nlohmann::ordered_json ids = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!ids.contains(tokens_[i])) {
            ids[tokens_[i]] = i;
        }
    }
    j["ids"] = std::move(ids);
    return j;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j)
{
    try {
        auto alphabet = j.at("alphabet").get<std::vector<std::string>>();
        std::vector<std::pair<std::string, std::string>> merges;
        for (const auto& m : j.at("merges")) {
            merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
        }
        auto counts = j.value("merge_counts", std::vector<std::size_t>{});
        Vocabulary v(std::move(alphabet), std::move(merges), std::move(counts));
        if (j.contains("ids")) {
            for (const auto& [piece, id] : j["ids"].items()) {
                if (v.id(piece) != id.get<int>()) {
                    throw FormatError("vocabulary file: id map disagrees with merges for '" + piece + "'");
                }
            }
        }
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("vocabulary file: ") + e.what());
    }
}

Vocabulary train_subword(std::span<const std::string> words, std::size_t vocab_size, std::uint64_t)
{
    std::map<std::string, std::size_t> freq;
    for (const auto& w : words) {
        if (!w.empty()) {
            ++freq[w];
        }
    }
    std::set<std::string> alphabet_set;
    std::vector<std::vector<std::string>> segs;
    std::vector<std::size_t> counts;
    for (const auto& [w, c] : freq) {
        segs.push_back(utf8_symbols(w));
        counts.push_back(c);
        alphabet_set.insert(segs.back().begin(), segs.back().end());
    }
    std::vector<std::string> alphabet(alphabet_set.begin(), alphabet_set.end());
    if (vocab_size <= alphabet.size()) {
        throw ConfigError("vocab_size " + std::to_string(vocab_size) + " must exceed the alphabet size " +
                          std::to_string(alphabet.size()));
    }

    std::vector<std::pair<std::string, std::string>> merges;
    std::vector<std::size_t> merge_counts;
    std::unordered_map<std::string, std::size_t> pair_counts;
    while (alphabet.size() + merges.size() < vocab_size) {
        pair_counts.clear();
        for (std::size_t w = 0; w < segs.size(); ++w) {
            const auto& s = segs[w];
            for (std::size_t i = 0; i + 1 < s.size(); ++i) {
                pair_counts[pair_key(s[i], s[i + 1])] += counts[w];
            }
        }
        const std::string* best = nullptr;
        std::size_t best_count = 0;
        for (const auto& [key, c] : pair_counts) {
            if (c > best_count || (c == best_count && best != nullptr && key < *best)) {
                best = &key;
                best_count = c;
            }
        }
        if (best == nullptr || best_count < 2) {
            break;
        }
        const std::size_t sep = best->find('\x1f');
        std::string a = best->substr(0, sep);
        std::string b = best->substr(sep + 1);
        for (auto& s : segs) {
            apply_merge(s, a, b);
        }
        merges.emplace_back(std::move(a), std::move(b));
        merge_counts.push_back(best_count);
    }
    return Vocabulary(std::move(alphabet), std::move(merges), std::move(merge_counts));
}

Vocabulary read_vocabulary_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open vocabulary file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return Vocabulary::from_json(nlohmann::json::parse(ss.str()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("vocabulary file " + path + ": " + e.what());
    }
}

void write_vocabulary_file(const std::string& path, const Vocabulary& vocab)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write vocabulary file " + path);
    }
    out << vocab.to_json().dump(1) << "\n";
}

}  // namespace seqnas
