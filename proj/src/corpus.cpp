#include "seqnas/corpus.hpp"

#include "seqnas/tokenizer.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace seqnas {

TagMap::TagMap() : tags_{"B-LOC", "B-ORG", "B-PER", "I-LOC", "I-ORG", "I-PER", "O"} {}

int TagMap::id(std::string_view tag) const
{
    const auto it = std::find(tags_.begin(), tags_.end(), tag);
    if (it == tags_.end()) {
        throw TagError("unknown tag '" + std::string(tag) + "'");
    }
    return static_cast<int>(it - tags_.begin());
}

const std::string& TagMap::tag(int id) const
{
    return tags_.at(static_cast<std::size_t>(id));
}

bool TagMap::contains(std::string_view tag) const
{
    return std::find(tags_.begin(), tags_.end(), tag) != tags_.end();
}

const TagMap& default_tag_map()
{
    static const TagMap map;
    return map;
}

std::optional<std::size_t> find_bio_violation(const TaggedSentence& sentence)
{
    for (std::size_t i = 0; i < sentence.tags.size(); ++i) {
        const std::string& t = sentence.tags[i];
        if (!t.starts_with("I-")) {
            continue;
        }
        if (i == 0) {
            return i;
        }
        const std::string& prev = sentence.tags[i - 1];
        if (prev.size() < 2 || prev.substr(2) != t.substr(2) || prev[0] == 'O') {
            return i;
        }
    }
    return std::nullopt;
}

std::vector<TaggedSentence> parse_corpus(std::string_view text,
                                         std::vector<std::string>* bio_violations)
{
    const TagMap& tags = default_tag_map();
    std::vector<TaggedSentence> out;
    TaggedSentence current;
    std::size_t first_line = 1;

    auto flush = [&]() {
        if (current.words.empty()) {
            return;
        }
        if (const auto bad = find_bio_violation(current)) {
            const std::string msg = "line " + std::to_string(first_line + *bad) + ": " +
                                    current.tags[*bad] + " does not continue an entity";
            if (bio_violations == nullptr) {
                throw TagError(msg);
            }
            bio_violations->push_back(msg);
        }
        out.push_back(std::move(current));
        current = {};
    };

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            flush();
            continue;
        }
        if (current.words.empty()) {
            first_line = line_no;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos ||
            tab == 0 || tab + 1 == line.size()) {
            throw ParseError("expected 'word<TAB>tag'", line_no);
        }
        const std::string_view tag = line.substr(tab + 1);
        if (!tags.contains(tag)) {
            throw TagError("line " + std::to_string(line_no) + ": unknown tag '" + std::string(tag) + "'");
        }
        current.words.emplace_back(line.substr(0, tab));
        current.tags.emplace_back(tag);
    }
    flush();
    return out;
}

std::string serialize_corpus(std::span<const TaggedSentence> corpus)
{
    std::string out;
    for (const auto& s : corpus) {
        for (std::size_t i = 0; i < s.words.size(); ++i) {
            out += s.words[i];
            out += '\t';
            out += s.tags[i];
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

std::vector<TaggedSentence> read_corpus_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open corpus file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_corpus(ss.str());
}

void write_corpus_file(const std::string& path, std::span<const TaggedSentence> corpus)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write corpus file " + path);
    }
    out << serialize_corpus(corpus);
}

NormalizationProfile parse_profile(std::string_view name)
{
    if (name == "generic") {
        return NormalizationProfile::generic;
    }
    if (name == "devanagari") {
        return NormalizationProfile::devanagari;
    }
    if (name == "kannada") {
        return NormalizationProfile::kannada;
    }
    throw ConfigError("unknown normalization profile '" + std::string(name) + "'");
}

std::string normalize(std::string_view text, NormalizationProfile profile)
{
    const icu::UnicodeString input =
        icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));

    // Folding first, so that composition sees the folded sequence.
    icu::UnicodeString folded;
    for (int32_t i = 0; i < input.length();) {
        UChar32 c = input.char32At(i);
        i += U16_LENGTH(c);
        if (profile != NormalizationProfile::generic && (c == 0x200C || c == 0x200D)) {
            continue;
        }
        if (profile == NormalizationProfile::devanagari && c >= 0x0966 && c <= 0x096F) {
            c = '0' + (c - 0x0966);
        }
        if (profile == NormalizationProfile::kannada && c >= 0x0CE6 && c <= 0x0CEF) {
            c = '0' + (c - 0x0CE6);
        }
        folded.append(c);
    }

    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    icu::UnicodeString composed = U_SUCCESS(status) ? nfc->normalize(folded, status) : folded;
    if (U_FAILURE(status)) {
        composed = folded;
    }

    icu::UnicodeString collapsed;
    bool pending_space = false;
    for (int32_t i = 0; i < composed.length();) {
        const UChar32 c = composed.char32At(i);
        i += U16_LENGTH(c);
        if (u_isUWhiteSpace(c)) {
            pending_space = !collapsed.isEmpty();
            continue;
        }
        if (pending_space) {
            collapsed.append(static_cast<UChar32>(' '));
            pending_space = false;
        }
        collapsed.append(c);
    }
    std::string out;
    collapsed.toUTF8String(out);
    return out;
}

AlignedExample align(const TaggedSentence& sentence, const Vocabulary& vocab, std::size_t max_len,
                     const TagMap& tags)
{
    AlignedExample ex;
    for (std::size_t w = 0; w < sentence.words.size(); ++w) {
        std::vector<int> pieces = vocab.encode(sentence.words[w]);
        if (pieces.empty()) {
            pieces.push_back(Vocabulary::unk_id);
        }
        if (ex.ids.size() + pieces.size() > max_len) {
            if (w == 0 && max_len > 0) {
                pieces.resize(max_len);
            } else {
                break;
            }
        }
        const int tag = tags.id(sentence.tags[w]);
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            ex.ids.push_back(pieces[p]);
            ex.labels.push_back(p == 0 ? tag : kIgnoreLabel);
            ex.word_index.push_back(static_cast<int>(w));
        }
        ex.words_kept = w + 1;
    }
    return ex;
}

BatchInput make_batch(std::span<const AlignedExample* const> examples)
{
    BatchInput b;
    b.batch = examples.size();
    for (const AlignedExample* e : examples) {
        b.time = std::max(b.time, e->ids.size());
    }
    b.time = std::max<std::size_t>(b.time, 1);
    const std::size_t n = b.batch * b.time;
    b.token_ids.assign(n, Vocabulary::pad_id);
    b.attention_mask.assign(n, 0);
    b.label_ids.assign(n, kIgnoreLabel);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const AlignedExample& e = *examples[i];
        for (std::size_t t = 0; t < e.ids.size(); ++t) {
            b.token_ids[i * b.time + t] = e.ids[t];
            b.attention_mask[i * b.time + t] = 1;
            b.label_ids[i * b.time + t] = e.labels[t];
        }
    }
    return b;
}

BatchInput make_batch(std::span<const AlignedExample> examples)
{
    std::vector<const AlignedExample*> ptrs;
    for (const auto& e : examples) {
        ptrs.push_back(&e);
    }
    return make_batch(std::span<const AlignedExample* const>(ptrs));
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    Rng* shuffle)
{
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    if (shuffle != nullptr) {
        shuffle->shuffle(order);
    }
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < n; i += batch_size) {
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
    }
    return out;
}

}  // namespace seqnas
