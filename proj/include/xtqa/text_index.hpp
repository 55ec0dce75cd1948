#pragma once

#include <map>
#include <string>
#include <vector>

#include "xtqa/corpus.hpp"

namespace xtqa {

// One indexable document: a paragraph's sentences joined into one text.
struct IndexedParagraph {
    std::size_t lesson_idx = 0;
    std::size_t paragraph_idx = 0;
    std::string text;
};

// Inverted TF-IDF index over paragraphs.
//
// tf = raw term count, idf(t) = ln((1 + N) / (1 + df(t))) + 1,
// weight w(t, d) = tf(t, d) * idf(t), scoring by cosine similarity.
// Ordered maps keep every iteration (and therefore every floating-point
// summation order) deterministic, which the ranking tie rule relies on.
class TfIdfIndex {
public:
    explicit TfIdfIndex(const std::vector<IndexedParagraph>& paragraphs);

    std::size_t doc_count() const { return doc_count_; }
    double idf(const std::string& term) const;
    std::size_t doc_freq(const std::string& term) const;
    double doc_norm(std::size_t doc) const { return doc_norm_[doc]; }
    const IndexedParagraph& paragraph(std::size_t doc) const { return paragraphs_[doc]; }

    // Debug dump: {doc_count, doc_freq, doc_norm}. Not a stability contract.
    std::string dump_json() const;

    struct Ranked {
        struct Entry {
            std::size_t doc;   // position in the indexed paragraph list
            double score;      // cosine; 0 for padding entries
        };
        std::vector<Entry> entries;  // scores non-increasing, ties by position
        bool fallback = false;       // query had no usable terms
    };

    // Top m paragraphs by cosine score. Paragraphs with positive score come
    // first (score desc, position asc); remaining slots are padded with
    // unscored paragraphs in position order so callers always see m slots
    // when m documents exist.
    Ranked top_m(const std::string& question_text, std::size_t m) const;

private:
    std::size_t doc_count_ = 0;
    std::vector<IndexedParagraph> paragraphs_;
    std::map<std::string, std::vector<std::pair<std::size_t, double>>> postings_;  // term -> (doc, tf)
    std::map<std::string, std::size_t> doc_freq_;
    std::vector<double> doc_norm_;
};

// Truncated, padded token-id inputs for one retrieved paragraph slot.
struct ParagraphInputs {
    std::size_t doc = 0;                       // index into the indexed list
    std::vector<std::vector<int>> token_ids;   // L x O, padded with Vocab::kPad
    std::vector<std::size_t> sent_len;         // real token count per sentence slot
    std::size_t sent_count = 0;                // real sentences (<= L)
};

// Keep the first L sentences of each ranked paragraph and the first O tokens
// of each sentence; sent_len / sent_count record the real extents.
std::vector<ParagraphInputs> truncate_paragraphs(const TfIdfIndex::Ranked& ranked,
                                                 const std::vector<IndexedParagraph>& paragraphs,
                                                 const Dataset& dataset, const Vocab& vocab,
                                                 std::size_t L, std::size_t O);

}  // namespace xtqa
