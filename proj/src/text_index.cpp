#include "xtqa/text_index.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "xtqa/errors.hpp"

namespace xtqa {

TfIdfIndex::TfIdfIndex(const std::vector<IndexedParagraph>& paragraphs)
    : paragraphs_(paragraphs) {
    if (paragraphs_.empty()) throw DataError("cannot build index over zero paragraphs");
    doc_count_ = paragraphs_.size();

    bool any_tokens = false;
    std::vector<std::map<std::string, double>> term_counts(doc_count_);
    for (std::size_t d = 0; d < doc_count_; ++d) {
        for (const std::string& tok : tokenize(paragraphs_[d].text)) {
            term_counts[d][tok] += 1.0;
            any_tokens = true;
        }
    }
    if (!any_tokens) throw DataError("all paragraphs are empty after tokenization");

    for (std::size_t d = 0; d < doc_count_; ++d)
        for (const auto& [term, tf] : term_counts[d]) {
            postings_[term].emplace_back(d, tf);
            ++doc_freq_[term];
        }

    // Norms accumulate in lexicographic term order, matching the oracle.
    doc_norm_.assign(doc_count_, 0.0);
    for (std::size_t d = 0; d < doc_count_; ++d) {
        double sq = 0.0;
        for (const auto& [term, tf] : term_counts[d]) {
            double w = tf * idf(term);
            sq += w * w;
        }
        doc_norm_[d] = std::sqrt(sq);
    }
}

double TfIdfIndex::idf(const std::string& term) const {
    auto it = doc_freq_.find(term);
    std::size_t df = it == doc_freq_.end() ? 0 : it->second;
    return std::log((1.0 + static_cast<double>(doc_count_)) / (1.0 + static_cast<double>(df))) +
           1.0;
}

std::size_t TfIdfIndex::doc_freq(const std::string& term) const {
    auto it = doc_freq_.find(term);
    return it == doc_freq_.end() ? 0 : it->second;
}

std::string TfIdfIndex::dump_json() const {
    nlohmann::json j;
    j["doc_count"] = doc_count_;
    nlohmann::json df = nlohmann::json::object();
    for (const auto& [term, n] : doc_freq_) df[term] = n;
    j["doc_freq"] = std::move(df);
    j["doc_norm"] = doc_norm_;
    return j.dump();
}

TfIdfIndex::Ranked TfIdfIndex::top_m(const std::string& question_text, std::size_t m) const {
    Ranked out;
    std::vector<std::string> toks = tokenize(question_text);

    // Query term frequencies, lexicographically ordered like document terms.
    std::map<std::string, double> query_tf;
    for (const std::string& t : toks) query_tf[t] += 1.0;

    double query_sq = 0.0;
    std::vector<double> dot(doc_count_, 0.0);
    for (const auto& [term, tf] : query_tf) {
        double w = tf * idf(term);
        query_sq += w * w;
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        for (const auto& [doc, doc_tf] : it->second) dot[doc] += w * (doc_tf * idf(term));
    }
    double query_norm = std::sqrt(query_sq);
    out.fallback = (query_norm == 0.0);

    std::vector<Ranked::Entry> scored;
    if (!out.fallback) {
        for (std::size_t d = 0; d < doc_count_; ++d) {
            if (dot[d] <= 0.0 || doc_norm_[d] == 0.0) continue;
            scored.push_back({d, dot[d] / (query_norm * doc_norm_[d])});
        }
        std::sort(scored.begin(), scored.end(), [](const Ranked::Entry& a, const Ranked::Entry& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc < b.doc;
        });
        if (scored.size() > m) scored.resize(m);
    }

    std::vector<bool> taken(doc_count_, false);
    for (const auto& e : scored) taken[e.doc] = true;
    out.entries = std::move(scored);
    for (std::size_t d = 0; d < doc_count_ && out.entries.size() < m; ++d)
        if (!taken[d]) out.entries.push_back({d, 0.0});
    return out;
}

std::vector<ParagraphInputs> truncate_paragraphs(const TfIdfIndex::Ranked& ranked,
                                                 const std::vector<IndexedParagraph>& paragraphs,
                                                 const Dataset& dataset, const Vocab& vocab,
                                                 std::size_t L, std::size_t O) {
    std::vector<ParagraphInputs> out;
    out.reserve(ranked.entries.size());
    for (const auto& entry : ranked.entries) {
        const IndexedParagraph& ip = paragraphs[entry.doc];
        const Paragraph& para = dataset.lessons[ip.lesson_idx].paragraphs[ip.paragraph_idx];

        ParagraphInputs pi;
        pi.doc = entry.doc;
        pi.token_ids.assign(L, std::vector<int>(O, Vocab::kPad));
        pi.sent_len.assign(L, 0);
        pi.sent_count = std::min(L, para.sentences.size());
        for (std::size_t s = 0; s < pi.sent_count; ++s) {
            std::vector<std::string> toks = tokenize(para.sentences[s]);
            std::size_t n = std::min(O, toks.size());
            for (std::size_t t = 0; t < n; ++t) pi.token_ids[s][t] = vocab.lookup(toks[t]);
            pi.sent_len[s] = n;
        }
        out.push_back(std::move(pi));
    }
    return out;
}

}  // namespace xtqa
