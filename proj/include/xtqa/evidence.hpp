#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "xtqa/layers.hpp"
#include "xtqa/text_index.hpp"

namespace xtqa {

enum class EntropyMode { Point, Bernoulli };

// Candidate span, 1-based sentence indices within one retrieved paragraph.
struct SpanIndex {
    std::size_t paragraph_rank = 0;  // 0..M-1
    std::size_t start = 1;
    std::size_t end = 1;
    std::size_t width() const { return end - start + 1; }
};

// All (start, end) with 1 <= start <= end <= l_actual and width <= max_width,
// ordered by (start, end).
std::vector<std::pair<std::size_t, std::size_t>> enumerate_spans(std::size_t l_actual,
                                                                 std::size_t max_width);

// Per-sentence global vectors for one retrieved paragraph, produced with the
// same shared GRU and attention scorer used for questions and answers.
// Fully padded sentence slots yield kNoNode so span enumeration skips them.
std::vector<NodeId> encode_paragraph_sentences(Tape& t, const ParagraphInputs& paragraph,
                                               NodeId embedding, const GruCell& gru,
                                               const AttentionPool& attn, const ForwardCtx& ctx);

// e'' for [start, end]: the start and end sentence vectors interleaved and
// average-pooled pairwise, i.e. their elementwise mean.
NodeId span_representation(Tape& t, const std::vector<NodeId>& sentence_vecs, std::size_t start,
                           std::size_t end);

struct EntropyValue {
    NodeId prob;      // clamped to [1e-7, 1 - 1e-7]
    NodeId entropy;   // scalar node
    double prob_val;
    double entropy_val;
};

EntropyValue entropy_q(Tape& t, const Mlp& head, NodeId q2, EntropyMode mode,
                       const ForwardCtx& ctx);
EntropyValue cond_entropy(Tape& t, const Mlp& head, NodeId q2, NodeId e2, EntropyMode mode,
                          const ForwardCtx& ctx);

inline double info_gain(double h_q, double h_qe) { return h_q - h_qe; }

struct ScoredSpan {
    SpanIndex span;
    NodeId repr = kNoNode;  // e''
    NodeId p_qe = kNoNode;
    double p_qe_val = 0.0;
    double gain = 0.0;
};

struct EvidenceSelection {
    std::vector<ScoredSpan> candidates;  // enumeration order: (rank, start, end)
    std::vector<std::size_t> selected;   // indices into candidates, best first
    NodeId pooled = kNoNode;             // e'''
    NodeId p_q = kNoNode;
    double p_q_val = 0.0;
    double h_q_val = 0.0;

    const ScoredSpan& top() const { return candidates[selected.front()]; }
};

// Fine-grained phase: score every candidate span in every retrieved
// paragraph by information gain and keep the top K. Ties break by (lower
// paragraph rank, lower start, shorter span) — the enumeration order.
// The pooled e''' uses the shared attention mechanism over the K spans.
EvidenceSelection generate_evidence(Tape& t, NodeId q2,
                                    const std::vector<std::vector<NodeId>>& sentence_vecs,
                                    const Mlp& entropy_head, const AttentionPool& attn,
                                    std::size_t k, std::size_t max_width, EntropyMode mode,
                                    const ForwardCtx& ctx);

}  // namespace xtqa
