#include "xtqa/evidence.hpp"

#include <algorithm>

#include "xtqa/errors.hpp"

namespace xtqa {

namespace {
constexpr double kProbClamp = 1e-7;
}

std::vector<std::pair<std::size_t, std::size_t>> enumerate_spans(std::size_t l_actual,
                                                                 std::size_t max_width) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t s = 1; s <= l_actual; ++s)
        for (std::size_t e = s; e <= l_actual && e - s + 1 <= max_width; ++e)
            spans.emplace_back(s, e);
    return spans;
}

std::vector<NodeId> encode_paragraph_sentences(Tape& t, const ParagraphInputs& paragraph,
                                               NodeId embedding, const GruCell& gru,
                                               const AttentionPool& attn, const ForwardCtx& ctx) {
    std::vector<NodeId> out(paragraph.token_ids.size(), kNoNode);
    for (std::size_t s = 0; s < paragraph.token_ids.size(); ++s) {
        std::size_t len = paragraph.sent_len[s];
        if (len == 0) continue;
        std::vector<NodeId> embedded;
        embedded.reserve(len);
        for (std::size_t i = 0; i < len; ++i)
            embedded.push_back(
                t.row(embedding, static_cast<std::size_t>(paragraph.token_ids[s][i])));
        std::vector<NodeId> states = gru.forward(t, embedded);
        out[s] = attn.pool(t, states, ctx);
    }
    return out;
}

NodeId span_representation(Tape& t, const std::vector<NodeId>& sentence_vecs, std::size_t start,
                           std::size_t end) {
    if (start < 1 || end < start || end > sentence_vecs.size())
        throw std::out_of_range("span out of range");
    NodeId u = sentence_vecs[start - 1];
    NodeId v = sentence_vecs[end - 1];
    return t.avg_pool_pairs(t.interleave(u, v));
}

namespace {

EntropyValue entropy_from_logit(Tape& t, NodeId logit, EntropyMode mode) {
    EntropyValue ev;
    ev.prob = t.clamp(t.sigmoid(logit), kProbClamp, 1.0 - kProbClamp);
    if (mode == EntropyMode::Point) {
        ev.entropy = t.neg_log(ev.prob);
    } else {
        // Bernoulli entropy: -p ln p - (1-p) ln(1-p)
        NodeId one = t.scalar(1.0);
        NodeId q = t.sub(one, ev.prob);
        ev.entropy = t.add(t.mul(ev.prob, t.neg_log(ev.prob)), t.mul(q, t.neg_log(q)));
    }
    ev.prob_val = t.val(ev.prob)[0];
    ev.entropy_val = t.val(ev.entropy)[0];
    return ev;
}

}  // namespace

EntropyValue entropy_q(Tape& t, const Mlp& head, NodeId q2, EntropyMode mode,
                       const ForwardCtx& ctx) {
    return entropy_from_logit(t, head.apply(t, q2, ctx), mode);
}

EntropyValue cond_entropy(Tape& t, const Mlp& head, NodeId q2, NodeId e2, EntropyMode mode,
                          const ForwardCtx& ctx) {
    NodeId joint = t.avg_pool_pairs(t.interleave(q2, e2));
    return entropy_from_logit(t, head.apply(t, joint, ctx), mode);
}

EvidenceSelection generate_evidence(Tape& t, NodeId q2,
                                    const std::vector<std::vector<NodeId>>& sentence_vecs,
                                    const Mlp& entropy_head, const AttentionPool& attn,
                                    std::size_t k, std::size_t max_width, EntropyMode mode,
                                    const ForwardCtx& ctx) {
    EvidenceSelection sel;
    EntropyValue hq = entropy_q(t, entropy_head, q2, mode, ctx);
    sel.p_q = hq.prob;
    sel.p_q_val = hq.prob_val;
    sel.h_q_val = hq.entropy_val;

    for (std::size_t rank = 0; rank < sentence_vecs.size(); ++rank) {
        const std::vector<NodeId>& vecs = sentence_vecs[rank];
        // Spans cover maximal runs of consecutive non-empty sentence slots;
        // with end-padded input this is just the real prefix.
        std::size_t s = 0;
        while (s < vecs.size()) {
            if (vecs[s] == kNoNode) {
                ++s;
                continue;
            }
            std::size_t run_end = s;
            while (run_end + 1 < vecs.size() && vecs[run_end + 1] != kNoNode) ++run_end;
            for (auto [a, b] : enumerate_spans(run_end - s + 1, max_width)) {
                ScoredSpan scored;
                scored.span = {rank, s + a, s + b};
                scored.repr = span_representation(t, vecs, scored.span.start, scored.span.end);
                EntropyValue hqe = cond_entropy(t, entropy_head, q2, scored.repr, mode, ctx);
                scored.p_qe = hqe.prob;
                scored.p_qe_val = hqe.prob_val;
                scored.gain = info_gain(hq.entropy_val, hqe.entropy_val);
                sel.candidates.push_back(scored);
            }
            s = run_end + 1;
        }
    }
    if (sel.candidates.empty()) throw DataError("empty context");

    sel.selected.resize(sel.candidates.size());
    for (std::size_t i = 0; i < sel.selected.size(); ++i) sel.selected[i] = i;
    // Enumeration order is (rank, start, width); a stable sort on gain alone
    // therefore realizes the full documented tie rule.
    std::stable_sort(sel.selected.begin(), sel.selected.end(), [&](std::size_t a, std::size_t b) {
        return sel.candidates[a].gain > sel.candidates[b].gain;
    });
    if (sel.selected.size() > k) sel.selected.resize(k);

    std::vector<NodeId> top_reprs;
    top_reprs.reserve(sel.selected.size());
    for (std::size_t i : sel.selected) top_reprs.push_back(sel.candidates[i].repr);
    sel.pooled = attn.pool(t, top_reprs, ctx);
    return sel;
}

}  // namespace xtqa
