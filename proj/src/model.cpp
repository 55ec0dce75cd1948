#include "xtqa/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "xtqa/errors.hpp"

namespace xtqa {

using nlohmann::json;

std::string variant_to_string(Variant v) {
    return v == Variant::Diagram ? "diagram" : "nondiagram";
}

Variant variant_from_string(const std::string& s) {
    if (s == "diagram") return Variant::Diagram;
    if (s == "nondiagram") return Variant::NonDiagram;
    throw DataError("unknown variant \"" + s + "\"");
}

ModelConfig ModelConfig::defaults(Variant v) {
    ModelConfig c;
    c.variant = v;
    if (v == Variant::Diagram) {
        c.M = 1;
        c.L = 15;
        c.O = 15;
        c.K = 1;
    } else {
        c.M = 1;
        c.L = 5;
        c.O = 20;
        c.K = 1;
    }
    return c;
}

json ModelConfig::to_json() const {
    json j;
    j["variant"] = variant_to_string(variant);
    j["d_e"] = d_e;
    j["d1"] = d1;
    j["d2"] = d2;
    j["attn_hidden"] = attn_hidden;
    j["ent_hidden"] = ent_hidden;
    j["cls_hidden"] = cls_hidden;
    j["bilinear_hidden"] = bilinear_hidden;
    j["M"] = M;
    j["L"] = L;
    j["O"] = O;
    j["K"] = K;
    j["X"] = X;
    j["Y"] = Y;
    j["max_width"] = max_width;
    j["dropout"] = dropout;
    j["entropy_mode"] = entropy_mode == EntropyMode::Bernoulli ? "bernoulli" : "point";
    j["aux_loss"] = aux_loss;
    j["wide_retrieval"] = wide_retrieval;
    j["embeddings_path"] = embeddings_path;
    return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.d_e = j.at("d_e").get<std::size_t>();
    c.d1 = j.at("d1").get<std::size_t>();
    c.d2 = j.at("d2").get<std::size_t>();
    c.attn_hidden = j.at("attn_hidden").get<std::size_t>();
    c.ent_hidden = j.at("ent_hidden").get<std::size_t>();
    c.cls_hidden = j.at("cls_hidden").get<std::size_t>();
    c.bilinear_hidden = j.at("bilinear_hidden").get<std::size_t>();
    c.M = j.at("M").get<std::size_t>();
    c.L = j.at("L").get<std::size_t>();
    c.O = j.at("O").get<std::size_t>();
    c.K = j.at("K").get<std::size_t>();
    c.X = j.at("X").get<std::size_t>();
    c.Y = j.at("Y").get<std::size_t>();
    c.max_width = j.at("max_width").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.entropy_mode = j.at("entropy_mode").get<std::string>() == "bernoulli"
                         ? EntropyMode::Bernoulli
                         : EntropyMode::Point;
    c.aux_loss = j.at("aux_loss").get<bool>();
    c.wide_retrieval = j.at("wide_retrieval").get<bool>();
    c.embeddings_path = j.value("embeddings_path", "");
    return c;
}

XtqaModel::XtqaModel(const ModelConfig& config, std::size_t vocab_size_, std::uint64_t seed)
    : cfg(config), vocab_size(vocab_size_) {
    Rng rng = derive_stream(seed, "init");
    std::size_t bh = cfg.bilinear_hidden == 0 ? cfg.d1 : cfg.bilinear_hidden;

    embedding = &params.add("embedding", {vocab_size, cfg.d_e}, rng, cfg.d_e);
    gru = GruCell::create(params, "gru", cfg.d_e, cfg.d1, rng);
    attn = AttentionPool::create(params, "attn", cfg.d1, cfg.attn_hidden, cfg.dropout, rng);
    entropy_head =
        Mlp::create(params, "entropy", cfg.d1, cfg.ent_hidden, 1, true, cfg.dropout, rng);
    w_sim = &params.add("w_sim", {cfg.d1, cfg.d1}, rng, cfg.d1);
    if (cfg.variant == Variant::Diagram) {
        diagram_proj = Linear::create(params, "diagram_proj", cfg.d1, cfg.d2, rng);
        bilinear = BilinearAttention::create(params, "bilinear", cfg.d1, bh, rng);
    }
    classifier = Mlp::create(params, "classifier", cfg.fusion_dim(), cfg.cls_hidden, 1, true,
                             cfg.dropout, rng);
}

void XtqaModel::load_pretrained_embeddings(const std::filesystem::path& path,
                                           const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embeddings file " + path.string());
    std::string line;
    std::size_t line_no = 0, loaded = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        int id = vocab.lookup(token);
        std::vector<double> values;
        double v;
        while (ss >> v) values.push_back(v);
        if (values.size() != cfg.d_e)
            throw DataError("embeddings file line " + std::to_string(line_no) + ": expected " +
                            std::to_string(cfg.d_e) + " values, got " +
                            std::to_string(values.size()));
        if (id == Vocab::kUnk && token != "<unk>") continue;  // token outside vocab
        for (std::size_t i = 0; i < cfg.d_e; ++i)
            embedding->value.at(static_cast<std::size_t>(id), i) = values[i];
        ++loaded;
    }
    if (loaded == 0) throw DataError("embeddings file matched no vocabulary token");
    embedding->trainable = false;
}

EncodedSeq encode_sequence(Tape& t, const XtqaModel& model, NodeId embedding,
                           const std::vector<int>& ids, std::size_t len, const ForwardCtx& ctx) {
    EncodedSeq seq;
    if (len == 0) {
        seq.pooled = t.constant(Tensor::zeros({model.cfg.d1}));
        return seq;
    }
    std::vector<NodeId> embedded;
    embedded.reserve(len);
    for (std::size_t i = 0; i < len; ++i)
        embedded.push_back(t.row(embedding, static_cast<std::size_t>(ids[i])));
    seq.rows = model.gru.forward(t, embedded);
    seq.pooled = model.attn.pool(t, seq.rows, ctx);
    return seq;
}

namespace {

std::string render_span_text(const PreparedQuestion& q, const SpanIndex& span) {
    const auto& sents = q.sentences[span.paragraph_rank];
    std::string out;
    for (std::size_t s = span.start; s <= span.end && s <= sents.size(); ++s) {
        if (!out.empty()) out += " ";
        out += sents[s - 1];
    }
    return out;
}

}  // namespace

ForwardResult forward_question(Tape& t, XtqaModel& model, const PreparedQuestion& q,
                               const ForwardCtx& ctx, bool with_loss, double aux_weight) {
    const ModelConfig& cfg = model.cfg;
    if (q.opt_ids.size() < 2) throw DataError("question " + q.question_id + ": fewer than 2 candidates");

    NodeId emb = t.leaf(*model.embedding);

    EncodedSeq question = encode_sequence(t, model, emb, q.q_ids, q.q_len, ctx);
    NodeId q2 = question.pooled;

    std::vector<NodeId> a2;
    a2.reserve(q.opt_ids.size());
    for (std::size_t j = 0; j < q.opt_ids.size(); ++j)
        a2.push_back(encode_sequence(t, model, emb, q.opt_ids[j], q.opt_len[j], ctx).pooled);

    // fine-grained evidence over the retrieved paragraphs
    std::vector<std::vector<NodeId>> sentence_vecs;
    sentence_vecs.reserve(q.paragraphs.size());
    for (const ParagraphInputs& p : q.paragraphs)
        sentence_vecs.push_back(
            encode_paragraph_sentences(t, p, emb, model.gru, model.attn, ctx));
    EvidenceSelection evidence =
        generate_evidence(t, q2, sentence_vecs, model.entropy_head, model.attn, cfg.K,
                          cfg.max_width, cfg.entropy_mode, ctx);
    NodeId e3 = evidence.pooled;

    NodeId w = t.leaf(*model.w_sim);
    NodeId wq2 = t.matvec(w, q2);
    NodeId we3 = t.matvec(w, e3);
    NodeId gmu = t.mul(wq2, we3);

    NodeId dproj = kNoNode, gbeta = kNoNode;
    if (cfg.variant == Variant::Diagram) {
        if (q.diagram_feature.size() != cfg.d2)
            throw DataError("question " + q.question_id + ": diagram feature dim mismatch");
        NodeId draw = t.constant(Tensor::vec(q.diagram_feature));
        dproj = model.diagram_proj.apply(t, draw);
        std::vector<NodeId> q_rows = question.rows;
        if (q_rows.empty()) q_rows.push_back(q2);  // empty question text
        gbeta = model.bilinear.apply(t, q_rows, {dproj});
    }

    std::vector<NodeId> scores;
    scores.reserve(a2.size());
    for (NodeId aj : a2) {
        NodeId waj = t.matvec(w, aj);
        NodeId ggamma = t.mul(wq2, waj);
        NodeId geta = t.mul(we3, waj);
        std::vector<NodeId> blocks;
        if (cfg.variant == Variant::Diagram) {
            NodeId gpsi = t.mul(ggamma, gbeta);
            blocks = {q2, dproj, aj, e3, gbeta, ggamma, gmu, geta, gpsi};
        } else {
            blocks = {q2, aj, e3, ggamma, gmu, geta};
        }
        scores.push_back(model.classifier.apply(t, t.concat(blocks), ctx));
    }

    NodeId probs = t.softmax(t.concat(scores));
    const Tensor& pv = t.val(probs);

    ForwardResult result;
    result.probabilities.assign(pv.data.begin(), pv.data.end());
    result.predicted = 0;
    for (std::size_t j = 1; j < pv.size(); ++j)
        if (pv[j] > pv[result.predicted]) result.predicted = static_cast<int>(j);

    result.p_q = evidence.p_q_val;
    result.p_qe_top = evidence.top().p_qe_val;
    for (std::size_t i : evidence.selected) {
        const ScoredSpan& s = evidence.candidates[i];
        SpanReport r;
        r.paragraph_id = q.paragraph_ids[s.span.paragraph_rank];
        r.start = s.span.start;
        r.end = s.span.end;
        r.gain = s.gain;
        r.text = render_span_text(q, s.span);
        result.evidence.push_back(std::move(r));
    }

    if (with_loss && q.gold >= 0) {
        NodeId loss = t.neg_log_pick(probs, static_cast<std::size_t>(q.gold));
        if (cfg.aux_loss && aux_weight > 0.0) {
            double correct = result.predicted == q.gold ? 1.0 : 0.0;
            NodeId aux = t.add(t.bce(evidence.p_q, correct),
                               t.bce(evidence.top().p_qe, correct));
            loss = t.add(loss, t.scale(aux, 0.5 * aux_weight));
        }
        result.loss = loss;
        result.loss_value = t.val(loss)[0];
        if (!std::isfinite(result.loss_value))
            throw NumericalError("non-finite loss for question " + q.question_id);
    }
    return result;
}

}  // namespace xtqa
