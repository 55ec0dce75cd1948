#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtqa/corpus.hpp"
#include "xtqa/evidence.hpp"
#include "xtqa/layers.hpp"
#include "xtqa/text_index.hpp"

namespace xtqa {

enum class Variant { NonDiagram, Diagram };

std::string variant_to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
    Variant variant = Variant::NonDiagram;
    std::size_t d_e = 64;     // word embedding dim
    std::size_t d1 = 1024;    // hidden dim
    std::size_t d2 = 2048;    // diagram feature dim
    std::size_t attn_hidden = 1024;
    std::size_t ent_hidden = 1024;
    std::size_t cls_hidden = 2048;
    std::size_t bilinear_hidden = 0;  // 0 = d1
    std::size_t M = 1, L = 5, O = 20, K = 1;
    std::size_t X = 30, Y = 10;  // padded question / answer lengths
    std::size_t max_width = 2;
    double dropout = 0.2;
    EntropyMode entropy_mode = EntropyMode::Point;
    bool aux_loss = true;
    bool wide_retrieval = false;  // retrieve across the whole corpus
    std::string embeddings_path;  // optional static word vectors

    static ModelConfig defaults(Variant v);
    std::size_t fusion_blocks() const { return variant == Variant::Diagram ? 9 : 6; }
    std::size_t fusion_dim() const { return fusion_blocks() * d1; }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// Fully assembled XTQA network. GRU and attention scorer are single shared
// instances used by the question, answer and paragraph-sentence encoders.
class XtqaModel {
public:
    XtqaModel(const ModelConfig& config, std::size_t vocab_size, std::uint64_t seed);

    ModelConfig cfg;
    std::size_t vocab_size = 0;

    ParameterStore params;
    Parameter* embedding = nullptr;  // [vocab, d_e]
    GruCell gru;
    AttentionPool attn;
    Mlp entropy_head;
    Parameter* w_sim = nullptr;  // W, d1 x d1
    Linear diagram_proj;         // d2 -> d1 (diagram variant only)
    BilinearAttention bilinear;  // diagram variant only
    Mlp classifier;

    // Overwrite embedding rows from a whitespace-separated text file
    // ("token v1 .. v_de" per line); loaded embeddings are frozen.
    void load_pretrained_embeddings(const std::filesystem::path& path, const Vocab& vocab);
};

// A question with all model inputs resolved (token ids, retrieval, features).
struct PreparedQuestion {
    std::string question_id;
    QuestionKind kind = QuestionKind::MultipleChoice;
    std::vector<int> q_ids;
    std::size_t q_len = 0;
    std::vector<std::vector<int>> opt_ids;
    std::vector<std::size_t> opt_len;
    int gold = -1;
    std::vector<ParagraphInputs> paragraphs;            // M retrieval slots
    std::vector<std::string> paragraph_ids;             // per slot
    std::vector<std::vector<std::string>> sentences;    // per slot, first L
    std::vector<double> diagram_feature;                // d2 (diagram variant)
    bool retrieval_fallback = false;
};

struct SpanReport {
    std::string paragraph_id;
    std::size_t start = 1, end = 1;  // 1-based sentence indices
    double gain = 0.0;
    std::string text;
};

struct ForwardResult {
    std::vector<double> probabilities;
    int predicted = -1;
    NodeId loss = kNoNode;
    double loss_value = 0.0;
    double p_q = 0.0;
    double p_qe_top = 0.0;
    std::vector<SpanReport> evidence;  // selected spans, best first
};

struct EncodedSeq {
    std::vector<NodeId> rows;  // per real token
    NodeId pooled = kNoNode;
};

EncodedSeq encode_sequence(Tape& t, const XtqaModel& model, NodeId embedding,
                           const std::vector<int>& ids, std::size_t len, const ForwardCtx& ctx);

// End-to-end forward for one question: encode, retrieve-encode evidence,
// fuse, score. Computes the training loss when gold is known and
// with_loss is set.
ForwardResult forward_question(Tape& t, XtqaModel& model, const PreparedQuestion& q,
                               const ForwardCtx& ctx, bool with_loss, double aux_weight);

}  // namespace xtqa
