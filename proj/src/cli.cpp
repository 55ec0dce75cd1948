#include "xtqa/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "xtqa/config.hpp"
#include "xtqa/errors.hpp"
#include "xtqa/pipeline.hpp"
#include "xtqa/synthetic.hpp"

namespace xtqa {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "xtqa 0.1.0";

void from_string(const std::string& s, std::string& out) { out = s; }
void from_string(const std::string& s, double& out) { out = std::stod(s); }
void from_string(const std::string& s, int& out) { out = std::stoi(s); }
void from_string(const std::string& s, std::size_t& out) { out = std::stoull(s); }
void from_string(const std::string& s, std::uint64_t& out) { out = std::stoull(s); }
void from_string(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes")
        out = true;
    else if (s == "false" || s == "0" || s == "no")
        out = false;
    else
        throw UsageError("cannot parse boolean value \"" + s + "\"");
}

std::string to_config_string(const std::string& v) { return v; }
std::string to_config_string(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string to_config_string(T v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

// Binds CLI flags over an optional flat config file: a flag given on the
// command line wins, otherwise the config file value, otherwise the default.
// Everything resolved lands in `effective` for the run manifest.
class Binder {
public:
    void load_file(const std::string& path) {
        if (!path.empty()) file_ = parse_config_file(path);
    }

    template <typename T>
    void resolve(const CLI::Option* opt, const std::string& key, T& var) {
        if (opt == nullptr || opt->count() == 0) {
            auto it = file_.find(key);
            if (it != file_.end()) {
                try {
                    from_string(it->second, var);
                } catch (const UsageError&) {
                    throw;
                } catch (const std::exception&) {
                    throw UsageError("config key \"" + key + "\": cannot parse value \"" +
                                     it->second + "\"");
                }
            }
        }
        effective_[key] = to_config_string(var);
    }

    const std::map<std::string, std::string>& effective() const { return effective_; }

private:
    std::map<std::string, std::string> file_;
    std::map<std::string, std::string> effective_;
};

void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const Binder& binder) {
    std::filesystem::create_directories(out_dir);
    json j;
    j["version"] = kVersion;
    j["command"] = command;
    json cfg = json::object();
    for (const auto& [k, v] : binder.effective()) cfg[k] = v;
    j["config"] = std::move(cfg);
    std::ofstream out(out_dir / "run_manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write run manifest in " + out_dir.string());
    out << j.dump(2) << "\n";
}

struct TrainArgs {
    std::string config_file, corpus, features, out, variant = "nondiagram";
    std::string entropy = "point", embeddings;
    int epochs = 10, batch = 2, min_freq = 1;
    std::uint64_t seed = 1;
    double aux_weight = 0.5, holdout = 0.2, dropout = 0.2;
    std::size_t k = 0, max_width = 2, m = 0, l = 0, o = 0;  // 0 = variant default
    std::size_t d1 = 1024, de = 64, d2 = 2048;
    std::size_t attn_hidden = 1024, ent_hidden = 1024, cls_hidden = 2048, bilinear_hidden = 0;
    std::size_t x = 30, y = 10;
    bool no_aux = false, wide_retrieval = false;
    double warmup_rate = 2.5e-4, warmup_denom = 1.0, base_lr = 1e-4, lr_decay = 0.1;
    int decay_after = 8;
};

int run_train(const TrainArgs& a, Binder& binder) {
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.seed = a.seed;
    cfg.aux_weight = a.aux_weight;
    cfg.holdout = a.holdout;
    cfg.min_freq = a.min_freq;
    cfg.schedule = {a.warmup_rate, a.warmup_denom, a.base_lr, a.lr_decay, a.decay_after};
    if (cfg.epochs < 1) throw UsageError("--epochs must be >= 1");
    if (cfg.batch < 1) throw UsageError("--batch must be >= 1");

    ModelConfig mc = ModelConfig::defaults(variant_from_string(a.variant));
    mc.d1 = a.d1;
    mc.d_e = a.de;
    mc.d2 = a.d2;
    mc.attn_hidden = a.attn_hidden;
    mc.ent_hidden = a.ent_hidden;
    mc.cls_hidden = a.cls_hidden;
    mc.bilinear_hidden = a.bilinear_hidden;
    mc.X = a.x;
    mc.Y = a.y;
    mc.dropout = a.dropout;
    mc.max_width = a.max_width;
    if (a.k) mc.K = a.k;
    if (a.m) mc.M = a.m;
    if (a.l) mc.L = a.l;
    if (a.o) mc.O = a.o;
    mc.entropy_mode = a.entropy == "bernoulli" ? EntropyMode::Bernoulli : EntropyMode::Point;
    mc.aux_loss = !a.no_aux;
    mc.wide_retrieval = a.wide_retrieval;
    mc.embeddings_path = a.embeddings;
    cfg.model = mc;
    cfg.corpus_path = a.corpus;
    cfg.features_path = a.features;
    cfg.out_dir = a.out;

    write_manifest(cfg.out_dir, "train", binder);
    TrainOutcome outcome = train(cfg);
    for (const EpochReport& er : outcome.epochs) {
        std::cout << "epoch " << er.epoch << " lr " << er.lr << " train_loss " << er.train_loss
                  << " val_all " << round2(er.val.all_acc()) << "\n";
    }
    json summary;
    summary["best_epoch"] = outcome.best_epoch;
    summary["best_checkpoint"] = outcome.best_checkpoint.string();
    summary["best_val"] = outcome.best_val.to_json();
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args) {
    CLI::App app{"xtqa: textbook question answering with span-level evidence"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic corpus");
    std::string sy_config, sy_out;
    SynthConfig sy;
    auto* sy_config_opt = synth->add_option("--config", sy_config, "flat key=value config file");
    auto* sy_lessons = synth->add_option("--lessons", sy.lessons, "number of lessons");
    auto* sy_vocab = synth->add_option("--vocab-size", sy.vocab_size, "token inventory size (>= 20)");
    auto* sy_seed = synth->add_option("--seed", sy.seed, "generator seed");
    auto* sy_paras = synth->add_option("--paragraphs", sy.paragraphs, "paragraphs per lesson");
    auto* sy_sents = synth->add_option("--sentences", sy.sentences, "sentences per paragraph");
    auto* sy_opts = synth->add_option("--options", sy.options, "options per question");
    auto* sy_tf = synth->add_option("--tf-fraction", sy.tf_fraction, "chance of a T/F question per lesson");
    auto* sy_diag = synth->add_option("--diagram-fraction", sy.diagram_fraction,
                                      "chance an MC question becomes a diagram question");
    auto* sy_ddim = synth->add_option("--diagram-dim", sy.diagram_dim, "diagram feature dim");
    auto* sy_out_opt = synth->add_option("--out", sy_out, "output directory")->required();

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "load and validate a corpus, report statistics");
    std::string in_config, in_corpus, in_out;
    int in_min_freq = 1;
    auto* in_config_opt = ingest->add_option("--config", in_config, "flat key=value config file");
    auto* in_corpus_opt = ingest->add_option("--corpus", in_corpus, "corpus JSONL file")->required();
    auto* in_out_opt = ingest->add_option("--out", in_out, "write normalized corpus + vocab here");
    auto* in_minf = ingest->add_option("--min-freq", in_min_freq, "vocab min frequency");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a model");
    TrainArgs ta;
    auto* t_config = train_cmd->add_option("--config", ta.config_file, "flat key=value config file");
    auto* t_corpus = train_cmd->add_option("--corpus", ta.corpus, "corpus JSONL file");
    auto* t_features = train_cmd->add_option("--features", ta.features, "diagram feature file");
    auto* t_out = train_cmd->add_option("--out", ta.out, "output directory");
    auto* t_variant = train_cmd->add_option("--variant", ta.variant, "nondiagram | diagram")
                          ->check(CLI::IsMember({"nondiagram", "diagram"}));
    auto* t_epochs = train_cmd->add_option("--epochs", ta.epochs, "training epochs");
    auto* t_batch = train_cmd->add_option("--batch", ta.batch, "batch size");
    auto* t_seed = train_cmd->add_option("--seed", ta.seed, "base seed");
    auto* t_k = train_cmd->add_option("--k", ta.k, "top-K evidence spans");
    auto* t_maxw = train_cmd->add_option("--max-width", ta.max_width, "max evidence span width");
    auto* t_aux = train_cmd->add_option("--aux-weight", ta.aux_weight, "auxiliary loss weight");
    auto* t_entropy = train_cmd->add_option("--entropy", ta.entropy, "point | bernoulli")
                          ->check(CLI::IsMember({"point", "bernoulli"}));
    auto* t_holdout = train_cmd->add_option("--holdout", ta.holdout, "validation fraction");
    auto* t_minf = train_cmd->add_option("--min-freq", ta.min_freq, "vocab min frequency");
    auto* t_d1 = train_cmd->add_option("--d1", ta.d1, "hidden dim");
    auto* t_de = train_cmd->add_option("--de", ta.de, "embedding dim");
    auto* t_d2 = train_cmd->add_option("--d2", ta.d2, "diagram feature dim");
    auto* t_ah = train_cmd->add_option("--attn-hidden", ta.attn_hidden, "attention scorer hidden dim");
    auto* t_eh = train_cmd->add_option("--ent-hidden", ta.ent_hidden, "entropy head hidden dim");
    auto* t_ch = train_cmd->add_option("--cls-hidden", ta.cls_hidden, "classifier hidden dim");
    auto* t_bh = train_cmd->add_option("--bilinear-hidden", ta.bilinear_hidden,
                                       "bilinear attention hidden dim (0 = d1)");
    auto* t_m = train_cmd->add_option("--m", ta.m, "retrieved paragraphs (0 = variant default)");
    auto* t_l = train_cmd->add_option("--l", ta.l, "max sentences per paragraph (0 = variant default)");
    auto* t_o = train_cmd->add_option("--o", ta.o, "max tokens per sentence (0 = variant default)");
    auto* t_x = train_cmd->add_option("--x", ta.x, "padded question length");
    auto* t_y = train_cmd->add_option("--y", ta.y, "padded answer length");
    auto* t_drop = train_cmd->add_option("--dropout", ta.dropout, "dropout probability");
    auto* t_noaux = train_cmd->add_flag("--no-aux", ta.no_aux, "disable the auxiliary entropy-head loss");
    auto* t_wide = train_cmd->add_flag("--wide-retrieval", ta.wide_retrieval,
                                       "retrieve across the whole corpus instead of the lesson");
    auto* t_emb = train_cmd->add_option("--embeddings", ta.embeddings, "pretrained embedding file");
    auto* t_wr = train_cmd->add_option("--warmup-rate", ta.warmup_rate, "lr warmup rate");
    auto* t_wd = train_cmd->add_option("--warmup-denom", ta.warmup_denom, "lr warmup denominator");
    auto* t_blr = train_cmd->add_option("--base-lr", ta.base_lr, "lr cap");
    auto* t_dec = train_cmd->add_option("--lr-decay", ta.lr_decay, "lr decay factor");
    auto* t_da = train_cmd->add_option("--decay-after", ta.decay_after, "decay after this epoch");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string e_config, e_checkpoint, e_corpus, e_features, e_split = "all", e_gold, e_out;
    auto* e_config_opt = eval_cmd->add_option("--config", e_config, "flat key=value config file");
    auto* e_ckpt_opt = eval_cmd->add_option("--checkpoint", e_checkpoint, "checkpoint directory");
    auto* e_corpus_opt = eval_cmd->add_option("--corpus", e_corpus, "corpus JSONL file");
    auto* e_features_opt = eval_cmd->add_option("--features", e_features, "diagram feature file");
    auto* e_split_opt = eval_cmd->add_option("--split", e_split, "train | val | all")
                            ->check(CLI::IsMember({"train", "val", "all"}));
    auto* e_gold_opt = eval_cmd->add_option("--gold-map", e_gold, "gold evidence map (enables hit rate)");
    auto* e_out_opt = eval_cmd->add_option("--out", e_out, "write metrics.json here");

    // ---- explain ----
    auto* explain_cmd = app.add_subcommand("explain", "emit evidence spans for questions");
    std::string x_config, x_checkpoint, x_corpus, x_features, x_question, x_out;
    auto* x_config_opt = explain_cmd->add_option("--config", x_config, "flat key=value config file");
    auto* x_ckpt_opt = explain_cmd->add_option("--checkpoint", x_checkpoint, "checkpoint directory");
    auto* x_corpus_opt = explain_cmd->add_option("--corpus", x_corpus, "corpus JSONL file");
    auto* x_features_opt = explain_cmd->add_option("--features", x_features, "diagram feature file");
    auto* x_question_opt = explain_cmd->add_option("--question", x_question, "single question id");
    auto* x_out_opt = explain_cmd->add_option("--out", x_out, "write JSONL of all explanations here");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            Binder binder;
            binder.load_file(sy_config);
            binder.resolve(sy_lessons, "lessons", sy.lessons);
            binder.resolve(sy_vocab, "vocab-size", sy.vocab_size);
            binder.resolve(sy_seed, "seed", sy.seed);
            binder.resolve(sy_paras, "paragraphs", sy.paragraphs);
            binder.resolve(sy_sents, "sentences", sy.sentences);
            binder.resolve(sy_opts, "options", sy.options);
            binder.resolve(sy_tf, "tf-fraction", sy.tf_fraction);
            binder.resolve(sy_diag, "diagram-fraction", sy.diagram_fraction);
            binder.resolve(sy_ddim, "diagram-dim", sy.diagram_dim);
            binder.resolve(sy_out_opt, "out", sy_out);
            SyntheticData data = generate_synthetic(sy);
            write_synthetic(data, sy_out);
            write_manifest(sy_out, "synth", binder);
            DatasetStats st = data.corpus.stats();
            json j;
            j["lessons"] = st.lessons;
            j["questions"] = st.questions;
            j["gold_spans"] = data.gold.size();
            j["out"] = sy_out;
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (ingest->parsed()) {
            Binder binder;
            binder.load_file(in_config);
            binder.resolve(in_corpus_opt, "corpus", in_corpus);
            binder.resolve(in_out_opt, "out", in_out);
            binder.resolve(in_minf, "min-freq", in_min_freq);
            Dataset ds = load_corpus(in_corpus, Split::Train);
            DatasetStats st = ds.stats();
            json j;
            j["lessons"] = st.lessons;
            j["paragraphs"] = st.paragraphs;
            j["sentences"] = st.sentences;
            j["questions"] = {{"total", st.questions},
                              {"tf", st.true_false},
                              {"mc", st.multiple_choice},
                              {"diagram", st.diagram}};
            std::cout << j.dump(2) << "\n";
            if (!in_out.empty()) {
                std::filesystem::create_directories(in_out);
                save_corpus(ds, std::filesystem::path(in_out) / "normalized.jsonl");
                Vocab v = build_vocab(ds, in_min_freq);
                json vj = json::object();
                for (std::size_t i = 0; i < v.id_to_token.size(); ++i)
                    vj[v.id_to_token[i]] = i;
                std::ofstream vout(std::filesystem::path(in_out) / "vocab.json",
                                   std::ios::binary);
                vout << vj.dump() << "\n";
                write_manifest(in_out, "ingest", binder);
            }
            return 0;
        }

        if (train_cmd->parsed()) {
            Binder binder;
            binder.load_file(ta.config_file);
            binder.resolve(t_corpus, "corpus", ta.corpus);
            binder.resolve(t_features, "features", ta.features);
            binder.resolve(t_out, "out", ta.out);
            binder.resolve(t_variant, "variant", ta.variant);
            binder.resolve(t_epochs, "epochs", ta.epochs);
            binder.resolve(t_batch, "batch", ta.batch);
            binder.resolve(t_seed, "seed", ta.seed);
            binder.resolve(t_k, "k", ta.k);
            binder.resolve(t_maxw, "max-width", ta.max_width);
            binder.resolve(t_aux, "aux-weight", ta.aux_weight);
            binder.resolve(t_entropy, "entropy", ta.entropy);
            binder.resolve(t_holdout, "holdout", ta.holdout);
            binder.resolve(t_minf, "min-freq", ta.min_freq);
            binder.resolve(t_d1, "d1", ta.d1);
            binder.resolve(t_de, "de", ta.de);
            binder.resolve(t_d2, "d2", ta.d2);
            binder.resolve(t_ah, "attn-hidden", ta.attn_hidden);
            binder.resolve(t_eh, "ent-hidden", ta.ent_hidden);
            binder.resolve(t_ch, "cls-hidden", ta.cls_hidden);
            binder.resolve(t_bh, "bilinear-hidden", ta.bilinear_hidden);
            binder.resolve(t_m, "m", ta.m);
            binder.resolve(t_l, "l", ta.l);
            binder.resolve(t_o, "o", ta.o);
            binder.resolve(t_x, "x", ta.x);
            binder.resolve(t_y, "y", ta.y);
            binder.resolve(t_drop, "dropout", ta.dropout);
            binder.resolve(t_noaux, "no-aux", ta.no_aux);
            binder.resolve(t_wide, "wide-retrieval", ta.wide_retrieval);
            binder.resolve(t_emb, "embeddings", ta.embeddings);
            binder.resolve(t_wr, "warmup-rate", ta.warmup_rate);
            binder.resolve(t_wd, "warmup-denom", ta.warmup_denom);
            binder.resolve(t_blr, "base-lr", ta.base_lr);
            binder.resolve(t_dec, "lr-decay", ta.lr_decay);
            binder.resolve(t_da, "decay-after", ta.decay_after);
            if (ta.corpus.empty()) throw UsageError("train requires --corpus");
            if (ta.out.empty()) throw UsageError("train requires --out");
            return run_train(ta, binder);
        }

        if (eval_cmd->parsed()) {
            Binder binder;
            binder.load_file(e_config);
            binder.resolve(e_ckpt_opt, "checkpoint", e_checkpoint);
            binder.resolve(e_corpus_opt, "corpus", e_corpus);
            binder.resolve(e_features_opt, "features", e_features);
            binder.resolve(e_split_opt, "split", e_split);
            binder.resolve(e_gold_opt, "gold-map", e_gold);
            binder.resolve(e_out_opt, "out", e_out);
            if (e_checkpoint.empty()) throw UsageError("eval requires --checkpoint");
            if (e_corpus.empty()) throw UsageError("eval requires --corpus");

            LoadedCheckpoint ckpt = load_checkpoint(e_checkpoint);
            Dataset ds = load_corpus(e_corpus, Split::Val);
            std::optional<DiagramFeatureStore> features;
            if (!e_features.empty()) features = load_diagram_features(e_features);
            EvalOptions opts;
            opts.split = e_split;
            if (!e_gold.empty()) opts.gold = load_gold_map(e_gold);
            EvalOutcome out =
                evaluate(ckpt, ds, opts, features ? &*features : nullptr);
            json mj = out.metrics.to_json();
            std::cout << mj.dump(2) << "\n";
            if (!e_out.empty()) {
                std::filesystem::create_directories(e_out);
                std::ofstream mout(std::filesystem::path(e_out) / "metrics.json",
                                   std::ios::binary);
                mout << mj.dump(2) << "\n";
                write_manifest(e_out, "eval", binder);
            }
            return 0;
        }

        if (explain_cmd->parsed()) {
            Binder binder;
            binder.load_file(x_config);
            binder.resolve(x_ckpt_opt, "checkpoint", x_checkpoint);
            binder.resolve(x_corpus_opt, "corpus", x_corpus);
            binder.resolve(x_features_opt, "features", x_features);
            binder.resolve(x_question_opt, "question", x_question);
            binder.resolve(x_out_opt, "out", x_out);
            if (x_checkpoint.empty()) throw UsageError("explain requires --checkpoint");
            if (x_corpus.empty()) throw UsageError("explain requires --corpus");

            LoadedCheckpoint ckpt = load_checkpoint(x_checkpoint);
            Dataset ds = load_corpus(x_corpus, Split::Val);
            std::optional<DiagramFeatureStore> features;
            if (!x_features.empty()) features = load_diagram_features(x_features);
            EvalOptions opts;
            opts.split = "all";
            EvalOutcome out = evaluate(ckpt, ds, opts, features ? &*features : nullptr);

            if (!x_question.empty()) {
                for (const Explanation& ex : out.explanations)
                    if (ex.question_id == x_question) {
                        std::cout << ex.to_json().dump(2) << "\n";
                        return 0;
                    }
                throw DataError("question \"" + x_question + "\" not found in corpus");
            }
            if (!x_out.empty()) {
                std::ofstream xout(x_out, std::ios::binary);
                if (!xout) throw DataError("cannot write " + x_out);
                for (const Explanation& ex : out.explanations) xout << ex.to_json().dump() << "\n";
            } else {
                for (const Explanation& ex : out.explanations)
                    std::cout << ex.to_json().dump() << "\n";
            }
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace xtqa
