#include "xtqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include "xtqa/errors.hpp"
#include "xtqa/text_index.hpp"

namespace xtqa {

using nlohmann::json;

int thread_budget(int requested) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int n = requested > 0 ? requested : hw;
    if (const char* cap = std::getenv("XTQA_THREADS")) {
        int c = std::atoi(cap);
        if (c > 0) n = std::min(n, c);
    }
    return std::max(1, n);
}

void split_holdout(const Dataset& ds, double fraction, std::uint64_t seed,
                   std::vector<std::string>& train_ids, std::vector<std::string>& val_ids) {
    std::vector<std::string> ids;
    for (const Lesson& l : ds.lessons)
        for (const Question& q : l.questions) ids.push_back(q.question_id);
    std::sort(ids.begin(), ids.end());
    Rng rng = derive_stream(seed, "split");
    rng.shuffle(ids);
    std::size_t n_val = static_cast<std::size_t>(static_cast<double>(ids.size()) * fraction);
    val_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
    std::sort(train_ids.begin(), train_ids.end());
    std::sort(val_ids.begin(), val_ids.end());
}

namespace {

std::vector<int> pad_tokens(const std::vector<std::string>& toks, const Vocab& vocab,
                            std::size_t width, std::size_t& len_out) {
    std::vector<int> ids(width, Vocab::kPad);
    len_out = std::min(width, toks.size());
    for (std::size_t i = 0; i < len_out; ++i) ids[i] = vocab.lookup(toks[i]);
    return ids;
}

}  // namespace

PreparedCorpus prepare_corpus(const Dataset& ds, const Vocab& vocab, const ModelConfig& cfg,
                              const DiagramFeatureStore* features) {
    PreparedCorpus pc;
    pc.dataset = ds;
    pc.vocab = vocab;

    // corpus-wide index when wide retrieval is on, one per lesson otherwise
    std::vector<IndexedParagraph> global_paragraphs;
    if (cfg.wide_retrieval) {
        for (std::size_t li = 0; li < ds.lessons.size(); ++li)
            for (std::size_t pi = 0; pi < ds.lessons[li].paragraphs.size(); ++pi) {
                std::string text;
                for (const std::string& s : ds.lessons[li].paragraphs[pi].sentences) {
                    if (!text.empty()) text += " ";
                    text += s;
                }
                global_paragraphs.push_back({li, pi, std::move(text)});
            }
    }
    std::optional<TfIdfIndex> global_index;
    if (cfg.wide_retrieval) global_index.emplace(global_paragraphs);

    for (std::size_t li = 0; li < ds.lessons.size(); ++li) {
        const Lesson& lesson = ds.lessons[li];

        std::vector<IndexedParagraph> lesson_paragraphs;
        std::optional<TfIdfIndex> lesson_index;
        if (!cfg.wide_retrieval) {
            for (std::size_t pi = 0; pi < lesson.paragraphs.size(); ++pi) {
                std::string text;
                for (const std::string& s : lesson.paragraphs[pi].sentences) {
                    if (!text.empty()) text += " ";
                    text += s;
                }
                lesson_paragraphs.push_back({li, pi, std::move(text)});
            }
            lesson_index.emplace(lesson_paragraphs);
        }
        const TfIdfIndex& index = cfg.wide_retrieval ? *global_index : *lesson_index;
        const std::vector<IndexedParagraph>& paragraphs =
            cfg.wide_retrieval ? global_paragraphs : lesson_paragraphs;

        for (const Question& q : lesson.questions) {
            PreparedQuestion pq;
            pq.question_id = q.question_id;
            pq.kind = q.kind;
            pq.q_ids = pad_tokens(tokenize(q.text), vocab, cfg.X, pq.q_len);
            for (const AnswerOption& opt : q.options) {
                std::size_t len = 0;
                pq.opt_ids.push_back(pad_tokens(tokenize(opt.text), vocab, cfg.Y, len));
                pq.opt_len.push_back(len);
            }
            pq.gold = q.gold_index();

            TfIdfIndex::Ranked ranked = index.top_m(q.text, cfg.M);
            pq.retrieval_fallback = ranked.fallback;
            pq.paragraphs = truncate_paragraphs(ranked, paragraphs, ds, vocab, cfg.L, cfg.O);
            for (const auto& entry : ranked.entries) {
                const IndexedParagraph& ip = paragraphs[entry.doc];
                const Paragraph& para = ds.lessons[ip.lesson_idx].paragraphs[ip.paragraph_idx];
                pq.paragraph_ids.push_back(para.paragraph_id);
                std::vector<std::string> sents(
                    para.sentences.begin(),
                    para.sentences.begin() +
                        static_cast<std::ptrdiff_t>(std::min(cfg.L, para.sentences.size())));
                pq.sentences.push_back(std::move(sents));
            }

            if (q.kind == QuestionKind::Diagram) {
                if (!features)
                    throw DataError("question " + q.question_id +
                                    " needs diagram features but none were loaded");
                const std::vector<float>& f = features->lookup(q.diagram_id);
                pq.diagram_feature.assign(f.begin(), f.end());
            }
            pc.questions.push_back(std::move(pq));
        }
    }
    return pc;
}

namespace {

void tally(MetricsReport& report, QuestionKind kind, bool correct) {
    switch (kind) {
        case QuestionKind::TrueFalse:
            ++report.tf_total;
            report.tf_correct += correct;
            break;
        case QuestionKind::MultipleChoice:
            ++report.mc_total;
            report.mc_correct += correct;
            break;
        case QuestionKind::Diagram:
            ++report.diagram_total;
            report.diagram_correct += correct;
            break;
    }
}

// Evaluate a set of prepared questions; deterministic regardless of the
// thread count (results land by index, dropout is off).
struct EvalRun {
    MetricsReport metrics;
    std::vector<Explanation> explanations;
    std::vector<bool> correct;
};

EvalRun run_eval(XtqaModel& model, const PreparedCorpus& pc, const std::vector<std::size_t>& idx,
                 int threads) {
    EvalRun run;
    run.explanations.resize(idx.size());
    run.correct.assign(idx.size(), false);

    int n_threads = std::min<std::size_t>(thread_budget(threads), std::max<std::size_t>(idx.size(), 1));
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> workers;
    auto work = [&]() {
        ForwardCtx ctx;  // eval mode: no dropout
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= idx.size()) break;
            const PreparedQuestion& pq = pc.questions[idx[i]];
            Tape tape;
            ForwardResult r = forward_question(tape, model, pq, ctx, false, 0.0);
            Explanation ex;
            ex.question_id = pq.question_id;
            ex.predicted_label = std::string(1, static_cast<char>('a' + r.predicted));
            ex.correct = r.predicted == pq.gold;
            ex.evidence = r.evidence;
            run.explanations[i] = std::move(ex);
            run.correct[i] = r.predicted == pq.gold;
        }
    };
    if (n_threads == 1) {
        work();
    } else {
        for (int w = 0; w < n_threads; ++w) workers.emplace_back(work);
        for (auto& t : workers) t.join();
    }

    for (std::size_t i = 0; i < idx.size(); ++i)
        tally(run.metrics, pc.questions[idx[i]].kind, run.correct[i]);
    return run;
}

json split_record(const std::vector<std::string>& train_ids,
                  const std::vector<std::string>& val_ids, double fraction,
                  std::uint64_t seed) {
    json j;
    j["holdout_fraction"] = fraction;
    j["seed"] = seed;
    j["train_ids"] = train_ids;
    j["val_ids"] = val_ids;
    return j;
}

}  // namespace

TrainOutcome train(const TrainConfig& cfg) {
    Dataset ds = load_corpus(cfg.corpus_path, Split::Train);

    std::optional<DiagramFeatureStore> features;
    if (cfg.model.variant == Variant::Diagram) {
        if (cfg.features_path.empty())
            throw DataError("diagram variant requires a feature file");
        features = load_diagram_features(cfg.features_path);
    }

    std::vector<std::string> train_ids, val_ids;
    split_holdout(ds, cfg.holdout, cfg.seed, train_ids, val_ids);
    if (train_ids.empty()) throw DataError("no training questions");
    std::set<std::string> val_set(val_ids.begin(), val_ids.end());

    // vocab from the training split only: all lesson text plus train questions
    std::vector<std::string> vocab_texts;
    for (const Lesson& l : ds.lessons) {
        for (const Paragraph& p : l.paragraphs)
            for (const std::string& s : p.sentences) vocab_texts.push_back(s);
        for (const Question& q : l.questions) {
            if (val_set.count(q.question_id)) continue;
            vocab_texts.push_back(q.text);
            for (const AnswerOption& o : q.options) vocab_texts.push_back(o.text);
        }
    }
    Vocab vocab = build_vocab_from_texts(vocab_texts, cfg.min_freq);

    ModelConfig mc = cfg.model;
    if (features) mc.d2 = features->dim;
    XtqaModel model(mc, vocab.size(), cfg.seed);
    if (!mc.embeddings_path.empty())
        model.load_pretrained_embeddings(mc.embeddings_path, vocab);

    PreparedCorpus pc = prepare_corpus(ds, vocab, mc, features ? &*features : nullptr);

    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < pc.questions.size(); ++i) {
        if (val_set.count(pc.questions[i].question_id))
            val_idx.push_back(i);
        else
            train_idx.push_back(i);
    }
    pc.train_idx = train_idx;
    pc.val_idx = val_idx;

    AdamState adam;
    adam.init(model.params);
    Rng shuffle_rng = derive_stream(cfg.seed, "shuffle");
    Rng dropout_rng = derive_stream(cfg.seed, "dropout");
    ForwardCtx train_ctx{true, &dropout_rng};

    json split_json = split_record(train_ids, val_ids, cfg.holdout, cfg.seed);

    TrainOutcome outcome;
    outcome.best_epoch = 0;
    double best_acc = -1.0;
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream metrics_log(cfg.out_dir / "metrics.jsonl", std::ios::binary);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double lr = cfg.schedule.lr(epoch);
        shuffle_rng.shuffle(train_idx);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            std::size_t stop =
                std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch));
            for (std::size_t i = start; i < stop; ++i) {
                const PreparedQuestion& pq = pc.questions[train_idx[i]];
                Tape tape;
                ForwardResult r = forward_question(tape, model, pq, train_ctx, true,
                                                   cfg.aux_weight);
                loss_sum += r.loss_value;
                ++seen;
                tape.backward(r.loss);
            }
            // average the batch gradient, then one Adam step
            model.params.scale_grads(1.0 / static_cast<double>(stop - start));
            adam_step(model.params, adam, lr);
        }

        EvalRun val_run = run_eval(model, pc, val_idx, 0);

        EpochReport er;
        er.epoch = epoch;
        er.lr = lr;
        er.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        er.val = val_run.metrics;
        outcome.epochs.push_back(er);

        json extra;
        extra["epoch"] = epoch;
        extra["seeds"] = {{"base", cfg.seed}};
        extra["split"] = split_json;
        extra["train"] = {{"epochs", cfg.epochs},
                          {"batch", cfg.batch},
                          {"aux_weight", cfg.aux_weight},
                          {"min_freq", cfg.min_freq}};
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%02d", epoch);
        save_checkpoint(cfg.out_dir / name, model, vocab, extra);

        json line;
        line["epoch"] = epoch;
        line["lr"] = lr;
        line["train_loss"] = er.train_loss;
        line["val"] = er.val.to_json();
        metrics_log << line.dump() << "\n";
        metrics_log.flush();

        double acc = val_idx.empty() ? 0.0 : val_run.metrics.all_acc();
        if (acc > best_acc || (val_idx.empty() && epoch == cfg.epochs)) {
            best_acc = acc;
            outcome.best_epoch = epoch;
            outcome.best_val = val_run.metrics;
            save_checkpoint(cfg.out_dir / "best", model, vocab, extra);
        }
        if (!model.params.values_finite())
            throw NumericalError("non-finite parameter after epoch " + std::to_string(epoch));
    }
    outcome.best_checkpoint = cfg.out_dir / "best";
    return outcome;
}

json Explanation::to_json() const {
    json j;
    j["question_id"] = question_id;
    j["predicted_label"] = predicted_label;
    json spans = json::array();
    for (const SpanReport& s : evidence) {
        spans.push_back({{"paragraph_id", s.paragraph_id},
                         {"start", s.start},
                         {"end", s.end},
                         {"gain", s.gain},
                         {"text", s.text}});
    }
    j["evidence"] = std::move(spans);
    return j;
}

EvalOutcome evaluate(LoadedCheckpoint& ckpt, const Dataset& ds, const EvalOptions& opts,
                     const DiagramFeatureStore* features) {
    PreparedCorpus pc = prepare_corpus(ds, ckpt.vocab, ckpt.config, features);

    std::vector<std::size_t> idx;
    if (opts.split == "all") {
        idx.resize(pc.questions.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    } else {
        if (!ckpt.manifest.contains("split"))
            throw DataError("checkpoint has no split record; use --split all");
        const json& sj = ckpt.manifest["split"];
        std::set<std::string> wanted;
        const char* key = opts.split == "val" ? "val_ids" : "train_ids";
        for (const auto& id : sj.at(key)) wanted.insert(id.get<std::string>());
        for (std::size_t i = 0; i < pc.questions.size(); ++i)
            if (wanted.count(pc.questions[i].question_id)) idx.push_back(i);
    }
    if (idx.empty()) throw DataError("empty split");

    EvalRun run = run_eval(*ckpt.model, pc, idx, opts.threads);

    EvalOutcome out;
    out.metrics = run.metrics;
    out.explanations = std::move(run.explanations);
    if (opts.gold) {
        std::size_t hits = 0, total = 0;
        evidence_hit_rate(out.explanations, *opts.gold, &hits, &total);
        out.metrics.evidence = {{hits, total}};
    }
    return out;
}

double evidence_hit_rate(const std::vector<Explanation>& explanations,
                         const std::map<std::string, GoldEvidence>& gold, std::size_t* hits_out,
                         std::size_t* total_out) {
    std::size_t hits = 0, total = 0;
    for (const Explanation& ex : explanations) {
        if (!ex.correct) continue;
        auto it = gold.find(ex.question_id);
        if (it == gold.end())
            throw DataError("question " + ex.question_id + " missing from gold evidence map");
        ++total;
        if (ex.evidence.empty()) continue;
        const SpanReport& top = ex.evidence.front();
        if (top.paragraph_id == it->second.paragraph_id && top.start <= it->second.sentence &&
            it->second.sentence <= top.end)
            ++hits;
    }
    if (hits_out) *hits_out = hits;
    if (total_out) *total_out = total;
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace xtqa
