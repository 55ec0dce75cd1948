#include "xtqa/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <deque>
#include <fstream>
#include <set>

#include <json.hpp>

#include "xtqa/errors.hpp"
#include "xtqa/rng.hpp"

namespace xtqa {

using nlohmann::json;

namespace {

std::vector<std::string> make_pool(const char* prefix, std::size_t n) {
    std::vector<std::string> pool(n);
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, i);
        pool[i] = buf;
    }
    return pool;
}

// Endless deterministic walk over a pool; each refill is a fresh seeded
// permutation so every token keeps appearing.
class PoolCycler {
public:
    PoolCycler(std::vector<std::string> pool, Rng& rng) : pool_(std::move(pool)), rng_(rng) {}

    std::string next() {
        if (queue_.empty()) refill();
        std::string tok = queue_.front();
        queue_.pop_front();
        return tok;
    }

    // next token not in `used`
    std::string next_excluding(const std::set<std::string>& used) {
        for (std::size_t tries = 0; tries < pool_.size() + queue_.size() + 2; ++tries) {
            std::string tok = next();
            if (!used.count(tok)) return tok;
            queue_.push_back(tok);
        }
        throw DataError("token pool too small for exclusion set");
    }

private:
    void refill() {
        std::vector<std::string> perm = pool_;
        rng_.shuffle(perm);
        queue_.assign(perm.begin(), perm.end());
    }

    std::vector<std::string> pool_;
    Rng& rng_;
    std::deque<std::string> queue_;
};

std::string render_sentence(std::vector<std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += " ";
        out += tokens[i];
    }
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out + ".";
}

std::vector<float> feature_for_token(std::uint64_t seed, const std::string& token,
                                     std::size_t dim) {
    Rng r = derive_stream(seed, "diagram-feature:" + token);
    std::vector<float> v(dim);
    for (float& x : v) x = static_cast<float>(r.uniform(-1.0, 1.0));
    return v;
}

}  // namespace

SyntheticData generate_synthetic(const SynthConfig& cfg) {
    if (cfg.lessons < 1) throw DataError("synthetic generator needs at least one lesson");
    if (cfg.vocab_size < 20) throw DataError("synthetic vocab size must be >= 20");
    if (cfg.options < 2 || cfg.options > 7)
        throw DataError("synthetic option count must be in [2, 7]");

    const std::size_t n_topic = cfg.vocab_size / 4;
    const std::size_t n_answer = cfg.vocab_size / 4;
    const std::size_t n_filler = cfg.vocab_size * 7 / 20;
    const std::size_t n_qword =
        cfg.vocab_size - n_topic - n_answer - n_filler;  // >= 3 for vocab_size >= 20

    std::vector<std::string> topics = make_pool("t", n_topic);
    std::vector<std::string> answers = make_pool("x", n_answer);
    std::vector<std::string> fillers = make_pool("f", n_filler);
    std::vector<std::string> qwords = make_pool("q", n_qword);

    Rng rng = derive_stream(cfg.seed, "synth");
    PoolCycler topic_cycle(topics, rng);
    PoolCycler answer_cycle(answers, rng);

    SyntheticData data;
    data.corpus.split = Split::Train;
    DiagramFeatureStore features;
    features.dim = static_cast<std::uint32_t>(cfg.diagram_dim);
    bool any_diagram = false;

    char buf[64];
    for (std::size_t li = 0; li < cfg.lessons; ++li) {
        Lesson lesson;
        std::snprintf(buf, sizeof(buf), "L%04zu", li + 1);
        lesson.lesson_id = buf;
        lesson.title = "synthetic lesson " + std::to_string(li + 1);

        std::set<std::string> lesson_answers;
        std::vector<std::string> topic_of(cfg.paragraphs), answer_of(cfg.paragraphs);
        std::vector<std::size_t> gold_sentence(cfg.paragraphs);
        std::set<std::string> lesson_topics;

        for (std::size_t pi = 0; pi < cfg.paragraphs; ++pi) {
            topic_of[pi] = topic_cycle.next_excluding(lesson_topics);
            lesson_topics.insert(topic_of[pi]);
            answer_of[pi] = answer_cycle.next_excluding(lesson_answers);
            lesson_answers.insert(answer_of[pi]);
            gold_sentence[pi] = static_cast<std::size_t>(rng.below(cfg.sentences));
        }

        for (std::size_t pi = 0; pi < cfg.paragraphs; ++pi) {
            Paragraph para;
            std::snprintf(buf, sizeof(buf), "%s-P%zu", lesson.lesson_id.c_str(), pi + 1);
            para.paragraph_id = buf;
            for (std::size_t si = 0; si < cfg.sentences; ++si) {
                std::vector<std::string> toks;
                if (si == gold_sentence[pi]) {
                    toks = {topic_of[pi], answer_of[pi], fillers[rng.below(fillers.size())],
                            fillers[rng.below(fillers.size())]};
                    rng.shuffle(toks);
                } else {
                    std::size_t len = 3 + rng.below(3);
                    for (std::size_t k = 0; k < len; ++k)
                        toks.push_back(fillers[rng.below(fillers.size())]);
                }
                para.sentences.push_back(render_sentence(std::move(toks)));
            }
            lesson.paragraphs.push_back(std::move(para));
        }

        std::size_t q_counter = 0;
        for (std::size_t pi = 0; pi < cfg.paragraphs; ++pi) {
            Question q;
            std::snprintf(buf, sizeof(buf), "%s-Q%zu", lesson.lesson_id.c_str(), ++q_counter);
            q.question_id = buf;
            q.kind = QuestionKind::MultipleChoice;
            // qwords[0] is reserved as the T/F marker word
            std::string qa = qwords[1 + rng.below(qwords.size() - 1)];
            std::string qb = qwords[1 + rng.below(qwords.size() - 1)];
            q.text = qa + " " + topic_of[pi] + " " + qb + "?";

            std::vector<std::string> opts = {answer_of[pi]};
            std::set<std::string> used = lesson_answers;
            while (opts.size() < cfg.options) {
                std::string d = answers[rng.below(answers.size())];
                if (used.count(d)) continue;
                used.insert(d);
                opts.push_back(d);
            }
            rng.shuffle(opts);
            for (std::size_t j = 0; j < opts.size(); ++j) {
                std::string label(1, static_cast<char>('a' + j));
                q.options.push_back({label, opts[j]});
                if (opts[j] == answer_of[pi]) q.gold_label = label;
            }

            if (cfg.diagram_fraction > 0.0 && rng.uniform() < cfg.diagram_fraction &&
                cfg.options == 4) {
                q.kind = QuestionKind::Diagram;
                q.diagram_id = "D-" + q.question_id;
                features.features[q.diagram_id] =
                    feature_for_token(cfg.seed, answer_of[pi], cfg.diagram_dim);
                any_diagram = true;
            }

            data.gold[q.question_id] = {lesson.paragraphs[pi].paragraph_id,
                                        gold_sentence[pi] + 1};
            lesson.questions.push_back(std::move(q));
        }

        if (rng.uniform() < cfg.tf_fraction) {
            std::size_t pi = static_cast<std::size_t>(rng.below(cfg.paragraphs));
            bool truth = rng.uniform() < 0.5;
            std::string stated =
                truth ? answer_of[pi] : [&] {
                    std::string d;
                    do {
                        d = answers[rng.below(answers.size())];
                    } while (lesson_answers.count(d));
                    return d;
                }();
            Question q;
            std::snprintf(buf, sizeof(buf), "%s-Q%zu", lesson.lesson_id.c_str(), ++q_counter);
            q.question_id = buf;
            q.kind = QuestionKind::TrueFalse;
            q.text = qwords[0] + " " + topic_of[pi] + " " + stated + "?";
            q.options = {{"a", "true"}, {"b", "false"}};
            q.gold_label = truth ? "a" : "b";
            data.gold[q.question_id] = {lesson.paragraphs[pi].paragraph_id,
                                        gold_sentence[pi] + 1};
            lesson.questions.push_back(std::move(q));
        }

        data.corpus.lessons.push_back(std::move(lesson));
    }

    if (any_diagram) data.features = std::move(features);
    return data;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_corpus(data.corpus, dir / "corpus.jsonl");

    json gj = json::object();
    for (const auto& [qid, ev] : data.gold)
        gj[qid] = {{"paragraph_id", ev.paragraph_id}, {"sentence", ev.sentence}};
    std::ofstream out(dir / "gold_evidence.json", std::ios::binary);
    if (!out) throw DataError("cannot write gold evidence map");
    out << gj.dump(2) << "\n";

    if (data.features) save_diagram_features(*data.features, dir / "features.bin");
}

std::map<std::string, GoldEvidence> load_gold_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open gold evidence map " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("bad gold evidence map: " + std::string(e.what()));
    }
    std::map<std::string, GoldEvidence> gold;
    for (auto& [qid, ev] : j.items())
        gold[qid] = {ev.at("paragraph_id").get<std::string>(), ev.at("sentence").get<std::size_t>()};
    return gold;
}

}  // namespace xtqa
