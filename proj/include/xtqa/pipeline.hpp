#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xtqa/checkpoint.hpp"
#include "xtqa/corpus.hpp"
#include "xtqa/metrics.hpp"
#include "xtqa/model.hpp"
#include "xtqa/synthetic.hpp"

namespace xtqa {

struct TrainConfig {
    int epochs = 10;
    int batch = 2;
    std::uint64_t seed = 1;
    double aux_weight = 0.5;
    double holdout = 0.2;  // fraction of questions held out for validation
    int min_freq = 1;
    LrSchedule schedule;
    ModelConfig model = ModelConfig::defaults(Variant::NonDiagram);
    std::filesystem::path corpus_path;
    std::filesystem::path features_path;  // required for the diagram variant
    std::filesystem::path out_dir;
};

struct EpochReport {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    MetricsReport val;
};

struct TrainOutcome {
    std::filesystem::path best_checkpoint;
    std::vector<EpochReport> epochs;
    MetricsReport best_val;
    int best_epoch = 0;
};

// All model inputs for a corpus, resolved once and reused across epochs.
struct PreparedCorpus {
    Dataset dataset;
    Vocab vocab;
    std::vector<PreparedQuestion> questions;           // one per dataset question
    std::vector<std::size_t> train_idx, val_idx;        // indices into questions
};

// Deterministic question-level holdout: sorted ids, seeded shuffle, first
// floor(n * fraction) go to validation.
void split_holdout(const Dataset& ds, double fraction, std::uint64_t seed,
                   std::vector<std::string>& train_ids, std::vector<std::string>& val_ids);

PreparedCorpus prepare_corpus(const Dataset& ds, const Vocab& vocab, const ModelConfig& cfg,
                              const DiagramFeatureStore* features);

TrainOutcome train(const TrainConfig& cfg);

struct EvalOptions {
    std::string split = "all";  // train | val | all (train/val need the checkpoint's split record)
    std::optional<std::map<std::string, GoldEvidence>> gold;  // enables evidence_hit_rate
    int threads = 0;            // 0 = hardware default, capped by XTQA_THREADS
};

struct Explanation {
    std::string question_id;
    std::string predicted_label;
    bool correct = false;
    std::vector<SpanReport> evidence;
    nlohmann::json to_json() const;
};

struct EvalOutcome {
    MetricsReport metrics;
    std::vector<Explanation> explanations;  // dataset order
};

EvalOutcome evaluate(LoadedCheckpoint& ckpt, const Dataset& ds, const EvalOptions& opts,
                     const DiagramFeatureStore* features);

// Hit iff the top span's paragraph matches and [start, end] contains the gold
// sentence; rate over correctly answered questions only.
double evidence_hit_rate(const std::vector<Explanation>& explanations,
                         const std::map<std::string, GoldEvidence>& gold,
                         std::size_t* hits_out = nullptr, std::size_t* total_out = nullptr);

int thread_budget(int requested);

}  // namespace xtqa
