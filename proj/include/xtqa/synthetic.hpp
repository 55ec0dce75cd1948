#pragma once

#include <filesystem>
#include <map>
#include <optional>

#include "xtqa/corpus.hpp"

namespace xtqa {

// Seeded generator for desk-scale end-to-end runs. Every question's correct
// answer token is planted verbatim in exactly one sentence of its lesson
// (the gold evidence); each question's topic token appears only in that
// sentence, so coarse retrieval has a unique right answer; distractor
// options are answer tokens planted in other lessons only.
struct SynthConfig {
    std::size_t lessons = 200;
    std::size_t vocab_size = 500;  // >= 20
    std::uint64_t seed = 1;
    std::size_t paragraphs = 3;   // per lesson, one question each
    std::size_t sentences = 5;    // per paragraph
    std::size_t options = 4;      // per MC / diagram question
    double tf_fraction = 0.5;     // chance a lesson gets one extra T/F question
    double diagram_fraction = 0.0;  // chance an MC question becomes a diagram question
    std::size_t diagram_dim = 16;
};

struct GoldEvidence {
    std::string paragraph_id;
    std::size_t sentence = 1;  // 1-based
};

struct SyntheticData {
    Dataset corpus;
    std::map<std::string, GoldEvidence> gold;  // question_id -> planted evidence
    std::optional<DiagramFeatureStore> features;
};

SyntheticData generate_synthetic(const SynthConfig& config);

// corpus.jsonl + gold_evidence.json (+ features.bin when diagrams exist)
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

std::map<std::string, GoldEvidence> load_gold_map(const std::filesystem::path& path);

}  // namespace xtqa
