#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace xtqa {

enum class QuestionKind { TrueFalse, MultipleChoice, Diagram };
enum class Split { Train, Val, Test };

std::string kind_to_string(QuestionKind k);
QuestionKind kind_from_string(const std::string& s);

struct AnswerOption {
    std::string label;  // single lowercase letter, consecutive from "a"
    std::string text;
    bool operator==(const AnswerOption&) const = default;
};

struct Question {
    std::string question_id;
    QuestionKind kind = QuestionKind::MultipleChoice;
    std::string text;
    std::vector<AnswerOption> options;
    std::string gold_label;
    std::string diagram_id;  // non-empty iff kind == Diagram

    int gold_index() const;
    bool operator==(const Question&) const = default;
};

struct Paragraph {
    std::string paragraph_id;
    std::vector<std::string> sentences;  // pre-segmented, non-empty after trim
    bool operator==(const Paragraph&) const = default;
};

struct Lesson {
    std::string lesson_id;
    std::string title;
    std::vector<Paragraph> paragraphs;
    std::vector<Question> questions;
    bool operator==(const Lesson&) const = default;
};

struct DatasetStats {
    std::size_t lessons = 0;
    std::size_t paragraphs = 0;
    std::size_t sentences = 0;
    std::size_t questions = 0;
    std::size_t true_false = 0;
    std::size_t multiple_choice = 0;
    std::size_t diagram = 0;
};

struct QuestionRef {
    std::size_t lesson_idx = 0;
    std::size_t question_idx = 0;
};

struct Dataset {
    Split split = Split::Train;
    std::vector<Lesson> lessons;

    DatasetStats stats() const;
    std::vector<QuestionRef> question_refs() const;
    const Question& question(const QuestionRef& r) const {
        return lessons[r.lesson_idx].questions[r.question_idx];
    }
    bool operator==(const Dataset& other) const { return lessons == other.lessons; }
};

// Lowercase, split on maximal runs of non-alphanumeric bytes, drop empties.
std::vector<std::string> tokenize(std::string_view text);

// Token ids. 0 = padding, 1 = unknown; real tokens start at 2 ordered by
// descending corpus frequency, ties broken lexicographically.
struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    std::vector<std::string> id_to_token;  // [0]="<pad>", [1]="<unk>"
    std::unordered_map<std::string, int> token_to_id;

    Vocab();
    int lookup(const std::string& token) const;
    std::size_t size() const { return id_to_token.size(); }
    std::uint64_t hash() const;
};

Vocab build_vocab(const Dataset& train, int min_freq);
// Vocab over an explicit token-frequency source; used when the training
// questions are a subset of the corpus file (holdout splits).
Vocab build_vocab_from_texts(const std::vector<std::string>& texts, int min_freq);

Dataset load_corpus(const std::filesystem::path& path, Split split);
void save_corpus(const Dataset& dataset, const std::filesystem::path& path);
std::string lesson_to_json_line(const Lesson& lesson);

// Externally computed per-diagram feature vectors (file format: see README).
struct DiagramFeatureStore {
    std::uint32_t dim = 0;
    std::unordered_map<std::string, std::vector<float>> features;

    const std::vector<float>& lookup(const std::string& diagram_id) const;
};

DiagramFeatureStore load_diagram_features(const std::filesystem::path& path);
void save_diagram_features(const DiagramFeatureStore& store, const std::filesystem::path& path);

}  // namespace xtqa
