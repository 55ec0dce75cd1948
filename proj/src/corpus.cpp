#include "xtqa/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xtqa/errors.hpp"
#include "xtqa/rng.hpp"

namespace xtqa {

using nlohmann::json;

std::string kind_to_string(QuestionKind k) {
    switch (k) {
        case QuestionKind::TrueFalse: return "tf";
        case QuestionKind::MultipleChoice: return "mc";
        case QuestionKind::Diagram: return "diagram";
    }
    return "mc";
}

QuestionKind kind_from_string(const std::string& s) {
    if (s == "tf") return QuestionKind::TrueFalse;
    if (s == "mc") return QuestionKind::MultipleChoice;
    if (s == "diagram") return QuestionKind::Diagram;
    throw DataError("unknown question kind \"" + s + "\"");
}

int Question::gold_index() const {
    for (std::size_t j = 0; j < options.size(); ++j)
        if (options[j].label == gold_label) return static_cast<int>(j);
    return -1;
}

DatasetStats Dataset::stats() const {
    DatasetStats s;
    s.lessons = lessons.size();
    for (const Lesson& l : lessons) {
        s.paragraphs += l.paragraphs.size();
        for (const Paragraph& p : l.paragraphs) s.sentences += p.sentences.size();
        for (const Question& q : l.questions) {
            ++s.questions;
            switch (q.kind) {
                case QuestionKind::TrueFalse: ++s.true_false; break;
                case QuestionKind::MultipleChoice: ++s.multiple_choice; break;
                case QuestionKind::Diagram: ++s.diagram; break;
            }
        }
    }
    return s;
}

std::vector<QuestionRef> Dataset::question_refs() const {
    std::vector<QuestionRef> refs;
    for (std::size_t li = 0; li < lessons.size(); ++li)
        for (std::size_t qi = 0; qi < lessons[li].questions.size(); ++qi)
            refs.push_back({li, qi});
    return refs;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocab::Vocab() : id_to_token{"<pad>", "<unk>"} {
    token_to_id["<pad>"] = kPad;
    token_to_id["<unk>"] = kUnk;
}

int Vocab::lookup(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

std::uint64_t Vocab::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < id_to_token.size(); ++i) {
        std::string entry = id_to_token[i] + "\t" + std::to_string(i) + "\n";
        for (unsigned char c : entry) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

Vocab build_vocab_from_texts(const std::vector<std::string>& texts, int min_freq) {
    std::unordered_map<std::string, std::size_t> freq;
    for (const std::string& t : texts)
        for (std::string& tok : tokenize(t)) ++freq[tok];

    std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab v;
    for (auto& [tok, n] : items) {
        if (n < static_cast<std::size_t>(min_freq)) continue;
        v.token_to_id[tok] = static_cast<int>(v.id_to_token.size());
        v.id_to_token.push_back(tok);
    }
    return v;
}

Vocab build_vocab(const Dataset& train, int min_freq) {
    std::vector<std::string> texts;
    for (const Lesson& l : train.lessons) {
        for (const Paragraph& p : l.paragraphs)
            for (const std::string& s : p.sentences) texts.push_back(s);
        for (const Question& q : l.questions) {
            texts.push_back(q.text);
            for (const AnswerOption& o : q.options) texts.push_back(o.text);
        }
    }
    return build_vocab_from_texts(texts, min_freq);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void validate_question(const Question& q, const std::string& lesson_id) {
    const std::string where = "lesson " + lesson_id + ", question " + q.question_id + ": ";
    const std::size_t n = q.options.size();
    switch (q.kind) {
        case QuestionKind::TrueFalse:
            if (n != 2) throw DataError(where + "tf question must have exactly 2 options");
            break;
        case QuestionKind::MultipleChoice:
            if (n < 2 || n > 7) throw DataError(where + "mc question must have 2-7 options");
            break;
        case QuestionKind::Diagram:
            if (n != 4) throw DataError(where + "diagram question must have exactly 4 options");
            break;
    }
    if ((q.kind == QuestionKind::Diagram) != !q.diagram_id.empty())
        throw DataError(where + "diagram_id must be present iff kind is diagram");
    for (std::size_t j = 0; j < n; ++j) {
        std::string expect(1, static_cast<char>('a' + j));
        if (q.options[j].label != expect)
            throw DataError(where + "option labels must be consecutive letters from \"a\" (got \"" +
                            q.options[j].label + "\" at position " + std::to_string(j) + ")");
    }
    if (q.gold_index() < 0)
        throw DataError(where + "answer \"" + q.gold_label + "\" is not an option label");
}

Lesson lesson_from_json(const json& j) {
    Lesson lesson;
    lesson.lesson_id = j.at("lesson_id").get<std::string>();
    lesson.title = j.value("title", "");

    const std::string where = "lesson " + lesson.lesson_id + ": ";
    if (!j.contains("paragraphs") || !j["paragraphs"].is_array() || j["paragraphs"].empty())
        throw DataError(where + "at least one paragraph required");
    if (!j.contains("questions") || !j["questions"].is_array() || j["questions"].empty())
        throw DataError(where + "at least one question required");

    std::set<std::string> para_ids;
    for (const json& pj : j["paragraphs"]) {
        Paragraph p;
        p.paragraph_id = pj.at("paragraph_id").get<std::string>();
        if (!para_ids.insert(p.paragraph_id).second)
            throw DataError(where + "duplicate paragraph_id " + p.paragraph_id);
        for (const json& sj : pj.at("sentences")) {
            std::string s = sj.get<std::string>();
            if (trim(s).empty())
                throw DataError(where + "paragraph " + p.paragraph_id +
                                " has an empty sentence");
            p.sentences.push_back(std::move(s));
        }
        if (p.sentences.empty())
            throw DataError(where + "paragraph " + p.paragraph_id + " has no sentences");
        lesson.paragraphs.push_back(std::move(p));
    }

    for (const json& qj : j["questions"]) {
        Question q;
        q.question_id = qj.at("question_id").get<std::string>();
        q.kind = kind_from_string(qj.at("kind").get<std::string>());
        q.text = qj.at("text").get<std::string>();
        for (const json& oj : qj.at("options"))
            q.options.push_back({oj.at("label").get<std::string>(), oj.at("text").get<std::string>()});
        q.gold_label = qj.at("answer").get<std::string>();
        if (qj.contains("diagram_id") && !qj["diagram_id"].is_null())
            q.diagram_id = qj["diagram_id"].get<std::string>();
        validate_question(q, lesson.lesson_id);
        lesson.questions.push_back(std::move(q));
    }
    return lesson;
}

}  // namespace

Dataset load_corpus(const std::filesystem::path& path, Split split) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file " + path.string());

    Dataset ds;
    ds.split = split;
    std::set<std::string> lesson_ids;
    std::set<std::string> question_ids;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        Lesson lesson;
        try {
            lesson = lesson_from_json(j);
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": bad lesson object: " + e.what());
        }
        if (!lesson_ids.insert(lesson.lesson_id).second)
            throw DataError("line " + std::to_string(line_no) + ": duplicate lesson_id " +
                            lesson.lesson_id);
        for (const Question& q : lesson.questions)
            if (!question_ids.insert(q.question_id).second)
                throw DataError("line " + std::to_string(line_no) + ": duplicate question_id " +
                                q.question_id);
        ds.lessons.push_back(std::move(lesson));
    }
    if (ds.lessons.empty()) throw DataError("no lessons in " + path.string());
    return ds;
}

std::string lesson_to_json_line(const Lesson& lesson) {
    json j;
    j["lesson_id"] = lesson.lesson_id;
    j["title"] = lesson.title;
    json paragraphs = json::array();
    for (const Paragraph& p : lesson.paragraphs) {
        json pj;
        pj["paragraph_id"] = p.paragraph_id;
        pj["sentences"] = p.sentences;
        paragraphs.push_back(std::move(pj));
    }
    j["paragraphs"] = std::move(paragraphs);
    json questions = json::array();
    for (const Question& q : lesson.questions) {
        json qj;
        qj["question_id"] = q.question_id;
        qj["kind"] = kind_to_string(q.kind);
        qj["text"] = q.text;
        json options = json::array();
        for (const AnswerOption& o : q.options)
            options.push_back(json{{"label", o.label}, {"text", o.text}});
        qj["options"] = std::move(options);
        qj["answer"] = q.gold_label;
        if (!q.diagram_id.empty()) qj["diagram_id"] = q.diagram_id;
        questions.push_back(std::move(qj));
    }
    j["questions"] = std::move(questions);
    return j.dump();
}

void save_corpus(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write corpus file " + path.string());
    for (const Lesson& l : dataset.lessons) out << lesson_to_json_line(l) << "\n";
}

const std::vector<float>& DiagramFeatureStore::lookup(const std::string& diagram_id) const {
    auto it = features.find(diagram_id);
    if (it == features.end()) throw DataError("missing diagram feature for \"" + diagram_id + "\"");
    return it->second;
}

namespace {
constexpr char kMagic[4] = {'X', 'T', 'Q', 'D'};

template <typename T>
void read_raw(std::ifstream& in, T* out, std::size_t count, const char* what) {
    in.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(count * sizeof(T)));
    if (!in) throw DataError(std::string("diagram feature file truncated while reading ") + what);
}
}  // namespace

DiagramFeatureStore load_diagram_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open diagram feature file " + path.string());

    char magic[4];
    read_raw(in, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("diagram feature file has wrong magic bytes");

    std::uint32_t version = 0, count = 0, dim = 0;
    read_raw(in, &version, 1, "version");
    if (version != 1)
        throw DataError("unsupported diagram feature file version " + std::to_string(version));
    read_raw(in, &count, 1, "count");
    read_raw(in, &dim, 1, "dim");
    if (dim == 0) throw DataError("diagram feature dim must be positive");

    DiagramFeatureStore store;
    store.dim = dim;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t id_len = 0;
        read_raw(in, &id_len, 1, "id length");
        std::string id(id_len, '\0');
        read_raw(in, id.data(), id_len, "id bytes");
        std::vector<float> values(dim);
        read_raw(in, values.data(), dim, "feature values");
        for (float v : values)
            if (!std::isfinite(v))
                throw DataError("non-finite feature value for diagram \"" + id + "\"");
        if (!store.features.emplace(id, std::move(values)).second)
            throw DataError("duplicate diagram_id \"" + id + "\" in feature file");
    }
    return store;
}

void save_diagram_features(const DiagramFeatureStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write diagram feature file " + path.string());
    out.write(kMagic, 4);
    std::uint32_t version = 1;
    std::uint32_t count = static_cast<std::uint32_t>(store.features.size());
    std::uint32_t dim = store.dim;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);
    // sorted ids keep the file byte-stable for one logical store
    std::vector<std::string> ids;
    ids.reserve(store.features.size());
    for (const auto& [id, _] : store.features) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (const std::string& id : ids) {
        const auto& values = store.features.at(id);
        std::uint16_t id_len = static_cast<std::uint16_t>(id.size());
        out.write(reinterpret_cast<const char*>(&id_len), 2);
        out.write(id.data(), id_len);
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    }
}

}  // namespace xtqa
