#include "xtqa/checkpoint.hpp"

#include <fstream>

#include "xtqa/errors.hpp"

namespace xtqa {

using nlohmann::json;

namespace {

std::string blob_name(const std::string& param_name) {
    std::string s = param_name;
    for (char& c : s)
        if (c == '/' || c == '\\') c = '_';
    return s + ".f32";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const XtqaModel& model,
                     const Vocab& vocab, const json& extra) {
    std::filesystem::create_directories(dir);

    json vj = json::object();
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i)
        vj[vocab.id_to_token[i]] = i;
    write_text(dir / "vocab.json", vj.dump());

    json manifest;
    manifest["format"] = "xtqa-checkpoint";
    manifest["version"] = 1;
    manifest["model"] = model.cfg.to_json();
    manifest["vocab_size"] = vocab.size();
    manifest["vocab_hash"] = std::to_string(vocab.hash());
    for (auto& [k, v] : extra.items()) manifest[k] = v;

    json ptable = json::array();
    for (std::size_t i = 0; i < model.params.count(); ++i) {
        const Parameter& p = model.params.at(i);
        json pj;
        pj["name"] = p.name;
        pj["shape"] = p.value.shape;
        pj["dtype"] = "f32";
        pj["file"] = blob_name(p.name);
        pj["trainable"] = p.trainable;
        ptable.push_back(std::move(pj));

        std::vector<float> buf(p.value.size());
        for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = static_cast<float>(p.value[k]);
        std::ofstream blob(dir / blob_name(p.name), std::ios::binary);
        if (!blob) throw DataError("cannot write parameter blob for " + p.name);
        blob.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    manifest["parameters"] = std::move(ptable);
    write_text(dir / "manifest.json", manifest.dump(2));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    LoadedCheckpoint out;
    json manifest;
    try {
        manifest = json::parse(read_text(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw DataError("bad checkpoint manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "xtqa-checkpoint")
        throw DataError("not an xtqa checkpoint: " + dir.string());
    out.manifest = manifest;
    out.config = ModelConfig::from_json(manifest.at("model"));

    json vj;
    try {
        vj = json::parse(read_text(dir / "vocab.json"));
    } catch (const json::exception& e) {
        throw DataError("bad checkpoint vocab: " + std::string(e.what()));
    }
    std::vector<std::string> id_to_token(vj.size());
    for (auto& [token, id] : vj.items()) {
        std::size_t i = id.get<std::size_t>();
        if (i >= id_to_token.size()) throw DataError("vocab id out of range in checkpoint");
        id_to_token[i] = token;
    }
    out.vocab.id_to_token = id_to_token;
    out.vocab.token_to_id.clear();
    for (std::size_t i = 0; i < id_to_token.size(); ++i)
        out.vocab.token_to_id[id_to_token[i]] = static_cast<int>(i);

    if (std::to_string(out.vocab.hash()) != manifest.at("vocab_hash").get<std::string>())
        throw DataError("vocab hash mismatch in checkpoint " + dir.string());

    // seed is irrelevant here: every weight is overwritten from the blobs
    out.model = std::make_unique<XtqaModel>(out.config, out.vocab.size(), 0);

    for (const json& pj : manifest.at("parameters")) {
        std::string name = pj.at("name").get<std::string>();
        Parameter* p = out.model->params.find(name);
        if (!p) throw DataError("checkpoint parameter " + name + " not in model");
        std::vector<std::size_t> shape = pj.at("shape").get<std::vector<std::size_t>>();
        if (shape != p->value.shape) throw DataError("checkpoint shape mismatch for " + name);
        std::ifstream blob(dir / pj.at("file").get<std::string>(), std::ios::binary);
        if (!blob) throw DataError("missing parameter blob for " + name);
        std::vector<float> buf(p->value.size());
        blob.read(reinterpret_cast<char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!blob) throw DataError("truncated parameter blob for " + name);
        for (std::size_t k = 0; k < buf.size(); ++k) p->value[k] = static_cast<double>(buf[k]);
        p->trainable = pj.value("trainable", true);
    }
    return out;
}

}  // namespace xtqa
