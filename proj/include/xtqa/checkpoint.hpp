#pragma once

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "xtqa/corpus.hpp"
#include "xtqa/model.hpp"

namespace xtqa {

// Checkpoint directory layout:
//   manifest.json   model config, parameter table (name/shape/dtype/file),
//                   vocab hash, seeds, epoch, split record
//   vocab.json      token -> id table
//   <param>.f32     one little-endian float32 blob per parameter
void save_checkpoint(const std::filesystem::path& dir, const XtqaModel& model,
                     const Vocab& vocab, const nlohmann::json& extra);

struct LoadedCheckpoint {
    ModelConfig config;
    Vocab vocab;
    std::unique_ptr<XtqaModel> model;
    nlohmann::json manifest;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace xtqa
