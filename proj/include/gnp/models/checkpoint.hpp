#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "gnp/models/model.hpp"

namespace gnp::models {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary checkpoint: "GNPC", format version, the canonical ModelSpec text, a
/// parameter index (name, shape, trainable flag, payload offset) and the
/// little-endian float64 payload. Loading rebuilds the model from that ModelSpec
/// and rejects any entry whose name or shape differs.
std::string serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace gnp::models
