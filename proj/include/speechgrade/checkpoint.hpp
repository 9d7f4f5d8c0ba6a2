#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speechgrade/audio.hpp"
#include "speechgrade/corpus.hpp"
#include "speechgrade/model.hpp"
#include "speechgrade/text.hpp"

namespace sg {

// Everything needed to rebuild a trained model and its preprocessing:
// magic "SGC1", version u16, model kind u8, then length-prefixed named
// blocks. Parameters are stored as little-endian 32-bit reals.
struct Checkpoint {
  static constexpr std::uint16_t kVersion = 1;

  ModelKind kind = ModelKind::Fused;
  ModelConfig config;
  SpectrogramConfig frontend;
  std::size_t max_columns = 128;
  std::size_t text_max_len = 1;
  Vocabulary vocab;
  GradeScale scale;
  std::uint64_t split_seed = 0;
  double best_val_qwk = 0.0;
  std::size_t selected_epoch = 0;

  struct Block {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> values;
  };
  std::vector<Block> params;

  // Snapshot a model's parameters (values down-converted to 32-bit).
  static Checkpoint from_model(const ScoringModel& model);

  // Rebuild a model and load the stored parameters into it; validates the
  // shape table against the config first.
  ScoringModel materialize() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sg
