#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speechgrade/rng.hpp"

namespace sg {

// Ordered proficiency labels with affine mappings to [0, N-1] and [0, 1].
class GradeScale {
 public:
  GradeScale() = default;
  explicit GradeScale(std::vector<std::string> ordered_labels);

  // A2 < Low B1 < High B1 < Low B2 < High B2, truncated to n labels
  // (synthesized G0..Gn-1 labels beyond five).
  static GradeScale cefr(std::size_t n);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t index) const;

  int to_index(const std::string& label) const;  // throws on unknown label
  bool contains(const std::string& label) const;
  double normalize_index(std::size_t index) const;
  double normalize(const std::string& label) const;

  bool operator==(const GradeScale& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
};

struct ResponseRecord {
  std::string id;
  std::string prompt;
  std::string audio_path;  // resolved against the manifest directory
  std::string transcript;
  std::string grade_label;
  std::string split;  // optional: train | val | test | empty
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct CorpusSplits {
  std::vector<ResponseRecord> train, val, test;
};

// --- manifest I/O ---
// One record per line, TAB-separated key=value fields. An optional leading
// "scale=A|B|C" directive names the ordered grade labels.

struct Manifest {
  std::vector<ResponseRecord> records;
  std::optional<GradeScale> scale;
};

Manifest read_manifest(const std::string& path, bool check_audio = true);

// Validates records against the scale (grade labels, duplicate ids, audio
// file existence).
std::vector<ResponseRecord> load_manifest(const std::string& path,
                                          const GradeScale& scale,
                                          bool check_audio = true);

void write_manifest(const std::string& path,
                    const std::vector<ResponseRecord>& records,
                    const GradeScale& scale);

// --- splitting ---

// Deterministic stratified split keyed on (prompt, grade); partitions are
// disjoint and exhaustive with per-class proportions preserved to rounding.
CorpusSplits stratified_split(const std::vector<ResponseRecord>& records,
                              const SplitRatios& ratios, std::uint64_t seed);

// Uses the records' own split tags when every record carries one, otherwise
// re-derives the 70:10:20 stratified split from the seed.
CorpusSplits resolve_splits(const std::vector<ResponseRecord>& records,
                            std::uint64_t seed);

// --- synthetic corpus ---

struct SynthSpec {
  std::size_t n_classes = 3;
  std::size_t per_class = 40;
  std::uint64_t seed = 42;
  int sample_rate = 16000;
  bool audio_informative = true;  // tone/SNR/gap structure varies with grade
  bool text_informative = true;   // token distribution + length vary with grade
  double length_correlation = 0.35;  // target corr(grade, transcript length)
  double base_duration_s = 5.5;      // grade 0 mean duration, ~1/10 field scale
};

struct SynthResult {
  std::vector<ResponseRecord> records;
  GradeScale scale;
};

// Writes one WAV per record under out_dir/audio and a manifest at
// out_dir/manifest.tsv; fully reproducible from (spec, seed).
SynthResult generate_synthetic_corpus(const SynthSpec& spec,
                                      const std::string& out_dir);

}  // namespace sg
