#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "speechgrade/rng.hpp"
#include "speechgrade/tensor.hpp"

namespace sg {

// Lowercase, whitespace-split, leading/trailing punctuation peeled into
// separate tokens. Self-contained rule tokenizer; deterministic.
std::vector<std::string> tokenize(const std::string& transcript);

// Token ids: 0 = padding, 1 = unknown, real tokens from 2 by descending
// training frequency then lexicographic order.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Vocabulary();  // just the reserved entries
  static Vocabulary build(const std::vector<std::string>& training_transcripts);
  static Vocabulary from_tokens(const std::vector<std::string>& id_to_token);

  int id_of(const std::string& token) const;  // kUnkId when absent
  const std::string& token_of(int id) const;
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct TokenSequence {
  std::vector<int> ids;            // padded to max_len with kPadId
  std::size_t valid_length = 0;    // count before padding
};

// Lookup with missing -> unknown, right-padding with the padding id,
// over-length truncated with a warning.
TokenSequence encode(const std::vector<std::string>& tokens,
                     const Vocabulary& vocab, std::size_t max_len);

struct EmbeddingTable {
  Tensor table;  // [vocab_size x dim]
  bool trainable = true;
  double coverage = 0.0;  // fraction of real vocab rows found in the file
};

// Random rows in [-0.05, 0.05]; padding and unknown rows zeroed.
EmbeddingTable init_embeddings(const Vocabulary& vocab, std::size_t dim,
                               Rng& rng);

// Whitespace-separated text format: token then `dim` reals per line.
// Matching vocab rows are copied; the rest keep their random init.
EmbeddingTable load_pretrained_embeddings(const std::string& path,
                                          const Vocabulary& vocab,
                                          std::size_t dim, Rng& rng);

}  // namespace sg
