#include "speechgrade/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"

namespace sg {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }

}  // namespace

std::vector<std::string> tokenize(const std::string& transcript) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = transcript.size();
  while (i < n) {
    while (i < n && is_space(static_cast<unsigned char>(transcript[i]))) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !is_space(static_cast<unsigned char>(transcript[j]))) ++j;
    std::string chunk = transcript.substr(i, j - i);
    i = j;

    for (char& c : chunk)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    // peel leading punctuation
    std::size_t lo = 0, hi = chunk.size();
    while (lo < hi && is_punct(static_cast<unsigned char>(chunk[lo]))) {
      out.push_back(std::string(1, chunk[lo]));
      ++lo;
    }
    // collect trailing punctuation, innermost first after the core token
    std::vector<char> trailing;
    while (hi > lo && is_punct(static_cast<unsigned char>(chunk[hi - 1]))) {
      trailing.push_back(chunk[hi - 1]);
      --hi;
    }
    if (hi > lo) out.push_back(chunk.substr(lo, hi - lo));
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it)
      out.push_back(std::string(1, *it));
  }
  return out;
}

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>"};
  token_to_id_ = {{"<pad>", kPadId}, {"<unk>", kUnkId}};
}

Vocabulary Vocabulary::build(
    const std::vector<std::string>& training_transcripts) {
  if (training_transcripts.empty())
    throw DegenerateInputError("build_vocabulary: empty training corpus");
  std::map<std::string, std::size_t> freq;
  for (const std::string& t : training_transcripts)
    for (const std::string& tok : tokenize(t)) ++freq[tok];

  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(),
                                                           freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  Vocabulary v;
  for (const auto& [token, count] : entries) {
    (void)count;
    v.token_to_id_.emplace(token, static_cast<int>(v.id_to_token_.size()));
    v.id_to_token_.push_back(token);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_to_token) {
  if (id_to_token.size() < 2)
    throw FormatError("vocabulary must contain the two reserved entries");
  Vocabulary v;
  v.id_to_token_ = id_to_token;
  v.token_to_id_.clear();
  for (std::size_t i = 0; i < id_to_token.size(); ++i)
    v.token_to_id_.emplace(id_to_token[i], static_cast<int>(i));
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw ContractError("token id " + std::to_string(id) +
                        " outside vocabulary of size " +
                        std::to_string(id_to_token_.size()));
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenSequence encode(const std::vector<std::string>& tokens,
                     const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw ParameterError("encode: max_len must be >= 1");
  TokenSequence seq;
  seq.valid_length = std::min(tokens.size(), max_len);
  if (tokens.size() > max_len)
    log_warn("transcript of " + std::to_string(tokens.size()) +
             " tokens truncated to " + std::to_string(max_len));
  seq.ids.assign(max_len, Vocabulary::kPadId);
  for (std::size_t i = 0; i < seq.valid_length; ++i)
    seq.ids[i] = vocab.id_of(tokens[i]);
  return seq;
}

EmbeddingTable init_embeddings(const Vocabulary& vocab, std::size_t dim,
                               Rng& rng) {
  EmbeddingTable t;
  t.table = Tensor::uniform({vocab.size(), dim}, -0.05, 0.05, rng, true);
  for (std::size_t j = 0; j < dim; ++j) {
    t.table.data()[Vocabulary::kPadId * dim + j] = 0.0;
    t.table.data()[Vocabulary::kUnkId * dim + j] = 0.0;
  }
  t.coverage = vocab.size() > 2 ? 0.0 : 1.0;
  return t;
}

EmbeddingTable load_pretrained_embeddings(const std::string& path,
                                          const Vocabulary& vocab,
                                          std::size_t dim, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  EmbeddingTable t = init_embeddings(vocab, dim, rng);

  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<int> filled;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token))
      throw ParseError("embedding file line " + std::to_string(line_no) +
                       ": missing token");
    std::vector<double> values;
    values.reserve(dim);
    double x;
    while (ls >> x) values.push_back(x);
    if (!ls.eof())
      throw ParseError("embedding file line " + std::to_string(line_no) +
                       ": non-numeric vector component");
    if (values.size() != dim)
      throw FormatError("embedding file line " + std::to_string(line_no) +
                        ": expected " + std::to_string(dim) +
                        " components, got " + std::to_string(values.size()));
    const int id = vocab.id_of(token);
    if (id == Vocabulary::kUnkId || id == Vocabulary::kPadId) continue;
    std::copy(values.begin(), values.end(),
              t.table.data().begin() + static_cast<std::size_t>(id) * dim);
    filled.insert(id);
  }
  const std::size_t real = vocab.size() - 2;
  t.coverage = real == 0 ? 1.0
                         : static_cast<double>(filled.size()) /
                               static_cast<double>(real);
  return t;
}

}  // namespace sg
