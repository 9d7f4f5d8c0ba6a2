#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "speechgrade/errors.hpp"
#include "speechgrade/text.hpp"

using namespace sg;

TEST_CASE("tokenize: lowercasing, punctuation peeling, empty input") {
  CHECK(tokenize("No smoking.") ==
        std::vector<std::string>{"no", "smoking", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t \n ").empty());
  CHECK(tokenize("(Hello!)") ==
        std::vector<std::string>{"(", "hello", "!", ")"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("...") == std::vector<std::string>{".", ".", "."});
}

TEST_CASE("tokenize: idempotent on punctuation-free text") {
  const std::vector<std::string> tokens{"we", "should", "ban", "smoking"};
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) joined += ' ';
    joined += tokens[i];
  }
  CHECK(tokenize(joined) == tokens);
}

TEST_CASE("vocabulary: reserved ids, ordering, determinism") {
  Vocabulary v = Vocabulary::build({"a b", "a"});
  CHECK(v.size() == 4);
  CHECK(v.id_of("a") == 2);  // most frequent first
  CHECK(v.id_of("b") == 3);
  CHECK(v.token_of(0) == "<pad>");
  CHECK(v.token_of(1) == "<unk>");

  CHECK(v.id_of("unseen") == Vocabulary::kUnkId);

  Vocabulary again = Vocabulary::build({"a b", "a"});
  CHECK(again.tokens() == v.tokens());

  CHECK_THROWS_AS(Vocabulary::build({}), DegenerateInputError);
}

TEST_CASE("vocabulary: frequency ties break lexicographically") {
  Vocabulary v = Vocabulary::build({"pear apple", "apple pear zz"});
  CHECK(v.id_of("apple") == 2);
  CHECK(v.id_of("pear") == 3);
  CHECK(v.id_of("zz") == 4);
}

TEST_CASE("encode: lookup, padding, truncation, valid length") {
  Vocabulary v = Vocabulary::build({"no smoking in public"});
  TokenSequence s = encode({"no", "smoking"}, v, 5);
  CHECK(s.valid_length == 2);
  CHECK(s.ids[0] == v.id_of("no"));
  CHECK(s.ids[1] == v.id_of("smoking"));
  for (std::size_t i = 2; i < 5; ++i) CHECK(s.ids[i] == Vocabulary::kPadId);

  TokenSequence unk = encode({"zebra", "quark"}, v, 3);
  CHECK(unk.ids[0] == Vocabulary::kUnkId);
  CHECK(unk.ids[1] == Vocabulary::kUnkId);

  TokenSequence trunc = encode({"a", "b", "c", "d"}, v, 2);
  CHECK(trunc.valid_length == 2);
  CHECK(trunc.ids.size() == 2);

  CHECK_THROWS_AS(encode({"a"}, v, 0), ParameterError);
}

TEST_CASE("encode is injective on in-vocabulary, non-truncated inputs") {
  Vocabulary v = Vocabulary::build(
      {"no smoking in public places because health matters"});
  const std::vector<std::string> words{"no",     "smoking", "in",     "public",
                                       "places", "because", "health", "matters"};
  Rng rng(13);
  std::vector<std::vector<std::string>> inputs;
  std::vector<std::vector<int>> encodings;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t len = 1 + rng.uniform_index(6);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < len; ++i)
      tokens.push_back(words[rng.uniform_index(words.size())]);
    TokenSequence s = encode(tokens, v, 8);
    inputs.push_back(tokens);
    encodings.push_back(s.ids);
  }
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t j = i + 1; j < inputs.size(); ++j) {
      if (inputs[i] == inputs[j])
        CHECK(encodings[i] == encodings[j]);
      else
        CHECK(encodings[i] != encodings[j]);
    }
}

TEST_CASE("embeddings: init zeroes the reserved rows") {
  Vocabulary v = Vocabulary::build({"alpha beta"});
  Rng rng(3);
  EmbeddingTable t = init_embeddings(v, 8, rng);
  REQUIRE(t.table.shape() == Shape{4, 8});
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(t.table.data()[0 * 8 + j] == 0.0);
    CHECK(t.table.data()[1 * 8 + j] == 0.0);
  }
  for (std::size_t j = 0; j < 8; ++j) {
    const double x = t.table.data()[2 * 8 + j];
    CHECK(x >= -0.05);
    CHECK(x <= 0.05);
  }
}

TEST_CASE("embeddings: pretrained file loading and coverage") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sg_text_test";
  fs::create_directories(dir);
  const std::string path = (dir / "vectors.txt").string();

  Vocabulary v = Vocabulary::build({"smoking ban city"});
  {
    std::ofstream out(path);
    out << "smoking 0.25 -1 0.5\n";
    out << "elsewhere 9 9 9\n";
  }
  Rng rng(5);
  EmbeddingTable t = load_pretrained_embeddings(path, v, 3, rng);
  const int id = v.id_of("smoking");
  CHECK(t.table.data()[id * 3 + 0] == doctest::Approx(0.25));
  CHECK(t.table.data()[id * 3 + 1] == doctest::Approx(-1.0));
  CHECK(t.table.data()[id * 3 + 2] == doctest::Approx(0.5));
  CHECK(t.coverage == doctest::Approx(1.0 / 3.0));

  // empty file: random rows, zero unknown row, zero coverage
  const std::string empty = (dir / "empty.txt").string();
  { std::ofstream out(empty); }
  Rng rng2(5);
  EmbeddingTable t2 = load_pretrained_embeddings(empty, v, 3, rng2);
  CHECK(t2.coverage == 0.0);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(t2.table.data()[Vocabulary::kUnkId * 3 + j] == 0.0);

  // malformed lines carry their line number
  const std::string bad_dim = (dir / "baddim.txt").string();
  {
    std::ofstream out(bad_dim);
    out << "smoking 1 2\n";
  }
  Rng rng3(5);
  CHECK_THROWS_AS(load_pretrained_embeddings(bad_dim, v, 3, rng3), FormatError);

  const std::string bad_num = (dir / "badnum.txt").string();
  {
    std::ofstream out(bad_num);
    out << "smoking 1 two 3\n";
  }
  Rng rng4(5);
  CHECK_THROWS_AS(load_pretrained_embeddings(bad_num, v, 3, rng4), ParseError);
}
