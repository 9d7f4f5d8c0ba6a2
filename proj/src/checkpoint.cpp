#include "speechgrade/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "speechgrade/errors.hpp"

namespace sg {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', '1'};

// --- little-endian primitives ---

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& b, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(b, bits);
}

void put_string(std::string& b, const std::string& s) {
  put_u32(b, static_cast<std::uint32_t>(s.size()));
  b.append(s);
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(u_bytes(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(u_bytes(4)); }
  std::uint64_t u64() { return u_bytes(8); }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(u_bytes(1)); }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

 private:
  std::uint64_t u_bytes(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  void need(std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw FormatError("truncated checkpoint file: " + path_);
  }

  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::uint8_t kind_code(ModelKind k) {
  switch (k) {
    case ModelKind::Audio: return 0;
    case ModelKind::Text: return 1;
    case ModelKind::Fused: return 2;
  }
  return 255;
}

ModelKind kind_from_code(std::uint8_t c, const std::string& path) {
  switch (c) {
    case 0: return ModelKind::Audio;
    case 1: return ModelKind::Text;
    case 2: return ModelKind::Fused;
  }
  throw FormatError("checkpoint " + path + ": unknown model kind code " +
                    std::to_string(c));
}

// Config echo as canonical key=value lines.
std::string encode_config(const Checkpoint& c) {
  std::ostringstream os;
  os << "acoustic.conv_sets=" << c.config.acoustic.conv_sets << "\n"
     << "acoustic.convs_per_set=" << c.config.acoustic.convs_per_set << "\n"
     << "acoustic.base_filters=" << c.config.acoustic.base_filters << "\n"
     << "acoustic.kernel_width=" << c.config.acoustic.kernel_width << "\n"
     << "acoustic.pool_window=" << c.config.acoustic.pool_window << "\n"
     << "acoustic.lstm_hidden=" << c.config.acoustic.lstm_hidden << "\n"
     << "acoustic.mel_bands=" << c.config.acoustic.mel_bands << "\n"
     << "lexical.embedding_dim=" << c.config.lexical.embedding_dim << "\n"
     << "lexical.lstm_hidden=" << c.config.lexical.lstm_hidden << "\n"
     << "frontend.sample_rate=" << c.frontend.sample_rate << "\n"
     << "frontend.fft_window=" << c.frontend.fft_window << "\n"
     << "frontend.hop=" << c.frontend.hop << "\n"
     << "frontend.n_mels=" << c.frontend.n_mels << "\n"
     << "frontend.f_min=" << c.frontend.f_min << "\n"
     << "frontend.f_max=" << c.frontend.f_max << "\n"
     << "frontend.frame_columns=" << c.frontend.frame_columns << "\n"
     << "max_columns=" << c.max_columns << "\n"
     << "text_max_len=" << c.text_max_len << "\n";
  return os.str();
}

void decode_config(const std::string& text, Checkpoint& c,
                   const std::string& path) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("checkpoint " + path + ": malformed config line");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto grab = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end())
      throw FormatError("checkpoint " + path + ": config missing " + key);
    return it->second;
  };
  auto num = [&](const char* key) { return std::stoull(grab(key)); };
  c.config.acoustic.conv_sets = num("acoustic.conv_sets");
  c.config.acoustic.convs_per_set = num("acoustic.convs_per_set");
  c.config.acoustic.base_filters = num("acoustic.base_filters");
  c.config.acoustic.kernel_width = num("acoustic.kernel_width");
  c.config.acoustic.pool_window = num("acoustic.pool_window");
  c.config.acoustic.lstm_hidden = num("acoustic.lstm_hidden");
  c.config.acoustic.mel_bands = num("acoustic.mel_bands");
  c.config.lexical.embedding_dim = num("lexical.embedding_dim");
  c.config.lexical.lstm_hidden = num("lexical.lstm_hidden");
  c.frontend.sample_rate = static_cast<int>(num("frontend.sample_rate"));
  c.frontend.fft_window = num("frontend.fft_window");
  c.frontend.hop = num("frontend.hop");
  c.frontend.n_mels = num("frontend.n_mels");
  c.frontend.f_min = std::stod(grab("frontend.f_min"));
  c.frontend.f_max = std::stod(grab("frontend.f_max"));
  c.frontend.frame_columns = num("frontend.frame_columns");
  c.max_columns = num("max_columns");
  c.text_max_len = num("text_max_len");
}

}  // namespace

Checkpoint Checkpoint::from_model(const ScoringModel& model) {
  Checkpoint c;
  c.kind = model.kind();
  c.config = model.config();
  for (const NamedParam& p : model.parameters()) {
    Block b;
    b.name = p.name;
    b.shape = p.tensor.shape();
    b.values.reserve(p.tensor.numel());
    for (double v : p.tensor.data()) b.values.push_back(static_cast<float>(v));
    c.params.push_back(std::move(b));
  }
  return c;
}

ScoringModel Checkpoint::materialize() const {
  Rng rng(0);  // init values are fully overwritten below
  ScoringModel model(kind, config, vocab.size(), scale.size(), rng);

  if (params.size() != model.parameters().size())
    throw FormatError("checkpoint parameter table has " +
                      std::to_string(params.size()) + " blocks, model needs " +
                      std::to_string(model.parameters().size()));
  for (const Block& b : params) {
    Tensor* t = model.find_parameter(b.name);
    if (!t)
      throw FormatError("checkpoint block \"" + b.name +
                        "\" unknown for this model kind/config");
    if (t->shape() != b.shape)
      throw FormatError("checkpoint block \"" + b.name + "\" has shape " +
                        shape_to_string(b.shape) + ", model expects " +
                        shape_to_string(t->shape()));
    for (std::size_t i = 0; i < b.values.size(); ++i)
      t->data()[i] = static_cast<double>(b.values[i]);
  }
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string b;
  b.append(kMagic, 4);
  put_u16(b, Checkpoint::kVersion);
  b.push_back(static_cast<char>(kind_code(ckpt.kind)));

  put_string(b, encode_config(ckpt));

  // vocabulary: id-ordered token list (includes the reserved entries)
  put_u32(b, static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (const std::string& tok : ckpt.vocab.tokens()) put_string(b, tok);

  // grade scale
  put_u32(b, static_cast<std::uint32_t>(ckpt.scale.size()));
  for (const std::string& label : ckpt.scale.labels()) put_string(b, label);

  // meta
  put_u64(b, ckpt.split_seed);
  {
    std::ostringstream meta;
    meta.precision(17);
    meta << ckpt.best_val_qwk;
    put_string(b, meta.str());
  }
  put_u64(b, static_cast<std::uint64_t>(ckpt.selected_epoch));

  // named parameter blocks
  put_u32(b, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& block : ckpt.params) {
    put_string(b, block.name);
    put_u32(b, static_cast<std::uint32_t>(block.shape.size()));
    std::size_t numel = 1;
    for (std::size_t d : block.shape) {
      put_u32(b, static_cast<std::uint32_t>(d));
      numel *= d;
    }
    if (numel != block.values.size())
      throw ContractError("checkpoint block \"" + block.name +
                          "\" value count does not match its shape");
    for (float v : block.values) put_f32(b, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  Reader r(bytes, path);

  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("checkpoint " + path + ": bad magic");
  const std::uint16_t version = r.u16();
  if (version != Checkpoint::kVersion)
    throw FormatError("checkpoint " + path + ": unsupported version " +
                      std::to_string(version));

  Checkpoint c;
  c.kind = kind_from_code(r.u8(), path);
  decode_config(r.str(), c, path);

  const std::uint32_t vocab_n = r.u32();
  std::vector<std::string> tokens;
  tokens.reserve(vocab_n);
  for (std::uint32_t i = 0; i < vocab_n; ++i) tokens.push_back(r.str());
  if (!tokens.empty()) c.vocab = Vocabulary::from_tokens(tokens);

  const std::uint32_t scale_n = r.u32();
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < scale_n; ++i) labels.push_back(r.str());
  c.scale = GradeScale(labels);

  c.split_seed = r.u64();
  c.best_val_qwk = std::stod(r.str());
  c.selected_epoch = static_cast<std::size_t>(r.u64());

  const std::uint32_t n_blocks = r.u32();
  for (std::uint32_t bi = 0; bi < n_blocks; ++bi) {
    Checkpoint::Block block;
    block.name = r.str();
    const std::uint32_t rank = r.u32();
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      block.shape.push_back(r.u32());
      numel *= block.shape.back();
    }
    block.values.reserve(numel);
    for (std::size_t i = 0; i < numel; ++i) block.values.push_back(r.f32());
    c.params.push_back(std::move(block));
  }
  if (!r.done())
    throw FormatError("checkpoint " + path + ": trailing bytes after blocks");
  return c;
}

}  // namespace sg
