#include "speechgrade/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "speechgrade/audio.hpp"
#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"

namespace fs = std::filesystem;

namespace sg {

GradeScale::GradeScale(std::vector<std::string> ordered_labels)
    : labels_(std::move(ordered_labels)) {
  if (labels_.size() < 2)
    throw ParameterError("grade scale needs at least 2 labels");
  std::set<std::string> seen(labels_.begin(), labels_.end());
  if (seen.size() != labels_.size())
    throw ParameterError("grade scale labels must be unique");
}

GradeScale GradeScale::cefr(std::size_t n) {
  static const std::vector<std::string> kLadder = {"A2", "Low B1", "High B1",
                                                   "Low B2", "High B2"};
  if (n < 2) throw ParameterError("grade scale needs at least 2 labels");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i)
    labels.push_back(i < kLadder.size() ? kLadder[i]
                                        : "G" + std::to_string(i));
  return GradeScale(std::move(labels));
}

const std::string& GradeScale::label(std::size_t index) const {
  if (index >= labels_.size())
    throw ContractError("grade index " + std::to_string(index) +
                        " outside scale of " + std::to_string(labels_.size()));
  return labels_[index];
}

int GradeScale::to_index(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  throw ContractError("grade label \"" + label + "\" not in scale");
}

bool GradeScale::contains(const std::string& label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

double GradeScale::normalize_index(std::size_t index) const {
  if (index >= labels_.size())
    throw ContractError("grade index " + std::to_string(index) +
                        " outside scale");
  return static_cast<double>(index) / static_cast<double>(labels_.size() - 1);
}

double GradeScale::normalize(const std::string& label) const {
  return normalize_index(static_cast<std::size_t>(to_index(label)));
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

namespace {

constexpr char kScaleDirective[] = "scale=";

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void check_field_value(const std::string& value, std::size_t line_no) {
  if (value.find('\t') != std::string::npos ||
      value.find('\n') != std::string::npos)
    throw ParseError("manifest line " + std::to_string(line_no) +
                     ": field value contains a tab or newline");
}

}  // namespace

Manifest read_manifest(const std::string& path, bool check_audio) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();

  Manifest m;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind(kScaleDirective, 0) == 0) {
      const std::string body = line.substr(sizeof(kScaleDirective) - 1);
      std::vector<std::string> labels = split_on(body, '|');
      if (labels.size() < 2)
        throw ParseError("manifest line " + std::to_string(line_no) +
                         ": scale directive needs at least 2 labels");
      m.scale = GradeScale(labels);
      continue;
    }
    ResponseRecord rec;
    for (const std::string& field : split_on(line, '\t')) {
      if (field.empty()) continue;
      const std::size_t eq = field.find('=');
      if (eq == std::string::npos)
        throw ParseError("manifest line " + std::to_string(line_no) +
                         ": field \"" + field + "\" is not key=value");
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      check_field_value(value, line_no);
      if (key == "id") rec.id = value;
      else if (key == "prompt") rec.prompt = value;
      else if (key == "audio") rec.audio_path = value;
      else if (key == "transcript") rec.transcript = value;
      else if (key == "grade") rec.grade_label = value;
      else if (key == "split") rec.split = value;
      else
        throw ParseError("manifest line " + std::to_string(line_no) +
                         ": unknown field \"" + key + "\"");
    }
    if (rec.id.empty())
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": missing id");
    if (rec.grade_label.empty())
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": missing grade");
    if (rec.audio_path.empty())
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": missing audio path");
    if (!ids.insert(rec.id).second)
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": duplicate id \"" + rec.id + "\"");
    if (fs::path(rec.audio_path).is_relative())
      rec.audio_path = (base / rec.audio_path).string();
    if (check_audio && !fs::exists(rec.audio_path))
      throw IoError("manifest line " + std::to_string(line_no) +
                    ": audio file not found: " + rec.audio_path);
    m.records.push_back(std::move(rec));
  }
  return m;
}

std::vector<ResponseRecord> load_manifest(const std::string& path,
                                          const GradeScale& scale,
                                          bool check_audio) {
  Manifest m = read_manifest(path, check_audio);
  for (const ResponseRecord& r : m.records)
    if (!scale.contains(r.grade_label))
      throw ParseError("manifest record \"" + r.id + "\": grade label \"" +
                       r.grade_label + "\" not in scale");
  return std::move(m.records);
}

void write_manifest(const std::string& path,
                    const std::vector<ResponseRecord>& records,
                    const GradeScale& scale) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << kScaleDirective;
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (i) out << '|';
    out << scale.labels()[i];
  }
  out << '\n';
  const fs::path base = fs::path(path).parent_path();
  for (const ResponseRecord& r : records) {
    std::string audio = r.audio_path;
    // store relative to the manifest when possible
    const std::string prefix = base.empty() ? "" : base.string() + "/";
    if (!prefix.empty() && audio.rfind(prefix, 0) == 0)
      audio = audio.substr(prefix.size());
    out << "id=" << r.id << "\tprompt=" << r.prompt << "\taudio=" << audio
        << "\tgrade=" << r.grade_label << "\ttranscript=" << r.transcript;
    if (!r.split.empty()) out << "\tsplit=" << r.split;
    out << '\n';
  }
  if (!out) throw IoError("failed writing manifest: " + path);
}

// ---------------------------------------------------------------------------
// stratified split
// ---------------------------------------------------------------------------

CorpusSplits stratified_split(const std::vector<ResponseRecord>& records,
                              const SplitRatios& ratios, std::uint64_t seed) {
  if (records.empty())
    throw DegenerateInputError("stratified_split: no records");
  const double total_ratio = ratios.train + ratios.val + ratios.test;
  if (total_ratio <= 0.0)
    throw ParameterError("stratified_split: ratios must be positive");

  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i)
    groups[{records[i].prompt, records[i].grade_label}].push_back(i);

  Rng rng(seed);
  CorpusSplits out;
  for (auto& [key, idxs] : groups) {
    if (idxs.size() < 3)
      log_warn("stratified_split: class (" + key.first + ", " + key.second +
               ") has only " + std::to_string(idxs.size()) +
               " records; best-effort assignment");
    rng.shuffle(idxs);
    const double n = static_cast<double>(idxs.size());
    // largest-remainder apportionment across train/val/test
    const double shares[3] = {ratios.train / total_ratio,
                              ratios.val / total_ratio,
                              ratios.test / total_ratio};
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = n * shares[s];
      counts[s] = static_cast<std::size_t>(std::floor(exact));
      remainders[s] = exact - std::floor(exact);
      assigned += counts[s];
    }
    while (assigned < idxs.size()) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (remainders[s] > remainders[best]) best = s;
      ++counts[best];
      remainders[best] = -1.0;
      ++assigned;
    }
    std::size_t pos = 0;
    for (std::size_t k = 0; k < counts[0]; ++k) out.train.push_back(records[idxs[pos++]]);
    for (std::size_t k = 0; k < counts[1]; ++k) out.val.push_back(records[idxs[pos++]]);
    for (std::size_t k = 0; k < counts[2]; ++k) out.test.push_back(records[idxs[pos++]]);
  }
  auto tag = [](std::vector<ResponseRecord>& v, const char* name) {
    for (ResponseRecord& r : v) r.split = name;
  };
  tag(out.train, "train");
  tag(out.val, "val");
  tag(out.test, "test");
  return out;
}

CorpusSplits resolve_splits(const std::vector<ResponseRecord>& records,
                            std::uint64_t seed) {
  bool all_tagged = !records.empty();
  for (const auto& r : records)
    if (r.split != "train" && r.split != "val" && r.split != "test") {
      all_tagged = false;
      break;
    }
  if (all_tagged) {
    CorpusSplits s;
    for (const auto& r : records) {
      if (r.split == "train") s.train.push_back(r);
      else if (r.split == "val") s.val.push_back(r);
      else s.test.push_back(r);
    }
    return s;
  }
  return stratified_split(records, {}, seed);
}

// ---------------------------------------------------------------------------
// synthetic corpus
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kSharedWords = {
    "the", "a",  "to",   "and",  "i",    "it",   "is",  "of",
    "um",  "uh", "well", "that", "this", "they", "you", "in"};

// Signature words become progressively more likely at higher grades.
const std::vector<std::vector<std::string>> kGradeWords = {
    {"smoking", "bad", "no", "yes", "people", "like"},
    {"should", "because", "health", "public", "think", "places"},
    {"regulation", "argument", "consequence", "policy", "therefore", "evidence"},
    {"legislation", "perspective", "implication", "furthermore", "nuanced",
     "societal"},
    {"comprehensive", "paradigm", "discourse", "ramification", "nonetheless",
     "empirical"}};

std::string sample_transcript(std::size_t grade, std::size_t n_classes,
                              bool informative, double length_correlation,
                              Rng& rng) {
  // length = base + slope*grade + noise, noise sized so that the corpus-level
  // correlation between grade and length approximates the target
  const double slope = informative ? 4.0 : 0.0;
  double noise_sd = 2.0;
  if (informative && length_correlation > 0.0 && length_correlation < 1.0) {
    double grade_var = 0.0;
    const double mean_g = (static_cast<double>(n_classes) - 1.0) / 2.0;
    for (std::size_t g = 0; g < n_classes; ++g)
      grade_var += (static_cast<double>(g) - mean_g) *
                   (static_cast<double>(g) - mean_g);
    grade_var /= static_cast<double>(n_classes);
    const double rho = length_correlation;
    noise_sd = slope * std::sqrt(grade_var) *
               std::sqrt(1.0 / (rho * rho) - 1.0);
  }
  const double raw_len = 12.0 + slope * static_cast<double>(grade) +
                         noise_sd * rng.gaussian();
  const std::size_t len =
      static_cast<std::size_t>(std::max(2.0, std::round(raw_len)));

  const auto& grade_pool =
      kGradeWords[std::min(grade, kGradeWords.size() - 1)];
  std::ostringstream text;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) text << ' ';
    const bool use_signature = informative && rng.next_double() < 0.45;
    if (use_signature)
      text << grade_pool[rng.uniform_index(grade_pool.size())];
    else
      text << kSharedWords[rng.uniform_index(kSharedWords.size())];
  }
  return text.str();
}

AudioClip sample_audio(std::size_t grade, const SynthSpec& spec, Rng& rng) {
  const double dur =
      spec.base_duration_s +
      (spec.audio_informative ? 0.6 * static_cast<double>(grade) : 0.0) +
      rng.uniform(-0.4, 0.4);
  const std::size_t n =
      static_cast<std::size_t>(std::max(1.0, dur * spec.sample_rate));

  // harmonic tone whose pitch, SNR, and silence-gap rate track the grade
  const double g = spec.audio_informative ? static_cast<double>(grade) : 0.0;
  const double f0 = 200.0 + 150.0 * g;
  const double snr_db = 6.0 + 6.0 * g;
  const double gap_rate = std::max(0.05, 0.5 - 0.12 * g);  // gaps per second
  const double gap_len_s = 0.25;

  const double tone_amp = 0.30;
  const double tone_power = tone_amp * tone_amp * (1.0 + 0.25 + 0.0625) / 2.0;
  const double noise_power = tone_power / std::pow(10.0, snr_db / 10.0);
  const double noise_amp = std::sqrt(3.0 * noise_power);  // uniform noise

  // precompute silence gaps
  std::vector<std::pair<double, double>> gaps;
  const double expected_gaps = gap_rate * dur;
  const std::size_t n_gaps = static_cast<std::size_t>(
      std::max(0.0, std::round(expected_gaps + 0.5 * rng.gaussian())));
  for (std::size_t i = 0; i < n_gaps; ++i) {
    const double start = rng.uniform(0.0, std::max(0.01, dur - gap_len_s));
    gaps.emplace_back(start, start + gap_len_s);
  }

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(n);
  const double tau = 2.0 * 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    bool in_gap = false;
    for (const auto& [s, e] : gaps)
      if (t >= s && t < e) {
        in_gap = true;
        break;
      }
    double v = noise_amp * rng.uniform(-1.0, 1.0);
    if (!in_gap)
      v += tone_amp * (std::sin(tau * f0 * t) + 0.5 * std::sin(tau * 2 * f0 * t) +
                       0.25 * std::sin(tau * 3 * f0 * t));
    clip.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return clip;
}

}  // namespace

SynthResult generate_synthetic_corpus(const SynthSpec& spec,
                                      const std::string& out_dir) {
  if (spec.n_classes < 2)
    throw ParameterError("synthetic corpus needs at least 2 classes");
  if (spec.per_class < 1)
    throw ParameterError("synthetic corpus needs at least 1 record per class");

  const fs::path root(out_dir);
  const fs::path audio_dir = root / "audio";
  std::error_code ec;
  fs::create_directories(audio_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + audio_dir.string());

  SynthResult result;
  result.scale = GradeScale::cefr(spec.n_classes);
  Rng rng(spec.seed);

  std::size_t serial = 0;
  for (std::size_t g = 0; g < spec.n_classes; ++g)
    for (std::size_t k = 0; k < spec.per_class; ++k) {
      ++serial;
      ResponseRecord rec;
      std::ostringstream id;
      id << "R" << std::setw(4) << std::setfill('0') << serial;
      rec.id = id.str();
      rec.prompt = "P1";
      rec.grade_label = result.scale.label(g);
      rec.transcript = sample_transcript(g, spec.n_classes,
                                         spec.text_informative,
                                         spec.length_correlation, rng);
      AudioClip clip = sample_audio(g, spec, rng);
      const std::string wav_name = rec.id + ".wav";
      write_wav((audio_dir / wav_name).string(), clip);
      rec.audio_path = (audio_dir / wav_name).string();
      result.records.push_back(std::move(rec));
    }

  write_manifest((root / "manifest.tsv").string(), result.records,
                 result.scale);
  return result;
}

}  // namespace sg
