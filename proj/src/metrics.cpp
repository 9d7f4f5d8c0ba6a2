#include "speechgrade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"

namespace sg {

namespace {

void check_grades(const std::vector<int>& g, std::size_t n_classes,
                  const char* who) {
  for (int x : g)
    if (x < 0 || static_cast<std::size_t>(x) >= n_classes)
      throw ContractError(std::string(who) + " grade " + std::to_string(x) +
                          " outside [0, " + std::to_string(n_classes - 1) + "]");
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t classes,
                                 const std::vector<int>& human,
                                 const std::vector<int>& predicted)
    : n(classes), counts(classes * classes, 0) {
  if (human.size() != predicted.size())
    throw DimensionError("confusion matrix: " + std::to_string(human.size()) +
                         " human vs " + std::to_string(predicted.size()) +
                         " predicted grades");
  if (human.empty())
    throw DegenerateInputError("confusion matrix: no rating pairs");
  check_grades(human, n, "human");
  check_grades(predicted, n, "predicted");
  for (std::size_t k = 0; k < human.size(); ++k)
    ++counts[static_cast<std::size_t>(human[k]) * n +
             static_cast<std::size_t>(predicted[k])];
}

double qwk(const std::vector<int>& human, const std::vector<int>& predicted,
           std::size_t n_classes) {
  if (n_classes < 2) throw ParameterError("qwk: need at least 2 classes");
  ConfusionMatrix o(n_classes, human, predicted);
  const double total = static_cast<double>(human.size());

  std::vector<double> hist_h(n_classes, 0.0), hist_p(n_classes, 0.0);
  for (int g : human) hist_h[static_cast<std::size_t>(g)] += 1.0;
  for (int g : predicted) hist_p[static_cast<std::size_t>(g)] += 1.0;

  const double denom_w =
      static_cast<double>((n_classes - 1) * (n_classes - 1));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n_classes; ++i)
    for (std::size_t j = 0; j < n_classes; ++j) {
      const double diff = static_cast<double>(i) - static_cast<double>(j);
      const double w = diff * diff / denom_w;
      num += w * static_cast<double>(o.at(i, j));
      den += w * hist_h[i] * hist_p[j] / total;  // E normalized to sum(O)
    }
  if (den == 0.0)
    throw UndefinedKappaError(
        "qwk: expected-agreement mass is zero (all ratings in one class)");
  return 1.0 - num / den;
}

double mse(const std::vector<double>& y_true,
           const std::vector<double>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw DimensionError("mse: " + std::to_string(y_true.size()) + " vs " +
                         std::to_string(y_pred.size()) + " values");
  if (y_true.empty()) throw DegenerateInputError("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y_true.size());
}

int round_default(double raw, std::size_t n_classes) {
  if (!std::isfinite(raw)) throw NumericError("round_default: non-finite score");
  const double r = std::floor(raw + 0.5);  // half-up
  const double hi = static_cast<double>(n_classes - 1);
  return static_cast<int>(std::clamp(r, 0.0, hi));
}

ThresholdSet ThresholdSet::midpoints(std::size_t n_classes) {
  ThresholdSet t;
  for (std::size_t i = 0; i + 1 < n_classes; ++i)
    t.cuts.push_back(static_cast<double>(i) + 0.5);
  return t;
}

void ThresholdSet::validate(std::size_t classes) const {
  if (cuts.size() + 1 != classes)
    throw ContractError("threshold set has " + std::to_string(cuts.size()) +
                        " cuts for " + std::to_string(classes) + " classes");
  const double hi = static_cast<double>(classes - 1);
  double prev = 0.0;
  bool first = true;
  for (double c : cuts) {
    if (!(c > 0.0 && c < hi))
      throw ContractError("threshold " + std::to_string(c) +
                          " outside (0, " + std::to_string(hi) + ")");
    if (!first && !(c > prev))
      throw ContractError("thresholds not strictly increasing");
    prev = c;
    first = false;
  }
}

int apply_thresholds(double raw, const ThresholdSet& t) {
  int grade = 0;
  for (double c : t.cuts)
    if (c < raw) ++grade;
  return grade;
}

namespace {

double qwk_of_cuts(const std::vector<double>& raw, const std::vector<int>& human,
                   std::size_t n_classes, const ThresholdSet& cuts) {
  std::vector<int> pred(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    pred[i] = apply_thresholds(raw[i], cuts);
  return qwk(human, pred, n_classes);
}

}  // namespace

ThresholdSet optimize_thresholds(const std::vector<double>& raw_scores,
                                 const std::vector<int>& human_grades,
                                 std::size_t n_classes,
                                 const ThresholdSearchConfig& config) {
  if (raw_scores.size() != human_grades.size())
    throw DimensionError("optimize_thresholds: " +
                         std::to_string(raw_scores.size()) + " scores vs " +
                         std::to_string(human_grades.size()) + " grades");
  if (raw_scores.empty())
    throw DegenerateInputError("optimize_thresholds: no scores");
  if (config.grid_step <= 0.0)
    throw ParameterError("optimize_thresholds: grid step must be positive");
  {
    std::vector<double> distinct = raw_scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    if (distinct.size() < n_classes)
      log_warn("optimize_thresholds: only " + std::to_string(distinct.size()) +
               " distinct scores for " + std::to_string(n_classes) + " grades");
  }

  ThresholdSet cuts = ThresholdSet::midpoints(n_classes);
  const double hi = static_cast<double>(n_classes - 1);
  double best = qwk_of_cuts(raw_scores, human_grades, n_classes, cuts);

  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    bool improved = false;
    for (std::size_t ci = 0; ci < cuts.cuts.size(); ++ci) {
      const double lo_bound = ci == 0 ? 0.0 : cuts.cuts[ci - 1];
      const double hi_bound = ci + 1 == cuts.cuts.size() ? hi : cuts.cuts[ci + 1];
      double best_cut = cuts.cuts[ci];
      // scan the lattice points strictly inside the neighbor bounds
      const long k_lo =
          static_cast<long>(std::floor(lo_bound / config.grid_step)) + 1;
      const long k_hi =
          static_cast<long>(std::ceil(hi_bound / config.grid_step)) - 1;
      for (long k = k_lo; k <= k_hi; ++k) {
        const double candidate = static_cast<double>(k) * config.grid_step;
        if (!(candidate > lo_bound && candidate < hi_bound)) continue;
        ThresholdSet trial = cuts;
        trial.cuts[ci] = candidate;
        const double score =
            qwk_of_cuts(raw_scores, human_grades, n_classes, trial);
        if (score > best) {
          best = score;
          best_cut = candidate;
          improved = true;
        }
      }
      cuts.cuts[ci] = best_cut;
    }
    if (!improved) break;
  }
  cuts.validate(n_classes);
  return cuts;
}

}  // namespace sg
