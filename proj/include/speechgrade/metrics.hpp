#pragma once

#include <cstddef>
#include <vector>

namespace sg {

// Row = human grade, column = model grade; entries sum to the number of
// scored responses.
struct ConfusionMatrix {
  std::size_t n = 0;
  std::vector<long long> counts;  // n x n row-major

  ConfusionMatrix(std::size_t classes, const std::vector<int>& human,
                  const std::vector<int>& predicted);
  long long at(std::size_t i, std::size_t j) const { return counts[i * n + j]; }
};

// Quadratic weighted kappa per the (i-j)^2/(N-1)^2 weighting, expected
// matrix from the outer product of the two grade histograms.
double qwk(const std::vector<int>& human, const std::vector<int>& predicted,
           std::size_t n_classes);

double mse(const std::vector<double>& y_true, const std::vector<double>& y_pred);

// Nearest integer, half-up, clamped to [0, n_classes-1].
int round_default(double raw, std::size_t n_classes);

// N-1 strictly increasing cut points in (0, N-1). A raw score maps to the
// number of cuts strictly below it.
struct ThresholdSet {
  std::vector<double> cuts;

  static ThresholdSet midpoints(std::size_t n_classes);
  void validate(std::size_t n_classes) const;
  std::size_t n_classes() const { return cuts.size() + 1; }
};

int apply_thresholds(double raw, const ThresholdSet& cuts);

struct ThresholdSearchConfig {
  double grid_step = 0.01;
  int max_sweeps = 20;
};

// Coordinate ascent over the cut lattice, initialized at integer midpoints;
// the result never scores below that initialization on the given data.
ThresholdSet optimize_thresholds(const std::vector<double>& raw_scores,
                                 const std::vector<int>& human_grades,
                                 std::size_t n_classes,
                                 const ThresholdSearchConfig& config = {});

}  // namespace sg
