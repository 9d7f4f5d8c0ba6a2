#pragma once

#include <cstddef>
#include <vector>

namespace sg {

// Plain dense row-major matrix for the DSP path (no autodiff involvement).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), v(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && v == o.v;
  }
};

}  // namespace sg
