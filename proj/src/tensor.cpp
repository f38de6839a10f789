#include "supsup/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "supsup/errors.hpp"

namespace supsup {

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= src.rows()) throw DimensionError("gather_rows: row index out of range");
    std::memcpy(out.row(i).data(), src.row(rows[i]).data(), src.cols() * sizeof(double));
  }
  return out;
}

Matrix repeat_rows(const Matrix& src, std::size_t times) {
  Matrix out(src.rows() * times, src.cols());
  for (std::size_t t = 0; t < times; ++t) {
    std::memcpy(out.data() + t * src.size(), src.data(), src.size() * sizeof(double));
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace supsup
