#include "lpsl/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "lpsl/error.hpp"

namespace lpsl {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
                     std::vector<Index> indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)) {
  if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 || offsets_.back() != indices_.size() ||
      indices_.size() != values_.size()) {
    throw ValidationError("inconsistent CSR arrays");
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<Index> indices;
  std::vector<double> values;
  indices.reserve(entries.size());
  values.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    if (e.row < 0 || e.col < 0 || static_cast<std::size_t>(e.row) >= rows ||
        static_cast<std::size_t>(e.col) >= cols) {
      throw ValidationError("triplet index out of range");
    }
    if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
      values.back() += e.value;
      continue;
    }
    indices.push_back(e.col);
    values.push_back(e.value);
    ++offsets[static_cast<std::size_t>(e.row) + 1];
  }
  for (std::size_t i = 0; i < rows; ++i) offsets[i + 1] += offsets[i];
  return CsrMatrix(rows, cols, std::move(offsets), std::move(indices), std::move(values));
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1);
  std::vector<Index> indices(n);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) indices[i] = static_cast<Index>(i);
  return CsrMatrix(n, n, std::move(offsets), std::move(indices), std::vector<double>(n, 1.0));
}

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  const auto cols = row_indices(i);
  const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<Index>(j));
  if (it == cols.end() || *it != static_cast<Index>(j)) return 0.0;
  return values_[offsets_[i] + static_cast<std::size_t>(it - cols.begin())];
}

CsrMatrix CsrMatrix::transpose() const {
  std::vector<std::size_t> offsets(cols_ + 1, 0);
  for (Index j : indices_) ++offsets[static_cast<std::size_t>(j) + 1];
  for (std::size_t j = 0; j < cols_; ++j) offsets[j + 1] += offsets[j];
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  std::vector<Index> indices(nnz());
  std::vector<double> values(nnz());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      const std::size_t pos = cursor[static_cast<std::size_t>(indices_[k])]++;
      indices[pos] = static_cast<Index>(i);
      values[pos] = values_[k];
    }
  }
  return CsrMatrix(cols_, rows_, std::move(offsets), std::move(indices), std::move(values));
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      out(i, static_cast<std::size_t>(indices_[k])) = values_[k];
    }
  }
  return out;
}

DenseMatrix CsrMatrix::multiply(const DenseMatrix& x) const {
  if (x.rows() != cols_) throw ValidationError("CSR multiply: shape mismatch");
  const std::size_t w = x.cols();
  DenseMatrix out(rows_, w);
  for (std::size_t i = 0; i < rows_; ++i) {
    double* dst = out.data() + i * w;
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      const double a = values_[k];
      const double* src = x.data() + static_cast<std::size_t>(indices_[k]) * w;
      for (std::size_t c = 0; c < w; ++c) dst[c] += a * src[c];
    }
  }
  return out;
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  if (x.size() != cols_) throw ValidationError("CSR multiply: shape mismatch");
  std::vector<double> out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double acc = 0.0;
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      acc += values_[k] * x[static_cast<std::size_t>(indices_[k])];
    }
    out[i] = acc;
  }
  return out;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("dense multiply: shape mismatch");
  const std::size_t w = b.cols();
  DenseMatrix out(a.rows(), w);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.data() + i * w;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      if (s == 0.0) continue;
      const double* src = b.data() + k * w;
      for (std::size_t c = 0; c < w; ++c) dst[c] += s * src[c];
    }
  }
  return out;
}

DenseMatrix multiply_transposed(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ValidationError("dense multiply: shape mismatch");
  const std::size_t w = b.cols();
  DenseMatrix out(a.cols(), w);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* src = b.data() + k * w;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = a(k, i);
      if (s == 0.0) continue;
      double* dst = out.data() + i * w;
      for (std::size_t c = 0; c < w; ++c) dst[c] += s * src[c];
    }
  }
  return out;
}

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ValidationError("shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

}  // namespace lpsl
