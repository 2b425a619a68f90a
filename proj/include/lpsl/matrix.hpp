#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lpsl {

using Index = std::int32_t;

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> values() const { return data_; }

  void fill(double v);

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
            std::vector<Index> indices, std::vector<double> values);

  /// Duplicates are summed; entries are sorted; explicit zeros are kept.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
  static CsrMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return indices_.size(); }

  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const Index> indices() const { return indices_; }
  std::span<const double> values() const { return values_; }

  std::span<const Index> row_indices(std::size_t i) const {
    return {indices_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  /// Stored value at (i, j), or 0 when absent.
  double at(std::size_t i, std::size_t j) const;

  CsrMatrix transpose() const;
  DenseMatrix to_dense() const;

  /// this * x for dense x (rows accumulated in stored order).
  DenseMatrix multiply(const DenseMatrix& x) const;
  std::vector<double> multiply(std::span<const double> x) const;

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Index> indices_;
  std::vector<double> values_;
};

/// a * b for dense operands.
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
/// a^T * b for dense operands.
DenseMatrix multiply_transposed(const DenseMatrix& a, const DenseMatrix& b);

double max_abs_difference(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace lpsl
