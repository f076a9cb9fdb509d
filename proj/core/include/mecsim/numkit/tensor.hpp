#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mecsim::numkit {

/// Dense row-major matrix of 64-bit floats. Every network weight, batch
/// of activations and gradient in the project is one of these.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  std::span<double> row_span(int r) { return {row(r), static_cast<std::size_t>(cols_)}; }
  std::span<const double> row_span(int r) const { return {row(r), static_cast<std::size_t>(cols_)}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// C (+)= A * B.  A: m x k, B: k x n, C: m x n.
void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);

/// C (+)= A^T * B.  A: m x k, B: m x n, C: k x n.
void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);

/// C (+)= A * B^T.  A: m x k, B: n x k, C: m x n.
void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate = false);

}  // namespace mecsim::numkit
