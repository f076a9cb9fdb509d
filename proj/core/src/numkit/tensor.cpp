#include "mecsim/numkit/tensor.hpp"

#include <cmath>

#include "mecsim/errors.hpp"

namespace mecsim::numkit {

bool Tensor2::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {
void check_gemm(int am, int an, int bm, int bn, int cm, int cn, const char* tag) {
  if (an != bm || cm != am || cn != bn) {
    throw ContractError(std::string(tag) + ": incompatible shapes");
  }
}
}  // namespace

void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  check_gemm(a.rows(), a.cols(), b.rows(), b.cols(), c.rows(), c.cols(), "gemm_nn");
  if (!accumulate) c.fill(0.0);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    double* __restrict crow = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* __restrict brow = b.row(p);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  check_gemm(a.cols(), a.rows(), b.rows(), b.cols(), c.rows(), c.cols(), "gemm_tn");
  if (!accumulate) c.fill(0.0);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    const double* __restrict brow = b.row(i);
    const double* __restrict arow = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* __restrict crow = c.row(p);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c, bool accumulate) {
  check_gemm(a.rows(), a.cols(), b.cols(), b.rows(), c.rows(), c.cols(), "gemm_nt");
  if (!accumulate) c.fill(0.0);
  const int m = a.rows(), k = a.cols(), n = b.rows();
  // Transposing B turns the inner loop into independent adds over j, which
  // vectorizes without reassociating a reduction.
  Tensor2 bt(k, n);
  for (int j = 0; j < n; ++j) {
    const double* __restrict brow = b.row(j);
    for (int p = 0; p < k; ++p) bt(p, j) = brow[p];
  }
  for (int i = 0; i < m; ++i) {
    const double* __restrict arow = a.row(i);
    double* __restrict crow = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* __restrict btrow = bt.row(p);
      for (int j = 0; j < n; ++j) crow[j] += av * btrow[j];
    }
  }
}

}  // namespace mecsim::numkit
