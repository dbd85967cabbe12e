#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "chaoscorr/errors.hpp"

namespace chaoscorr {

using cplx = std::complex<double>;
using Index = Eigen::Index;

template <typename S>
using Operator = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using StateVector = Eigen::VectorXcd;

template <typename S> struct is_complex : std::false_type {};
template <typename T> struct is_complex<std::complex<T>> : std::true_type {};

enum class HamiltonianTag { full, noninteracting };

template <typename S> struct SpectralDecomposition {
  Eigen::VectorXd energies;
  Operator<S> vectors;
  HamiltonianTag tag = HamiltonianTag::full;

  Index dim() const { return energies.size(); }
};

namespace pauli {

template <typename S = double> Operator<S> identity() {
  return Operator<S>::Identity(2, 2);
}
template <typename S = double> Operator<S> x() {
  Operator<S> m(2, 2);
  m << S(0), S(1), S(1), S(0);
  return m;
}
inline Operator<cplx> y() {
  Operator<cplx> m(2, 2);
  m << 0.0, cplx(0, -1), cplx(0, 1), 0.0;
  return m;
}
template <typename S = double> Operator<S> z() {
  Operator<S> m(2, 2);
  m << S(1), S(0), S(0), S(-1);
  return m;
}
// sigma^+ = |up><down|; with up <-> bit 0 this is the (0,1) element.
template <typename S = double> Operator<S> plus() {
  Operator<S> m = Operator<S>::Zero(2, 2);
  m(0, 1) = S(1);
  return m;
}
template <typename S = double> Operator<S> minus() {
  Operator<S> m = Operator<S>::Zero(2, 2);
  m(1, 0) = S(1);
  return m;
}
template <typename S = double> Operator<S> projector_up() {
  Operator<S> m = Operator<S>::Zero(2, 2);
  m(0, 0) = S(1);
  return m;
}

} // namespace pauli

template <typename S> struct SiteFactor {
  int site; // 1-based
  Operator<S> base;
};

inline Index hilbert_dim(int n_sites) {
  if (n_sites < 1 || n_sites > 30)
    throw ArgumentError("n_sites must be in [1, 30]");
  return Index(1) << n_sites;
}

// Spin of site k (1-based) in basis state b: bit (n - k) of b, 0 = up.
inline int site_bit(Index b, int site, int n_sites) {
  return int((b >> (n_sites - site)) & 1);
}

// M += coeff * (x_k base_k), identity on unlisted sites. Loops over the
// product basis, so cost is dim * 2^(#factors) instead of a dense kron.
template <typename S>
void add_product_term(Operator<S>& m, S coeff,
                      std::span<const SiteFactor<S>> factors, int n_sites) {
  const Index dim = hilbert_dim(n_sites);
  if (m.rows() != dim || m.cols() != dim)
    throw ArgumentError("add_product_term: target has wrong dimension");
  const int k = int(factors.size());
  for (int j = 0; j < k; ++j) {
    const auto& f = factors[j];
    if (f.site < 1 || f.site > n_sites)
      throw ArgumentError("site " + std::to_string(f.site) +
                          " out of range [1, " + std::to_string(n_sites) + "]");
    if (f.base.rows() != 2 || f.base.cols() != 2)
      throw ArgumentError("site operator must be 2x2");
    for (int i = 0; i < j; ++i)
      if (factors[i].site == f.site)
        throw ArgumentError("repeated site in product term");
  }
  for (Index b = 0; b < dim; ++b) {
    for (unsigned out = 0; out < (1u << k); ++out) {
      S amp = coeff;
      Index row = b;
      for (int j = 0; j < k && amp != S(0); ++j) {
        const int shift = n_sites - factors[j].site;
        const int in_bit = int((b >> shift) & 1);
        const int out_bit = int((out >> j) & 1);
        amp *= factors[j].base(out_bit, in_bit);
        row = (row & ~(Index(1) << shift)) | (Index(out_bit) << shift);
      }
      if (amp != S(0))
        m(row, b) += amp;
    }
  }
}

template <typename Derived>
Operator<typename Derived::Scalar>
embed_site_operator(const Eigen::MatrixBase<Derived>& base, int site,
                    int n_sites) {
  using S = typename Derived::Scalar;
  if (base.rows() != 2 || base.cols() != 2)
    throw ArgumentError("embed_site_operator: base must be 2x2");
  if (site < 1 || site > n_sites)
    throw ArgumentError("embed_site_operator: site " + std::to_string(site) +
                        " out of range [1, " + std::to_string(n_sites) + "]");
  const Index dim = hilbert_dim(n_sites);
  Operator<S> m = Operator<S>::Zero(dim, dim);
  const SiteFactor<S> f{site, base.eval()};
  add_product_term<S>(m, S(1), std::span<const SiteFactor<S>>(&f, 1), n_sites);
  return m;
}

template <typename Derived>
double hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols())
    throw ArgumentError("operator must be square");
  if (m.size() == 0)
    return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

template <typename Derived>
void require_hermitian(const Eigen::MatrixBase<Derived>& m, double tol,
                       const char* what) {
  const double defect = hermiticity_defect(m);
  if (!(defect <= tol))
    throw ValidationError(std::string(what) + " is not Hermitian (max|M - M^H| = " +
                          std::to_string(defect) + ")");
}

namespace detail {

// Rotate column so its largest-magnitude entry (first one on ties) is real
// positive.
template <typename S> void fix_phase(Eigen::Ref<Eigen::Matrix<S, Eigen::Dynamic, 1>> v) {
  Index best = 0;
  double best_abs = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > best_abs * (1.0 + 1e-12)) {
      best_abs = a;
      best = i;
    }
  }
  if (best_abs <= 0.0)
    return;
  if constexpr (is_complex<S>::value) {
    v *= std::conj(v(best)) / best_abs;
    v(best) = S(best_abs, 0.0);
  } else {
    if (v(best) < 0)
      v = -v;
  }
}

template <typename S>
bool lex_less(const Eigen::Matrix<S, Eigen::Dynamic, 1>& a,
              const Eigen::Matrix<S, Eigen::Dynamic, 1>& b) {
  constexpr double q = 1e8;
  for (Index i = 0; i < a.size(); ++i) {
    double ar, br, ai = 0, bi = 0;
    if constexpr (is_complex<S>::value) {
      ar = std::round(a(i).real() * q), br = std::round(b(i).real() * q);
      ai = std::round(a(i).imag() * q), bi = std::round(b(i).imag() * q);
    } else {
      ar = std::round(a(i) * q), br = std::round(b(i) * q);
    }
    if (ar != br)
      return ar < br;
    if (ai != bi)
      return ai < bi;
  }
  return false;
}

} // namespace detail

template <typename Derived>
SpectralDecomposition<typename Derived::Scalar>
hermitian_eigendecomposition(const Eigen::MatrixBase<Derived>& op) {
  using S = typename Derived::Scalar;
  if (op.rows() != op.cols() || op.rows() == 0)
    throw ArgumentError("hermitian_eigendecomposition: operator must be square and nonempty");
  require_hermitian(op, 1e-10, "hermitian_eigendecomposition input");

  Eigen::SelfAdjointEigenSolver<Operator<S>> es(op.eval(), Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw NumericError("self-adjoint eigensolver failed to converge (dim " +
                       std::to_string(op.rows()) + ")");

  SpectralDecomposition<S> out;
  out.energies = es.eigenvalues();
  out.vectors = es.eigenvectors();
  const Index n = out.dim();
  for (Index k = 0; k < n; ++k)
    detail::fix_phase<S>(out.vectors.col(k));

  // Order columns inside numerically degenerate groups.
  const double scale = std::max(1.0, out.energies.cwiseAbs().maxCoeff());
  Index start = 0;
  while (start < n) {
    Index stop = start + 1;
    while (stop < n && out.energies(stop) - out.energies(stop - 1) <= 1e-10 * scale)
      ++stop;
    if (stop - start > 1) {
      std::vector<Index> order(stop - start);
      std::iota(order.begin(), order.end(), start);
      using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;
      std::vector<Col> cols;
      for (Index k = start; k < stop; ++k)
        cols.push_back(out.vectors.col(k));
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return detail::lex_less<S>(cols[a - start], cols[b - start]);
      });
      for (Index k = start; k < stop; ++k)
        out.vectors.col(k) = cols[order[k - start] - start];
    }
    start = stop;
  }
  return out;
}

// V^H A V, the operator in the energy eigenbasis.
template <typename S, typename Derived>
Operator<S> to_eigenbasis(const SpectralDecomposition<S>& decomp,
                          const Eigen::MatrixBase<Derived>& op) {
  if (op.rows() != decomp.dim() || op.cols() != decomp.dim())
    throw ArgumentError("operator dimension does not match decomposition");
  Operator<S> tmp;
  tmp.noalias() = op * decomp.vectors;
  Operator<S> out;
  out.noalias() = decomp.vectors.adjoint() * tmp;
  return out;
}

template <typename S, typename Derived>
Operator<cplx> heisenberg_operator(const SpectralDecomposition<S>& decomp,
                                   const Eigen::MatrixBase<Derived>& op, double t) {
  const Operator<S> a = to_eigenbasis(decomp, op);
  const Eigen::VectorXcd ph =
      (cplx(0, 1) * t * decomp.energies.array()).exp().matrix();
  const Operator<cplx> rotated =
      ph.asDiagonal() * a.template cast<cplx>() * ph.conjugate().asDiagonal();
  Operator<cplx> tmp;
  tmp.noalias() = decomp.vectors.template cast<cplx>() * rotated;
  Operator<cplx> out;
  out.noalias() = tmp * decomp.vectors.adjoint().template cast<cplx>();
  return out;
}

template <typename S>
StateVector evolve_state(const SpectralDecomposition<S>& decomp,
                         const StateVector& state, double t) {
  if (state.size() != decomp.dim())
    throw ArgumentError("state dimension does not match decomposition");
  StateVector b = decomp.vectors.adjoint() * state;
  b.array() *= (cplx(0, -1) * t * decomp.energies.array()).exp();
  return decomp.vectors * b;
}

template <typename Derived>
cplx expectation(const StateVector& state, const Eigen::MatrixBase<Derived>& op) {
  if (op.rows() != state.size() || op.cols() != state.size())
    throw ArgumentError("expectation: dimension mismatch");
  const StateVector a = op * state;
  return state.dot(a);
}

inline void require_normalized(const StateVector& state, double tol = 1e-12) {
  const double n = state.norm();
  if (!(std::abs(n - 1.0) <= tol))
    throw ValidationError("state is not normalized (norm " + std::to_string(n) + ")");
}

} // namespace chaoscorr
