#pragma once

#include <string>
#include <vector>

#include "chaoscorr/tensorops.hpp"

namespace chaoscorr {

enum class CorrelatorKind { one_point, two_point, four_point, otoc, squared_commutator };

std::string to_string(CorrelatorKind k);
std::string to_string(HamiltonianTag h);

struct CorrelatorSeries {
  std::vector<double> times;
  std::vector<cplx> values;
  CorrelatorKind kind = CorrelatorKind::one_point;
  std::string hamiltonian_tag = "full"; // full | noninteracting | prediction
  std::vector<std::string> observable_tags;

  std::size_t size() const { return times.size(); }
  std::vector<double> real() const;
  std::vector<double> imag() const;
};

namespace detail {

constexpr Index kTimeChunk = 128;

inline void check_dims(Index d, const StateVector& state) {
  if (state.size() != d)
    throw ArgumentError("state dimension " + std::to_string(state.size()) +
                        " does not match decomposition dimension " + std::to_string(d));
}

template <typename Derived> void check_op(Index d, const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() != d || a.cols() != d)
    throw ArgumentError("operator dimension " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " does not match " + std::to_string(d));
}

// P(i, k) = exp(-i E_i t_k)
inline Eigen::MatrixXcd phases(const Eigen::VectorXd& e, std::span<const double> t) {
  Eigen::MatrixXcd p(e.size(), Index(t.size()));
  for (Index k = 0; k < Index(t.size()); ++k)
    p.col(k) = (cplx(0, -1) * t[k] * e.array()).exp().matrix();
  return p;
}

// Columns v(t_k) = A(t_k) x in the site basis, given x_e = V^H x and the
// eigenbasis operator a = V^H A V.
template <typename S>
Eigen::MatrixXcd heisenberg_apply(const SpectralDecomposition<S>& dec, const Operator<S>& a,
                                  const Eigen::VectorXcd& x_e, const Eigen::MatrixXcd& ph) {
  Eigen::MatrixXcd y = ph.array().colwise() * x_e.array();
  Eigen::MatrixXcd z;
  z.noalias() = a * y;
  z.array() *= ph.array().conjugate();
  Eigen::MatrixXcd out;
  out.noalias() = dec.vectors * z;
  return out;
}

template <typename F>
void for_each_chunk(std::span<const double> times, F&& f) {
  const Index n = Index(times.size());
  for (Index k0 = 0; k0 < n; k0 += kTimeChunk) {
    const Index m = std::min(kTimeChunk, n - k0);
    f(k0, times.subspan(std::size_t(k0), std::size_t(m)));
  }
}

inline std::string tag_of(HamiltonianTag h) { return to_string(h); }

} // namespace detail

template <typename S, typename D>
CorrelatorSeries one_point_series(const StateVector& state, const SpectralDecomposition<S>& dec,
                                  const Eigen::MatrixBase<D>& a1, std::span<const double> times,
                                  std::vector<std::string> tags = {}) {
  const Index d = dec.dim();
  detail::check_dims(d, state);
  detail::check_op(d, a1);
  const Operator<S> a = to_eigenbasis(dec, a1);
  const Eigen::VectorXcd b = dec.vectors.adjoint() * state;

  CorrelatorSeries out;
  out.kind = CorrelatorKind::one_point;
  out.hamiltonian_tag = detail::tag_of(dec.tag);
  out.observable_tags = std::move(tags);
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  detail::for_each_chunk(times, [&](Index k0, std::span<const double> ts) {
    Eigen::MatrixXcd bt = detail::phases(dec.energies, ts);
    bt.array().colwise() *= b.array();
    Eigen::MatrixXcd abt;
    abt.noalias() = a * bt;
    for (Index k = 0; k < Index(ts.size()); ++k)
      out.values[std::size_t(k0 + k)] = bt.col(k).dot(abt.col(k));
  });
  return out;
}

// <state| A1(t_k) A2(t2) |state>, via the shifted state exp(-i H t2)|state>.
template <typename S, typename D1, typename D2>
CorrelatorSeries two_point_series(const StateVector& state, const SpectralDecomposition<S>& dec,
                                  const Eigen::MatrixBase<D1>& a1,
                                  const Eigen::MatrixBase<D2>& a2,
                                  std::span<const double> times, double t2,
                                  std::vector<std::string> tags = {}) {
  const Index d = dec.dim();
  detail::check_dims(d, state);
  detail::check_op(d, a1);
  detail::check_op(d, a2);
  const Operator<S> a = to_eigenbasis(dec, a1);
  const StateVector shifted = t2 == 0.0 ? state : evolve_state(dec, state, t2);
  const Eigen::VectorXcd b = dec.vectors.adjoint() * shifted;
  const StateVector a2psi = a2 * shifted;
  const Eigen::VectorXcd w = dec.vectors.adjoint() * a2psi;

  CorrelatorSeries out;
  out.kind = CorrelatorKind::two_point;
  out.hamiltonian_tag = detail::tag_of(dec.tag);
  out.observable_tags = std::move(tags);
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  detail::for_each_chunk(times, [&](Index k0, std::span<const double> ts) {
    std::vector<double> tau(ts.begin(), ts.end());
    for (auto& x : tau)
      x -= t2;
    const Eigen::MatrixXcd ph = detail::phases(dec.energies, tau);
    Eigen::MatrixXcd bt = ph.array().colwise() * b.array();
    Eigen::MatrixXcd wt = ph.array().colwise() * w.array();
    Eigen::MatrixXcd awt;
    awt.noalias() = a * wt;
    for (Index k = 0; k < Index(ts.size()); ++k)
      out.values[std::size_t(k0 + k)] = bt.col(k).dot(awt.col(k));
  });
  return out;
}

// <state| A1(t) A2 A3(t) A4 |state>, as (A1(t)^H psi)^H A2 (A3(t) A4 psi).
template <typename S, typename D1, typename D2, typename D3, typename D4>
CorrelatorSeries four_point_series(const StateVector& state, const SpectralDecomposition<S>& dec,
                                   const Eigen::MatrixBase<D1>& a1,
                                   const Eigen::MatrixBase<D2>& a2,
                                   const Eigen::MatrixBase<D3>& a3,
                                   const Eigen::MatrixBase<D4>& a4,
                                   std::span<const double> times,
                                   std::vector<std::string> tags = {}) {
  const Index d = dec.dim();
  detail::check_dims(d, state);
  detail::check_op(d, a1);
  detail::check_op(d, a2);
  detail::check_op(d, a3);
  detail::check_op(d, a4);
  const Operator<S> a1e_adj = to_eigenbasis(dec, a1).adjoint();
  const Operator<S> a3e = to_eigenbasis(dec, a3);
  const Operator<S> a2m = a2;
  const Eigen::VectorXcd b = dec.vectors.adjoint() * state;
  const StateVector a4psi = a4 * state;
  const Eigen::VectorXcd w = dec.vectors.adjoint() * a4psi;

  CorrelatorSeries out;
  const bool otoc = (a1 - a3).cwiseAbs().maxCoeff() == 0.0 &&
                    (a2 - a4).cwiseAbs().maxCoeff() == 0.0;
  out.kind = otoc ? CorrelatorKind::otoc : CorrelatorKind::four_point;
  out.hamiltonian_tag = detail::tag_of(dec.tag);
  out.observable_tags = std::move(tags);
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  detail::for_each_chunk(times, [&](Index k0, std::span<const double> ts) {
    const Eigen::MatrixXcd ph = detail::phases(dec.energies, ts);
    const Eigen::MatrixXcd left = detail::heisenberg_apply(dec, a1e_adj, b, ph);
    const Eigen::MatrixXcd right = detail::heisenberg_apply(dec, a3e, w, ph);
    Eigen::MatrixXcd mid;
    mid.noalias() = a2m * right;
    for (Index k = 0; k < Index(ts.size()); ++k)
      out.values[std::size_t(k0 + k)] = left.col(k).dot(mid.col(k));
  });
  return out;
}

struct SquaredCommutatorParts {
  CorrelatorSeries total; // D + I - 2 Re F
  CorrelatorSeries d;     // <A2 A1(t)^2 A2>
  CorrelatorSeries i;     // <A1(t) A2^2 A1(t)>
  CorrelatorSeries f;     // <A1(t) A2 A1(t) A2>
};

// For Hermitian A1, A2:  X = A1(t) A2 psi,  Y = A2 A1(t) psi,
// D = |X|^2, I = |Y|^2, F = <Y, X>, and C = |X - Y|^2 = D + I - 2 Re F.
template <typename S, typename D1, typename D2>
SquaredCommutatorParts squared_commutator_parts(const StateVector& state,
                                                const SpectralDecomposition<S>& dec,
                                                const Eigen::MatrixBase<D1>& a1,
                                                const Eigen::MatrixBase<D2>& a2,
                                                std::span<const double> times,
                                                std::vector<std::string> tags = {}) {
  const Index d = dec.dim();
  detail::check_dims(d, state);
  detail::check_op(d, a1);
  detail::check_op(d, a2);
  const Operator<S> a1e = to_eigenbasis(dec, a1);
  const Operator<S> a2m = a2;
  const Eigen::VectorXcd b = dec.vectors.adjoint() * state;
  const StateVector a2psi = a2m * state;
  const Eigen::VectorXcd w = dec.vectors.adjoint() * a2psi;

  SquaredCommutatorParts out;
  auto init = [&](CorrelatorSeries& s, CorrelatorKind k) {
    s.kind = k;
    s.hamiltonian_tag = detail::tag_of(dec.tag);
    s.observable_tags = tags;
    s.times.assign(times.begin(), times.end());
    s.values.resize(times.size());
  };
  init(out.total, CorrelatorKind::squared_commutator);
  init(out.d, CorrelatorKind::four_point);
  init(out.i, CorrelatorKind::four_point);
  init(out.f, CorrelatorKind::otoc);
  detail::for_each_chunk(times, [&](Index k0, std::span<const double> ts) {
    const Eigen::MatrixXcd ph = detail::phases(dec.energies, ts);
    const Eigen::MatrixXcd x = detail::heisenberg_apply(dec, a1e, w, ph);
    const Eigen::MatrixXcd a1psi = detail::heisenberg_apply(dec, a1e, b, ph);
    Eigen::MatrixXcd y;
    y.noalias() = a2m * a1psi;
    for (Index k = 0; k < Index(ts.size()); ++k) {
      const std::size_t j = std::size_t(k0 + k);
      out.d.values[j] = x.col(k).squaredNorm();
      out.i.values[j] = y.col(k).squaredNorm();
      out.f.values[j] = y.col(k).dot(x.col(k));
      out.total.values[j] = (x.col(k) - y.col(k)).squaredNorm();
    }
  });
  return out;
}

template <typename S, typename D1, typename D2>
CorrelatorSeries squared_commutator_series(const StateVector& state,
                                           const SpectralDecomposition<S>& dec,
                                           const Eigen::MatrixBase<D1>& a1,
                                           const Eigen::MatrixBase<D2>& a2,
                                           std::span<const double> times,
                                           std::vector<std::string> tags = {}) {
  return squared_commutator_parts(state, dec, a1, a2, times, std::move(tags)).total;
}

template <typename S, typename D>
double diagonal_ensemble_average(const StateVector& state, const SpectralDecomposition<S>& dec,
                                 const Eigen::MatrixBase<D>& a) {
  const Index d = dec.dim();
  detail::check_dims(d, state);
  detail::check_op(d, a);
  const Eigen::VectorXcd b = dec.vectors.adjoint() * state;
  Operator<S> av;
  av.noalias() = a * dec.vectors;
  // diag(V^H A V)_mu = sum_i conj(V_i,mu) (A V)_i,mu
  const Eigen::Matrix<S, Eigen::Dynamic, 1> diag =
      (dec.vectors.conjugate().array() * av.array()).colwise().sum().transpose();
  cplx s = 0.0;
  for (Index mu = 0; mu < d; ++mu)
    s += std::norm(b(mu)) * cplx(diag(mu));
  return s.real();
}

} // namespace chaoscorr
