#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "chaoscorr/tensorops.hpp"

namespace chaoscorr {

struct ChainParams {
  int n_sites = 12;
  double bz_s = 0.4;
  double bx_s = 0.4;
  double bx_b = 0.3;
  double jx_b = 0.7;
  double jz_i = 0.2;
  double jx_i = 0.1;
  int r1 = 5;
  int r2 = 10;

  void validate() const;
  std::string canonical() const;

  static ChainParams weak_coupling() { return {}; }
  static ChainParams strong_coupling() {
    ChainParams p;
    p.jx_i = 0.8;
    return p;
  }
};

struct RmtParams {
  int dim = 400;
  double omega = 0.01;
  double g = 0.1;

  // g = 0 is accepted by the model builder (uncoupled limit); ensemble
  // experiments that need a linewidth require g > 0.
  void validate(bool allow_zero_coupling = true) const;
  std::string canonical() const;
  double gamma_theory() const;
};

template <typename S> struct HamiltonianSet {
  Operator<S> h0;
  Operator<S> h_full;
  std::optional<SpectralDecomposition<S>> decomp0;
  std::optional<SpectralDecomposition<S>> decomp_full;

  Index dim() const { return h0.rows(); }

  void diagonalize() {
    if (!decomp0) {
      decomp0 = hermitian_eigendecomposition(h0);
      decomp0->tag = HamiltonianTag::noninteracting;
    }
    if (!decomp_full) {
      decomp_full = hermitian_eigendecomposition(h_full);
      decomp_full->tag = HamiltonianTag::full;
    }
  }
};

// Individual pieces, exposed for tests and for alternative assemblies.
Operator<double> chain_system_part(const ChainParams& p);
Operator<double> chain_bath_part(const ChainParams& p);
Operator<double> chain_interaction_part(const ChainParams& p);

HamiltonianSet<double> build_spin_chain(const ChainParams& p);

Operator<double> sample_goe(int dim, double g, std::mt19937_64& gen);
HamiltonianSet<double> build_deutsch_model(const RmtParams& p, std::uint64_t seed);

struct InitialStateSpec {
  enum class Kind { h0_eigenstate, neel, random_product };
  Kind kind = Kind::h0_eigenstate;
  std::int64_t index = 2041;
  int index_base = 1;
  std::uint64_t seed = 0;
  int n_sites = 0;
  // Post-selection |<H0> - E_mid| <= window * (E_max - E_min); <= 0 disables.
  double acceptance_window = 0.05;
  int max_attempts = 100000;
};

// (x)_i (cos th_i |up> + sin th_i |down>)
StateVector product_state(std::span<const double> angles);
StateVector neel_state(int n_sites);

template <typename URBG>
StateVector random_product_state(int n_sites, URBG& gen) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
  std::vector<double> th(n_sites);
  for (auto& x : th)
    x = angle(gen);
  return product_state(th);
}

template <typename S>
double h0_expectation(const SpectralDecomposition<S>& decomp0, const StateVector& psi) {
  const Eigen::VectorXcd b = decomp0.vectors.adjoint() * psi;
  return (b.cwiseAbs2().array() * decomp0.energies.array()).sum();
}

template <typename S, typename URBG>
StateVector post_selected_product_state(const InitialStateSpec& spec,
                                        const SpectralDecomposition<S>& decomp0,
                                        URBG& gen) {
  if (hilbert_dim(spec.n_sites) != decomp0.dim())
    throw ArgumentError("random_product: n_sites inconsistent with H0 dimension");
  const double e_min = decomp0.energies(0);
  const double e_max = decomp0.energies(decomp0.dim() - 1);
  const double e_mid = 0.5 * (e_min + e_max);
  const double tol = spec.acceptance_window * (e_max - e_min);
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    StateVector psi = random_product_state(spec.n_sites, gen);
    if (spec.acceptance_window <= 0.0 ||
        std::abs(h0_expectation(decomp0, psi) - e_mid) <= tol)
      return psi;
  }
  throw NumericError("random_product: no draw inside the mid-spectrum window after " +
                     std::to_string(spec.max_attempts) + " attempts");
}

template <typename S>
StateVector prepare_initial_state(const InitialStateSpec& spec,
                                  const SpectralDecomposition<S>& decomp0) {
  using Kind = InitialStateSpec::Kind;
  switch (spec.kind) {
  case Kind::h0_eigenstate: {
    const std::int64_t k = spec.index - spec.index_base;
    if (k < 0 || k >= decomp0.dim())
      throw ArgumentError("h0_eigenstate index " + std::to_string(spec.index) +
                          " out of range for dimension " + std::to_string(decomp0.dim()));
    return decomp0.vectors.col(k).template cast<cplx>();
  }
  case Kind::neel: {
    if (hilbert_dim(spec.n_sites) != decomp0.dim())
      throw ArgumentError("neel: n_sites inconsistent with H0 dimension");
    return neel_state(spec.n_sites);
  }
  case Kind::random_product: {
    std::mt19937_64 gen(spec.seed);
    return post_selected_product_state(spec, decomp0, gen);
  }
  }
  throw ArgumentError("unknown initial state kind");
}

} // namespace chaoscorr
