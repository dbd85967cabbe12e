#pragma once

#include <string>
#include <variant>
#include <vector>

#include "chaoscorr/tensorops.hpp"

namespace chaoscorr {

// c(mu, alpha) = <phi_alpha | psi_mu>
template <typename S> struct OverlapMatrix {
  Operator<S> c;
  Eigen::VectorXd energies_full;
  Eigen::VectorXd energies_0;

  Index dim() const { return c.rows(); }
  double row_norm_defect() const {
    return (c.rowwise().squaredNorm().array() - 1.0).abs().maxCoeff();
  }
};

template <typename S>
OverlapMatrix<S> overlap_matrix(const SpectralDecomposition<S>& full,
                                const SpectralDecomposition<S>& zero) {
  if (full.dim() != zero.dim())
    throw ArgumentError("overlap_matrix: dimension mismatch");
  OverlapMatrix<S> ov;
  ov.c.noalias() = full.vectors.adjoint() * zero.vectors;
  // row mu is <psi_mu|phi_alpha> = conj(c_mu(alpha)); conjugate back.
  if constexpr (is_complex<S>::value)
    ov.c = ov.c.conjugate().eval();
  ov.energies_full = full.energies;
  ov.energies_0 = zero.energies;
  return ov;
}

struct ChaoticProfile {
  std::vector<double> bin_centers;
  std::vector<double> bin_values; // density of Lambda(E)/omega
  double bin_width = 0.0;
  Index mu_begin = 0; // [mu_begin, mu_end)
  Index mu_end = 0;
  double omega_mean = 0.0;
  Index n_states = 0; // contributing mu, summed over realizations
  std::vector<std::string> warnings;

  double normalization() const;
  double mean() const;
  double second_moment() const; // about zero
};

struct ProfileOptions {
  double range_factor = 4.0; // half-range in units of the weighted RMS of E_mu - E_alpha
};

struct MuWindow {
  Index begin = 0;
  Index end = 0;
};

MuWindow central_window(Index dim, double window_fraction);

// Mean H0 level spacing over the energy interval covered by the window.
double window_level_spacing(const Eigen::VectorXd& energies_full,
                            const Eigen::VectorXd& energies_0, MuWindow w);

// Collects (E_mu - E_alpha, |c|^2) pairs so that ensemble runs can share the
// same binning as the single-system estimator.
class ProfileAccumulator {
public:
  void add_window(const Eigen::MatrixXd& weights, const Eigen::VectorXd& energies_full,
                  const Eigen::VectorXd& energies_0, MuWindow w);
  ChaoticProfile finish(int n_bins, const ProfileOptions& opts = {}) const;

  Index n_states() const { return n_states_; }

private:
  std::vector<double> de_;
  std::vector<double> w_;
  Index n_states_ = 0;
  double spacing_sum_ = 0.0;
  int n_windows_ = 0;
  MuWindow last_{};
};

template <typename S>
ChaoticProfile lambda_profile(const OverlapMatrix<S>& ov, double window_fraction,
                              int n_bins, const ProfileOptions& opts = {}) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw ArgumentError("lambda_profile: window_fraction must be in (0, 1]");
  if (n_bins < 8)
    throw ArgumentError("lambda_profile: n_bins must be >= 8");
  const MuWindow w = central_window(ov.dim(), window_fraction);
  const Eigen::MatrixXd weights = ov.c.middleRows(w.begin, w.end - w.begin).cwiseAbs2();
  ProfileAccumulator acc;
  acc.add_window(weights, ov.energies_full, ov.energies_0, w);
  return acc.finish(n_bins, opts);
}

enum class FitShape { lorentzian, gaussian };

std::string to_string(FitShape s);
FitShape fit_shape_from_string(const std::string& s);

struct FitOptions {
  double truncation_factor = 5.0; // lorentzian only; <= 0 disables
  int max_iterations = 200;
  double relative_tolerance = 1e-8;
};

struct FitResult {
  FitShape shape = FitShape::lorentzian;
  double rate = 0.0; // Gamma or K
  double residual = 0.0;
  double covariance = 0.0;
  double initial_guess = 0.0;
  int iterations = 0;
  int n_points = 0;
};

double profile_hwhm(const ChaoticProfile& p);
double lorentzian_density(double e, double gamma);
double gaussian_density(double e, double k);

FitResult fit_profile(const ChaoticProfile& profile, FitShape shape,
                      const FitOptions& opts = {});

struct LorentzianKernel {
  double gamma;
};
struct GaussianKernel {
  double k;
};
struct NumericKernel {
  ChaoticProfile profile;
};
using OmegaSource = std::variant<LorentzianKernel, GaussianKernel, NumericKernel>;

OmegaSource omega_source(const FitResult& fit);
std::string describe(const OmegaSource& s);

double omega_of_t(const OmegaSource& source, double t);
// Sine transform of the profile; zero for a symmetric profile.
double omega_asymmetry(const ChaoticProfile& profile, double t);

} // namespace chaoscorr
