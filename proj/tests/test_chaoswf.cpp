#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chaoscorr/chaoswf.hpp"
#include "oracles.hpp"

using namespace chaoscorr;
using Eigen::MatrixXd;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Profile holding exact samples of a density on a symmetric grid.
ChaoticProfile sampled(double half, int n_bins, double (*f)(double, double), double rate) {
  ChaoticProfile p;
  p.bin_width = 2 * half / n_bins;
  for (int k = 0; k < n_bins; ++k) {
    const double e = -half + (k + 0.5) * p.bin_width;
    p.bin_centers.push_back(e);
    p.bin_values.push_back(f(e, rate));
  }
  p.n_states = 1;
  return p;
}

// Synthetic overlaps with |c_mu(alpha)|^2 = omega L(E_mu - E_alpha). The full
// levels carry quasi-random offsets so differences fill bins uniformly.
OverlapMatrix<double> synthetic_lorentzian(int dim, double omega, double gamma) {
  OverlapMatrix<double> ov;
  ov.energies_0.resize(dim);
  ov.energies_full.resize(dim);
  const double golden = 0.6180339887498949;
  for (int a = 0; a < dim; ++a) {
    ov.energies_0(a) = (a - 0.5 * (dim - 1)) * omega;
    const double frac = std::fmod((a + 1) * golden, 1.0);
    ov.energies_full(a) = ov.energies_0(a) + (frac - 0.5) * omega;
  }
  ov.c.resize(dim, dim);
  for (int mu = 0; mu < dim; ++mu)
    for (int a = 0; a < dim; ++a)
      ov.c(mu, a) =
          std::sqrt(omega * lorentzian_density(ov.energies_full(mu) - ov.energies_0(a), gamma));
  return ov;
}

} // namespace

TEST_CASE("overlap: identical decompositions give the identity") {
  const MatrixXd h = oracle::random_symmetric(12, 1);
  const auto d = hermitian_eigendecomposition(h);
  const auto ov = overlap_matrix(d, d);
  CHECK((ov.c - MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(ov.row_norm_defect() <= 1e-10);
}

TEST_CASE("overlap: H = sigma_x against H0 = sigma_z") {
  const auto full = hermitian_eigendecomposition(MatrixXd(pauli::x()));
  const auto zero = hermitian_eigendecomposition(MatrixXd(pauli::z()));
  const auto ov = overlap_matrix(full, zero);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(ov.c(i, j) * ov.c(i, j) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("overlap: complex Hermitian rows are unit vectors and c = <phi|psi>") {
  const auto full = hermitian_eigendecomposition(oracle::random_hermitian(32, 2));
  const auto zero = hermitian_eigendecomposition(oracle::random_hermitian(32, 3));
  const auto ov = overlap_matrix(full, zero);
  CHECK(ov.row_norm_defect() <= 1e-10);
  // c_mu(alpha) = <phi_alpha|psi_mu>
  const cplx direct = zero.vectors.col(4).dot(full.vectors.col(7));
  CHECK(std::abs(ov.c(7, 4) - direct) <= 1e-13);
  CHECK_THROWS_AS(overlap_matrix(full, hermitian_eigendecomposition(oracle::random_hermitian(8, 4))),
                  ArgumentError);
}

TEST_CASE("profile: identical decompositions concentrate in the central bin") {
  const auto d = hermitian_eigendecomposition(oracle::random_symmetric(64, 5));
  const auto p = lambda_profile(overlap_matrix(d, d), 0.2, 101);
  for (int k = 0; k < 101; ++k)
    if (k != 50)
      CHECK(p.bin_values[k] * p.bin_width <= 1e-14);
  CHECK(p.bin_values[50] * p.bin_width == doctest::Approx(1.0));
}

TEST_CASE("profile: synthetic Lorentzian is recovered within 3% RMS") {
  const double gamma = 0.1;
  const auto ov = synthetic_lorentzian(2000, 0.005, gamma);
  const auto p = lambda_profile(ov, 0.2, 101);
  double ss = 0.0, peak = 0.0;
  for (std::size_t k = 0; k < p.bin_values.size(); ++k) {
    const double e0 = p.bin_centers[k] - 0.5 * p.bin_width, e1 = e0 + p.bin_width;
    // bin average of the exact density
    const double expect = (std::atan(e1 / gamma) - std::atan(e0 / gamma)) / (kPi * p.bin_width);
    ss += (p.bin_values[k] - expect) * (p.bin_values[k] - expect);
    peak = std::max(peak, expect);
  }
  CHECK(std::sqrt(ss / p.bin_values.size()) / peak <= 0.03);
  // heavy tails: the captured mass is the Lorentzian mass inside the bin range
  const double half = 0.5 * p.bin_width * p.bin_values.size();
  CHECK(p.normalization() == doctest::Approx(2 / kPi * std::atan(half / gamma)).epsilon(0.005));
  CHECK(p.omega_mean == doctest::Approx(0.005).epsilon(1e-6));
  CHECK(p.mu_end - p.mu_begin == 400);
  for (double v : p.bin_values)
    CHECK(v >= 0.0);

  const auto fit = fit_profile(p, FitShape::lorentzian);
  CHECK(fit.rate == doctest::Approx(gamma).epsilon(0.05));
}

TEST_CASE("profile: argument checks and sparse-data warning") {
  const auto full = hermitian_eigendecomposition(MatrixXd(pauli::x()));
  const auto zero = hermitian_eigendecomposition(MatrixXd(pauli::z()));
  const auto ov = overlap_matrix(full, zero);
  CHECK_THROWS_AS(lambda_profile(ov, 0.0, 101), ArgumentError);
  CHECK_THROWS_AS(lambda_profile(ov, 1.5, 101), ArgumentError);
  CHECK_THROWS_AS(lambda_profile(ov, 0.5, 7), ArgumentError);
  const auto p = lambda_profile(ov, 1.0, 101);
  CHECK_FALSE(p.warnings.empty());
}

TEST_CASE("fit: exact Lorentzian and Gaussian densities are fixed points") {
  const auto lp = sampled(2.0, 201, lorentzian_density, 0.1);
  const auto lf = fit_profile(lp, FitShape::lorentzian);
  CHECK(std::abs(lf.rate - 0.1) <= 1e-6);
  CHECK(lf.residual <= 1e-8);
  CHECK(lf.rate > 0.0);

  const auto gp = sampled(6.0, 201, gaussian_density, 0.31);
  const auto gf = fit_profile(gp, FitShape::gaussian);
  CHECK(std::abs(gf.rate - 0.31) <= 1e-6);

  for (double gamma : {0.03, 0.087, 0.5}) {
    const auto p = sampled(30 * gamma, 151, lorentzian_density, gamma);
    CHECK(std::abs(fit_profile(p, FitShape::lorentzian).rate - gamma) <= 1e-6);
  }
  for (double k : {0.05, 0.234, 1.0}) {
    const auto p = sampled(12 * std::sqrt(k), 151, gaussian_density, k);
    CHECK(std::abs(fit_profile(p, FitShape::gaussian).rate - k) <= 1e-6);
  }
}

TEST_CASE("fit: initial guesses from half width and second moment") {
  const auto lp = sampled(2.0, 401, lorentzian_density, 0.1);
  CHECK(profile_hwhm(lp) == doctest::Approx(0.1).epsilon(0.02));
  const auto gp = sampled(6.0, 401, gaussian_density, 0.31);
  // second moment of the density (4 pi K)^-1/2 exp(-E^2/4K) is 2K
  CHECK(fit_profile(gp, FitShape::gaussian).initial_guess == doctest::Approx(0.31).epsilon(1e-3));
}

TEST_CASE("fit: non-convergence reports the last iterate") {
  const auto lp = sampled(2.0, 201, lorentzian_density, 0.1);
  FitOptions o;
  o.max_iterations = 1;
  o.relative_tolerance = 1e-15;
  // a Gaussian model on Lorentzian data needs more than one step
  try {
    fit_profile(lp, FitShape::gaussian, o);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("last iterate") != std::string::npos);
  }
  CHECK_THROWS_AS(fit_profile(ChaoticProfile{}, FitShape::lorentzian), ArgumentError);
}

TEST_CASE("omega: closed forms") {
  CHECK(omega_of_t(LorentzianKernel{0.087}, 0.0) == 1.0);
  CHECK(omega_of_t(GaussianKernel{0.31}, 0.0) == 1.0);
  CHECK(omega_of_t(GaussianKernel{0.31}, 1.0) == doctest::Approx(0.7334).epsilon(1e-4));
  CHECK(omega_of_t(LorentzianKernel{0.087}, 2.0) == doctest::Approx(std::exp(-0.174)));
}

TEST_CASE("omega: symmetry and monotone decay") {
  const auto lp = sampled(5.0, 2001, lorentzian_density, 0.1);
  const std::vector<OmegaSource> sources{LorentzianKernel{0.087}, GaussianKernel{0.31},
                                         NumericKernel{lp}};
  for (const auto& s : sources)
    for (double t : {0.1, 1.0, 3.3, 17.0})
      CHECK(omega_of_t(s, t) == omega_of_t(s, -t));
  for (std::size_t i = 0; i < 2; ++i) {
    double prev = omega_of_t(sources[i], 0.0);
    for (int k = 1; k <= 200; ++k) {
      const double v = omega_of_t(sources[i], 0.05 * k);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("omega: numeric transform of a Lorentzian profile") {
  const auto lp = sampled(5.0, 2001, lorentzian_density, 0.1);
  const NumericKernel nk{lp};
  CHECK(std::abs(omega_of_t(nk, 0.0) - 1.0) <= 0.02);
  for (int k = 0; k <= 40; ++k) {
    const double t = 0.5 * k;
    CHECK(std::abs(omega_of_t(nk, t) - std::exp(-0.1 * t)) <= 0.02);
  }
  // symmetric profile: no sine component
  CHECK(std::abs(omega_asymmetry(lp, 3.0)) <= 1e-12);
  CHECK(describe(OmegaSource{nk}).find("numeric") == 0);
}

TEST_CASE("fit shape names") {
  CHECK(fit_shape_from_string("lorentzian") == FitShape::lorentzian);
  CHECK(fit_shape_from_string(to_string(FitShape::gaussian)) == FitShape::gaussian);
  CHECK_THROWS_AS(fit_shape_from_string("voigt"), ArgumentError);
}
