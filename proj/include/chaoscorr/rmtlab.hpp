#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chaoscorr/chaoswf.hpp"
#include "chaoscorr/models.hpp"

namespace chaoscorr {

struct EnsembleStats {
  std::size_t n_realizations = 0;
  double mean = 0.0;
  std::optional<double> std_error; // absent when n_realizations < 2
  std::vector<double> per_realization;

  static EnsembleStats from_samples(std::vector<double> xs);
};

std::uint64_t realization_seed(std::uint64_t seed, std::uint64_t realization);

// Runs fn(r) for r in [0, n) on up to `threads` workers. fn must write only
// to slot r so results do not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct EnsembleOptions {
  double window_fraction = 0.2;
  int n_bins = 101;
  double range_factor = 4.0;
  double truncation_factor = 5.0;
  int threads = 1;
};

struct EnsembleLambdaResult {
  ChaoticProfile profile;
  FitResult fit;
  double gamma_theory = 0.0;
  EnsembleStats gamma_per_realization;
  std::vector<std::string> warnings;
};

EnsembleLambdaResult ensemble_lambda_experiment(const RmtParams& p, int n_real,
                                                std::uint64_t seed,
                                                const EnsembleOptions& opts = {});

// Lambda(mu, alpha) in per-state normalization (sums to ~1 over alpha).
class LambdaLookup {
public:
  enum class Shape { lorentzian, gaussian, empirical, table };

  static LambdaLookup lorentzian(double gamma, double omega, Eigen::VectorXd e_full,
                                 Eigen::VectorXd e0);
  static LambdaLookup gaussian(double k, double omega, Eigen::VectorXd e_full,
                               Eigen::VectorXd e0);
  static LambdaLookup empirical(ChaoticProfile profile, Eigen::VectorXd e_full,
                                Eigen::VectorXd e0);
  static LambdaLookup table(Eigen::MatrixXd lambda);

  Shape shape() const { return shape_; }
  Index dim() const { return dim_; }
  double operator()(Index mu, Index alpha) const;
  // sum_gamma Lambda(mu, gamma) Lambda(nu, gamma) over the model's own grid
  double overlap_sum(Index mu, Index nu) const;
  double row_sum(Index mu) const;

private:
  Shape shape_ = Shape::table;
  Index dim_ = 0;
  double rate_ = 0.0;
  double omega_ = 0.0;
  Eigen::VectorXd e_full_, e0_;
  ChaoticProfile profile_;
  Eigen::MatrixXd table_;
};

double eigenstate_corr4(const LambdaLookup& lam, Index mu, Index nu, Index a, Index b,
                        Index a2, Index b2);

struct Coefficient {
  Index state;
  Index alpha;
};

enum class Corr6Case { two_states, three_states };

// Factors c_state(alpha). two_states: one state appears twice (mu), the other
// four times (nu); the nu factors are taken as (alpha, beta, alpha', beta') in
// order. three_states: three states, twice each, ordered by first appearance.
double eigenstate_corr6(const LambdaLookup& lam, Corr6Case c, std::span<const Coefficient> f);

enum class TupleFamily { corr4, corr6_two, corr6_three };
std::string to_string(TupleFamily f);

struct McTuple {
  TupleFamily family;
  std::vector<Coefficient> factors; // corr4: (mu,a)(mu,b)(nu,a')(nu,b')
  std::string label;
};

double tuple_formula(const LambdaLookup& lam, const McTuple& t);

// Every index multiset over a fixed three-element alpha pool near the centre,
// for states dim/2, dim/2+2, dim/2+5, whose formula is structurally nonzero.
std::vector<McTuple> exhaustive_panel(Index dim);

struct McRow {
  McTuple tuple;
  double mc_mean = 0.0;
  double formula = 0.0;
  double std_error = 0.0;
  double z = 0.0;
};

struct McOptions {
  int n_groups = 50;
  int threads = 1;
};

struct McReport {
  RmtParams params;
  int n_realizations = 0;
  std::uint64_t seed = 0;
  std::vector<McRow> rows;

  int count_within(TupleFamily f, double z_max) const;
  int count(TupleFamily f) const;
};

McReport monte_carlo_eigenstate_check(const RmtParams& p, int n_real, std::uint64_t seed,
                                      std::span<const McTuple> panel,
                                      const McOptions& opts = {});

struct SelfAveragingSpec {
  double t = 0.0;                   // evaluation time; <= 0 means 1/Gamma_theory
  std::optional<Index> basis_index; // H0 eigenstate; default dim/2
  double shell_factor = 4.0;        // shell half width in units of Gamma_theory
};

struct SelfAveragingResult {
  EnsembleStats stats;
  double relative_spread = 0.0; // std_error / |mean|
  bool stderr_available = false;
  double t = 0.0;
};

// <P(t)> for an H0 eigenstate phi, where P projects on the H0 levels within
// shell_factor * Gamma_theory of E_phi. The survival probability is not used:
// its long-time fluctuations do not shrink with N.
SelfAveragingResult self_averaging_check(const RmtParams& p, const SelfAveragingSpec& spec,
                                         int n_real, std::uint64_t seed, int threads = 1);

} // namespace chaoscorr
