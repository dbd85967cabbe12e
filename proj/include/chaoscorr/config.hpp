#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "chaoscorr/chaoswf.hpp"
#include "chaoscorr/correlators.hpp"
#include "chaoscorr/models.hpp"

namespace chaoscorr {

// Bad config content. The message starts with the JSON path of the field.
struct ConfigError : ArgumentError {
  using ArgumentError::ArgumentError;
};

struct CorrelatorRequest {
  CorrelatorKind kind = CorrelatorKind::one_point;
  // one_point: A1. two_point: A1, A2. otoc / squared_commutator: A1, A2.
  // four_point: A1..A4.
  std::vector<std::string> observables;
  double t2 = 0.0; // two_point only

  std::string name() const; // file stem, e.g. one_point_sigma_x1
};

struct TimeGrid {
  double t_max = 40.0;
  int n_points = 401;
  std::vector<double> times() const;
};

struct LambdaExtraction {
  double window_fraction = 0.2;
  int n_bins = 101;
  double range_factor = 4.0;
  double truncation_factor = 5.0;
  std::vector<FitShape> fit_shapes{FitShape::lorentzian, FitShape::gaussian};
};

struct CompareSettings {
  double rms_t_min = 0.0;
  double rms_t_max = 30.0;
  // Four-point predictions on the raw observables (nonzero DE tolerated and
  // reported) instead of the DE-shifted ones.
  bool four_point_raw = true;
  // Replaces both fitted kernels by a constant Omega; a plumbing check.
  std::optional<double> omega_stub;
};

struct McEnsembleSpec {
  RmtParams params;
  int n_realizations = 0;
};

// omega * N and g are held fixed across dims so Gamma_theory is shared.
struct SelfAveragingSettings {
  std::vector<int> dims;
  double omega_n = 1.0;
  double g = 0.1;
  int n_realizations = 20;
};

struct RmtSettings {
  int n_realizations = 20;
  int mc_groups = 50;
  std::vector<McEnsembleSpec> monte_carlo;
  std::optional<SelfAveragingSettings> self_averaging;
};

struct RunConfig {
  std::variant<ChainParams, RmtParams> model;
  InitialStateSpec initial_state;
  int n_bath_realizations = 50; // random_product only
  std::vector<std::string> observables;
  std::vector<CorrelatorRequest> correlators;
  TimeGrid time_grid;
  LambdaExtraction lambda;
  CompareSettings compare;
  RmtSettings rmt;
  std::uint64_t seed = 0;
  std::string output_dir = "chwf_out";
  int threads = 1;

  bool is_spin_chain() const { return std::holds_alternative<ChainParams>(model); }
  const ChainParams& chain() const;
  const RmtParams& rmt_params() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& p);

// Canonical serialization; the config hash is taken over this text.
std::string canonical_config(const RunConfig& c);

// sigma_x(k), sigma_z(k), sigma_plus(k), sigma_minus(k), projector_up(k),
// identity, and '*'-separated products of those.
Operator<double> observable_operator(const std::string& name, int n_sites);

} // namespace chaoscorr
