#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chaoscorr/chaoswf.hpp"
#include "chaoscorr/correlators.hpp"

namespace chaoscorr {

// Omega sampled on a grid. For two-time predictions the kernel is evaluated
// at |t - shift|.
struct KernelSeries {
  std::vector<double> times;
  std::vector<double> values;
  double shift = 0.0;
  double at_zero = 1.0;
  std::string source;
};

KernelSeries sample_omega(const OmegaSource& source, std::span<const double> times,
                          double shift = 0.0);
KernelSeries constant_kernel(std::span<const double> times, double value);

struct PredictionInputs {
  CorrelatorSeries reference;     // non-interacting <.>_H0
  KernelSeries omega;
  std::optional<double> a1_de;    // (A1)_DE
  std::optional<cplx> a2_static;  // <A2(0)>, or <A2(t2)> for two-time
  // Per-observable DE averages and norms, for the zero-DE precondition.
  std::vector<double> observable_de;
  std::vector<double> observable_norm;
};

CorrelatorSeries predict_one_point(const PredictionInputs& in);
CorrelatorSeries predict_two_point(const PredictionInputs& in);
CorrelatorSeries predict_two_time(const PredictionInputs& in, double t2);

struct FourPointOptions {
  double de_tolerance = 1e-8;   // relative to the operator norm
  bool allow_nonzero_de = false; // raw-observable comparisons; caller records max |DE|
};

CorrelatorSeries predict_four_point(const PredictionInputs& in,
                                    const FourPointOptions& opts = {});

struct SquaredCommutatorInputs {
  std::optional<CorrelatorSeries> f_ref;    // <A1'(t) A2' A1'(t) A2'>_H0
  std::optional<CorrelatorSeries> i_ref;    // <A1'(t) A2'^2 A1'(t)>_H0
  std::optional<CorrelatorSeries> d_ref;    // <A2' A1'(t)^2 A2'>_H0
  std::optional<CorrelatorSeries> a1sq_ref; // <A1'(t)^2>_H0
  std::optional<double> a1sq_de;            // ((A1')^2)_DE
  std::optional<double> a2sq_de;            // ((A2')^2)_DE
  std::optional<double> a2sq_static;        // <A2'(0)^2>
  KernelSeries omega;
};

// C(t) = c4(t) Omega^4 + c2(t) Omega^2 + c0
struct PolynomialCoefficients {
  std::vector<double> times;
  std::vector<double> c4;
  std::vector<double> c2;
  double c0 = 0.0;
};

PolynomialCoefficients squared_commutator_coefficients(const SquaredCommutatorInputs& in);
CorrelatorSeries predict_squared_commutator(const SquaredCommutatorInputs& in);

struct RateModel {
  FitShape shape = FitShape::lorentzian;
  double rate = 0.0;     // Gamma or K
  int power = 2;         // n in Omega^n
  double baseline = 0.0; // constant term removed before taking the log
};

double regression_residual(const CorrelatorSeries& series, const RateModel& model);

} // namespace chaoscorr
