#include "chaoscorr/predictions.hpp"

#include <cmath>
#include <sstream>

namespace chaoscorr {

namespace {

void check_kernel(const KernelSeries& om, std::span<const double> times, double shift,
                  const char* what) {
  if (om.values.size() != om.times.size())
    throw ArgumentError(std::string(what) + ": kernel series is malformed");
  if (om.times.size() != times.size())
    throw ArgumentError(std::string(what) + ": kernel grid has " +
                        std::to_string(om.times.size()) + " points, reference has " +
                        std::to_string(times.size()));
  for (std::size_t k = 0; k < times.size(); ++k)
    if (om.times[k] != times[k])
      throw ArgumentError(std::string(what) + ": kernel and reference grids differ at index " +
                          std::to_string(k));
  if (om.shift != shift)
    throw ArgumentError(std::string(what) + ": kernel sampled with shift " +
                        std::to_string(om.shift) + ", expected " + std::to_string(shift));
  if (!(std::abs(om.at_zero - 1.0) <= 0.02))
    throw ValidationError(std::string(what) + ": Omega(0) = " + std::to_string(om.at_zero) +
                          " is not 1 within 2%");
}

CorrelatorSeries prediction_like(const CorrelatorSeries& ref) {
  CorrelatorSeries out;
  out.times = ref.times;
  out.values.resize(ref.values.size());
  out.kind = ref.kind;
  out.hamiltonian_tag = "prediction";
  out.observable_tags = ref.observable_tags;
  return out;
}

CorrelatorSeries relax_towards(const PredictionInputs& in, cplx constant) {
  CorrelatorSeries out = prediction_like(in.reference);
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const double o = in.omega.values[k];
    out.values[k] = (in.reference.values[k] - constant) * (o * o) + constant;
  }
  return out;
}

} // namespace

KernelSeries sample_omega(const OmegaSource& source, std::span<const double> times,
                          double shift) {
  KernelSeries k;
  k.times.assign(times.begin(), times.end());
  k.values.reserve(times.size());
  for (double t : times)
    k.values.push_back(omega_of_t(source, std::abs(t - shift)));
  k.shift = shift;
  k.at_zero = omega_of_t(source, 0.0);
  k.source = describe(source);
  return k;
}

KernelSeries constant_kernel(std::span<const double> times, double value) {
  KernelSeries k;
  k.times.assign(times.begin(), times.end());
  k.values.assign(times.size(), value);
  k.at_zero = 1.0;
  std::ostringstream os;
  os << "constant(" << value << ")";
  k.source = os.str();
  return k;
}

CorrelatorSeries predict_one_point(const PredictionInputs& in) {
  check_kernel(in.omega, in.reference.times, 0.0, "predict_one_point");
  if (!in.a1_de)
    throw ArgumentError("predict_one_point: (A1)_DE is required");
  return relax_towards(in, *in.a1_de);
}

CorrelatorSeries predict_two_point(const PredictionInputs& in) {
  check_kernel(in.omega, in.reference.times, 0.0, "predict_two_point");
  if (!in.a1_de || !in.a2_static)
    throw ArgumentError("predict_two_point: (A1)_DE and <A2(0)> are required");
  return relax_towards(in, *in.a1_de * *in.a2_static);
}

CorrelatorSeries predict_two_time(const PredictionInputs& in, double t2) {
  check_kernel(in.omega, in.reference.times, t2, "predict_two_time");
  if (!in.a1_de || !in.a2_static)
    throw ArgumentError("predict_two_time: (A1)_DE and <A2(t2)> are required");
  return relax_towards(in, *in.a1_de * *in.a2_static);
}

CorrelatorSeries predict_four_point(const PredictionInputs& in, const FourPointOptions& opts) {
  check_kernel(in.omega, in.reference.times, 0.0, "predict_four_point");
  if (in.observable_de.empty() || in.observable_de.size() != in.observable_norm.size())
    throw ArgumentError(
        "predict_four_point: DE averages and norms of the observables are required");
  if (!opts.allow_nonzero_de) {
    for (std::size_t j = 0; j < in.observable_de.size(); ++j) {
      if (std::abs(in.observable_de[j]) > opts.de_tolerance * in.observable_norm[j]) {
        std::ostringstream os;
        os << "predict_four_point: observable " << j + 1 << " has DE average "
           << in.observable_de[j] << "; shift it to A - (A)_DE first";
        throw ValidationError(os.str());
      }
    }
  }
  CorrelatorSeries out = prediction_like(in.reference);
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    const double o2 = in.omega.values[k] * in.omega.values[k];
    out.values[k] = in.reference.values[k] * (o2 * o2);
  }
  return out;
}

PolynomialCoefficients squared_commutator_coefficients(const SquaredCommutatorInputs& in) {
  std::vector<std::string> missing;
  if (!in.f_ref) missing.push_back("f_ref");
  if (!in.i_ref) missing.push_back("i_ref");
  if (!in.d_ref) missing.push_back("d_ref");
  if (!in.a1sq_ref) missing.push_back("a1sq_ref");
  if (!in.a1sq_de) missing.push_back("a1sq_de");
  if (!in.a2sq_de) missing.push_back("a2sq_de");
  if (!in.a2sq_static) missing.push_back("a2sq_static");
  if (!missing.empty()) {
    std::string s = "predict_squared_commutator: missing components:";
    for (auto& m : missing)
      s += " " + m;
    throw ArgumentError(s);
  }
  const auto& times = in.f_ref->times;
  for (const CorrelatorSeries* s : {&*in.i_ref, &*in.d_ref, &*in.a1sq_ref})
    if (s->times != times)
      throw ArgumentError("predict_squared_commutator: reference grids differ");
  check_kernel(in.omega, times, 0.0, "predict_squared_commutator");

  PolynomialCoefficients pc;
  pc.times = times;
  const double a1 = *in.a1sq_de, a2 = *in.a2sq_de, s2 = *in.a2sq_static;
  pc.c0 = a1 * s2 + a1 * a2;
  pc.c4.resize(times.size());
  pc.c2.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    pc.c4[k] = -2.0 * in.f_ref->values[k].real() + in.i_ref->values[k].real();
    pc.c2[k] = in.d_ref->values[k].real() + in.a1sq_ref->values[k].real() * a2 - a1 * s2 -
               a1 * a2;
  }
  return pc;
}

CorrelatorSeries predict_squared_commutator(const SquaredCommutatorInputs& in) {
  const PolynomialCoefficients pc = squared_commutator_coefficients(in);
  CorrelatorSeries out;
  out.times = pc.times;
  out.kind = CorrelatorKind::squared_commutator;
  out.hamiltonian_tag = "prediction";
  out.observable_tags = in.f_ref->observable_tags;
  out.values.resize(pc.times.size());
  for (std::size_t k = 0; k < pc.times.size(); ++k) {
    const double o2 = in.omega.values[k] * in.omega.values[k];
    out.values[k] = pc.c4[k] * o2 * o2 + pc.c2[k] * o2 + pc.c0;
  }
  return out;
}

double regression_residual(const CorrelatorSeries& series, const RateModel& model) {
  if (model.power != 2 && model.power != 4)
    throw ArgumentError("regression_residual: power must be 2 or 4");
  const std::size_t n = series.size();
  if (n < 3)
    throw ArgumentError("regression_residual: need at least 3 grid points");
  std::vector<double> env(n);
  for (std::size_t k = 0; k < n; ++k)
    env[k] = series.values[k].real() - model.baseline;

  std::ostringstream bad;
  bool crossed = false;
  for (std::size_t k = 0; k < n;) {
    if (env[k] > 0.0) {
      ++k;
      continue;
    }
    std::size_t j = k;
    while (j + 1 < n && !(env[j + 1] > 0.0))
      ++j;
    bad << (crossed ? ", " : "") << "[" << series.times[k] << ", " << series.times[j] << "]";
    crossed = true;
    k = j + 1;
  }
  if (crossed)
    throw DomainError("regression_residual: envelope is not positive on " + bad.str());

  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double slope = (std::log(env[k + 1]) - std::log(env[k - 1])) /
                         (series.times[k + 1] - series.times[k - 1]);
    const double expect = model.shape == FitShape::lorentzian
                              ? -model.power * model.rate
                              : -2.0 * model.power * model.rate * series.times[k];
    worst = std::max(worst, std::abs(slope - expect));
  }
  return worst;
}

} // namespace chaoscorr
