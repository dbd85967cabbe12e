#include "chaoscorr/chaoswf.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace chaoscorr {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double ChaoticProfile::normalization() const {
  double s = 0.0;
  for (double v : bin_values)
    s += v;
  return s * bin_width;
}

double ChaoticProfile::mean() const {
  double s = 0.0, m = 0.0;
  for (std::size_t i = 0; i < bin_values.size(); ++i) {
    s += bin_values[i];
    m += bin_values[i] * bin_centers[i];
  }
  return s > 0 ? m / s : 0.0;
}

double ChaoticProfile::second_moment() const {
  double s = 0.0, m = 0.0;
  for (std::size_t i = 0; i < bin_values.size(); ++i) {
    s += bin_values[i];
    m += bin_values[i] * bin_centers[i] * bin_centers[i];
  }
  return s > 0 ? m / s : 0.0;
}

MuWindow central_window(Index dim, double window_fraction) {
  if (dim < 1)
    throw ArgumentError("central_window: empty spectrum");
  const Index count = std::clamp<Index>(Index(std::llround(window_fraction * dim)), 1, dim);
  const Index begin = (dim - count) / 2;
  return {begin, begin + count};
}

double window_level_spacing(const Eigen::VectorXd& energies_full,
                            const Eigen::VectorXd& energies_0, MuWindow w) {
  const Index d = energies_0.size();
  const double global = d > 1 ? (energies_0(d - 1) - energies_0(0)) / double(d - 1) : 0.0;
  const double lo = energies_full(w.begin);
  const double hi = energies_full(w.end - 1);
  Index first = -1, last = -1, n = 0;
  for (Index a = 0; a < d; ++a) {
    if (energies_0(a) >= lo && energies_0(a) <= hi) {
      if (first < 0)
        first = a;
      last = a;
      ++n;
    }
  }
  if (n < 2 || energies_0(last) <= energies_0(first))
    return global;
  return (energies_0(last) - energies_0(first)) / double(n - 1);
}

void ProfileAccumulator::add_window(const Eigen::MatrixXd& weights,
                                    const Eigen::VectorXd& energies_full,
                                    const Eigen::VectorXd& energies_0, MuWindow w) {
  const Index rows = w.end - w.begin;
  if (weights.rows() != rows || weights.cols() != energies_0.size())
    throw ArgumentError("ProfileAccumulator: weight block has wrong shape");
  if (w.begin < 0 || w.end > energies_full.size() || rows <= 0)
    throw ArgumentError("ProfileAccumulator: window out of range");
  for (Index r = 0; r < rows; ++r) {
    const double emu = energies_full(w.begin + r);
    for (Index a = 0; a < weights.cols(); ++a) {
      const double x = weights(r, a);
      if (x == 0.0)
        continue;
      de_.push_back(emu - energies_0(a));
      w_.push_back(x);
    }
  }
  n_states_ += rows;
  spacing_sum_ += window_level_spacing(energies_full, energies_0, w);
  ++n_windows_;
  last_ = w;
}

ChaoticProfile ProfileAccumulator::finish(int n_bins, const ProfileOptions& opts) const {
  if (n_bins < 8)
    throw ArgumentError("profile: n_bins must be >= 8");
  if (n_states_ == 0)
    throw ArgumentError("profile: no states accumulated");
  if (!(opts.range_factor > 0.0))
    throw ArgumentError("profile: range_factor must be > 0");

  ChaoticProfile p;
  p.mu_begin = last_.begin;
  p.mu_end = last_.end;
  p.n_states = n_states_;
  p.omega_mean = spacing_sum_ / n_windows_;

  double wsum = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < de_.size(); ++i) {
    wsum += w_[i];
    m2 += w_[i] * de_[i] * de_[i];
  }
  const double rms = wsum > 0 ? std::sqrt(m2 / wsum) : 0.0;
  // Floor keeps the grid usable when all weight sits at E = 0.
  const double half = std::max(opts.range_factor * rms, 0.5 * n_bins * p.omega_mean);
  if (!(half > 0.0))
    throw NumericError("profile: degenerate energy range");
  p.bin_width = 2.0 * half / n_bins;

  std::vector<double> acc(n_bins, 0.0);
  for (std::size_t i = 0; i < de_.size(); ++i) {
    const double pos = (de_[i] + half) / p.bin_width;
    if (pos < 0.0 || pos >= n_bins)
      continue;
    acc[std::size_t(pos)] += w_[i];
  }
  p.bin_centers.resize(n_bins);
  p.bin_values.resize(n_bins);
  for (int k = 0; k < n_bins; ++k) {
    p.bin_centers[k] = -half + (k + 0.5) * p.bin_width;
    p.bin_values[k] = acc[k] / (double(n_states_) * p.bin_width);
  }

  const double norm = p.normalization();
  if (std::abs(norm - 1.0) > 0.02) {
    std::ostringstream os;
    os << "profile normalization " << norm << " deviates from 1 by more than 2%";
    p.warnings.push_back(os.str());
  }
  const double core = 3.0 * std::sqrt(p.second_moment());
  int empty = 0;
  for (int k = 0; k < n_bins; ++k)
    if (std::abs(p.bin_centers[k]) <= core && p.bin_values[k] == 0.0)
      ++empty;
  if (empty > 0)
    p.warnings.push_back(std::to_string(empty) +
                         " empty bins inside +-3 sqrt(second moment)");
  return p;
}

std::string to_string(FitShape s) {
  return s == FitShape::lorentzian ? "lorentzian" : "gaussian";
}

FitShape fit_shape_from_string(const std::string& s) {
  if (s == "lorentzian")
    return FitShape::lorentzian;
  if (s == "gaussian")
    return FitShape::gaussian;
  throw ArgumentError("unknown fit shape '" + s + "'");
}

double lorentzian_density(double e, double gamma) {
  return (gamma / kPi) / (e * e + gamma * gamma);
}

double gaussian_density(double e, double k) {
  return std::exp(-e * e / (4.0 * k)) / std::sqrt(4.0 * kPi * k);
}

double profile_hwhm(const ChaoticProfile& p) {
  const auto& y = p.bin_values;
  const auto& x = p.bin_centers;
  const std::size_t n = y.size();
  std::size_t m = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (y[i] > y[m])
      m = i;
  const double half = 0.5 * y[m];
  double right = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = m + 1; i < n; ++i)
    if (y[i] < half) {
      const double f = (y[i - 1] - half) / (y[i - 1] - y[i]);
      right = x[i - 1] + f * (x[i] - x[i - 1]);
      break;
    }
  double left = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = m; i-- > 0;)
    if (y[i] < half) {
      const double f = (y[i + 1] - half) / (y[i + 1] - y[i]);
      left = x[i + 1] - f * (x[i + 1] - x[i]);
      break;
    }
  double w;
  if (std::isfinite(left) && std::isfinite(right))
    w = 0.5 * (right - left);
  else if (std::isfinite(right))
    w = right - x[m];
  else if (std::isfinite(left))
    w = x[m] - left;
  else
    w = std::sqrt(p.second_moment());
  // A peak narrower than one bin still has a width of order half a bin.
  return std::max(w, 0.5 * p.bin_width);
}

FitResult fit_profile(const ChaoticProfile& profile, FitShape shape, const FitOptions& opts) {
  const std::size_t n = profile.bin_values.size();
  if (n < 3 || profile.bin_centers.size() != n || !(profile.bin_width > 0.0))
    throw ArgumentError("fit_profile: profile is empty or malformed");

  FitResult res;
  res.shape = shape;
  double p0;
  if (shape == FitShape::lorentzian) {
    p0 = profile_hwhm(profile);
  } else {
    p0 = 0.5 * profile.second_moment();
  }
  if (!(p0 > 0.0))
    throw NumericError("fit_profile: non-positive initial guess");
  res.initial_guess = p0;

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n; ++i) {
    if (shape == FitShape::lorentzian && opts.truncation_factor > 0.0 &&
        std::abs(profile.bin_centers[i]) > opts.truncation_factor * p0)
      continue;
    xs.push_back(profile.bin_centers[i]);
    ys.push_back(profile.bin_values[i]);
  }
  if (xs.size() < 3) {
    xs = profile.bin_centers;
    ys = profile.bin_values;
  }
  res.n_points = int(xs.size());

  auto eval = [&](double p, double& ssr, double& jtj, double& jtr) {
    ssr = jtj = jtr = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double e = xs[i];
      double f, df;
      if (shape == FitShape::lorentzian) {
        const double d = e * e + p * p;
        f = (p / kPi) / d;
        df = (e * e - p * p) / (kPi * d * d);
      } else {
        f = gaussian_density(e, p);
        df = f * (-0.5 / p + e * e / (4.0 * p * p));
      }
      const double r = f - ys[i];
      ssr += r * r;
      jtj += df * df;
      jtr += df * r;
    }
  };

  double p = p0, lambda = 1e-3;
  double ssr, jtj, jtr;
  eval(p, ssr, jtj, jtr);
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iterations && !converged; ++it) {
    if (jtj == 0.0)
      break;
    for (;;) {
      const double step = -jtr / (jtj * (1.0 + lambda));
      if (std::abs(step) <= opts.relative_tolerance * std::abs(p)) {
        converged = true;
        break;
      }
      const double trial = p + step;
      double s2, j2, r2;
      if (trial > 0.0) {
        eval(trial, s2, j2, r2);
        if (s2 <= ssr) {
          p = trial;
          ssr = s2;
          jtj = j2;
          jtr = r2;
          lambda = std::max(lambda * 0.1, 1e-12);
          if (std::abs(step) <= opts.relative_tolerance * std::abs(p))
            converged = true;
          break;
        }
      }
      lambda *= 10.0;
      if (lambda > 1e16) {
        // No downhill step exists at machine precision.
        converged = true;
        break;
      }
    }
  }
  res.iterations = it;
  double ymax = 0.0;
  for (double y : ys)
    ymax = std::max(ymax, y);
  res.residual = ymax > 0 ? std::sqrt(ssr / xs.size()) / ymax : 0.0;
  if (!converged) {
    std::ostringstream os;
    os.precision(10);
    os << "fit_profile(" << to_string(shape) << ") did not converge in "
       << opts.max_iterations << " iterations; last iterate " << p << ", residual "
       << res.residual;
    throw NumericError(os.str());
  }
  res.rate = p;
  const double dof = std::max<double>(1.0, double(xs.size()) - 1.0);
  res.covariance = jtj > 0 ? (ssr / dof) / jtj : std::numeric_limits<double>::infinity();
  return res;
}

OmegaSource omega_source(const FitResult& fit) {
  if (fit.shape == FitShape::lorentzian)
    return LorentzianKernel{fit.rate};
  return GaussianKernel{fit.rate};
}

std::string describe(const OmegaSource& s) {
  std::ostringstream os;
  os.precision(17);
  if (auto* l = std::get_if<LorentzianKernel>(&s))
    os << "lorentzian(gamma=" << l->gamma << ")";
  else if (auto* g = std::get_if<GaussianKernel>(&s))
    os << "gaussian(K=" << g->k << ")";
  else
    os << "numeric(bins=" << std::get<NumericKernel>(s).profile.bin_values.size() << ")";
  return os.str();
}

double omega_of_t(const OmegaSource& source, double t) {
  if (auto* l = std::get_if<LorentzianKernel>(&source))
    return std::exp(-l->gamma * std::abs(t));
  if (auto* g = std::get_if<GaussianKernel>(&source))
    return std::exp(-g->k * t * t);
  const auto& p = std::get<NumericKernel>(source).profile;
  double s = 0.0;
  for (std::size_t i = 0; i < p.bin_values.size(); ++i)
    s += p.bin_values[i] * std::cos(p.bin_centers[i] * t);
  return s * p.bin_width;
}

double omega_asymmetry(const ChaoticProfile& p, double t) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.bin_values.size(); ++i)
    s += p.bin_values[i] * std::sin(p.bin_centers[i] * t);
  return s * p.bin_width;
}

} // namespace chaoscorr
