#include "chaoscorr/rmtlab.hpp"

#include "chaoscorr/correlators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace chaoscorr {

EnsembleStats EnsembleStats::from_samples(std::vector<double> xs) {
  EnsembleStats s;
  s.n_realizations = xs.size();
  if (xs.empty())
    return s;
  double sum = 0.0;
  for (double x : xs)
    sum += x;
  s.mean = sum / double(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs)
      ss += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(ss / double(xs.size() - 1) / double(xs.size()));
  }
  s.per_realization = std::move(xs);
  return s;
}

std::uint64_t realization_seed(std::uint64_t seed, std::uint64_t realization) {
  // splitmix64 finalizer applied to a combination of both inputs
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(realization + 0x632be59bd9b4e019ULL));
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n)
          return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!err)
            err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool)
    t.join();
  if (err)
    std::rethrow_exception(err);
}

namespace {

SpectralDecomposition<double> realize(const RmtParams& p, std::uint64_t seed,
                                      SpectralDecomposition<double>& d0) {
  HamiltonianSet<double> hs = build_deutsch_model(p, seed);
  hs.diagonalize();
  d0 = std::move(*hs.decomp0);
  return std::move(*hs.decomp_full);
}

} // namespace

EnsembleLambdaResult ensemble_lambda_experiment(const RmtParams& p, int n_real,
                                                std::uint64_t seed,
                                                const EnsembleOptions& opts) {
  p.validate(false);
  if (n_real < 1)
    throw ArgumentError("ensemble_lambda_experiment: n_real must be >= 1");
  if (!(opts.window_fraction > 0.0 && opts.window_fraction <= 1.0))
    throw ArgumentError("ensemble_lambda_experiment: window_fraction must be in (0, 1]");
  if (opts.n_bins < 8)
    throw ArgumentError("ensemble_lambda_experiment: n_bins must be >= 8");

  struct Slot {
    Eigen::MatrixXd weights;
    Eigen::VectorXd e_full, e0;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(n_real));
  const MuWindow w = central_window(p.dim, opts.window_fraction);
  parallel_for(slots.size(), opts.threads, [&](std::size_t r) {
    SpectralDecomposition<double> d0;
    const auto df = realize(p, realization_seed(seed, r), d0);
    const auto ov = overlap_matrix(df, d0);
    slots[r].weights = ov.c.middleRows(w.begin, w.end - w.begin).cwiseAbs2();
    slots[r].e_full = df.energies;
    slots[r].e0 = d0.energies;
  });

  EnsembleLambdaResult res;
  res.gamma_theory = p.gamma_theory();
  ProfileAccumulator acc;
  std::vector<double> per;
  FitOptions fo;
  fo.truncation_factor = opts.truncation_factor;
  ProfileOptions po{opts.range_factor};
  int failed = 0;
  for (const auto& s : slots) {
    acc.add_window(s.weights, s.e_full, s.e0, w);
    ProfileAccumulator one;
    one.add_window(s.weights, s.e_full, s.e0, w);
    try {
      per.push_back(fit_profile(one.finish(opts.n_bins, po), FitShape::lorentzian, fo).rate);
    } catch (const NumericError&) {
      ++failed;
    }
  }
  res.profile = acc.finish(opts.n_bins, po);
  res.fit = fit_profile(res.profile, FitShape::lorentzian, fo);
  res.gamma_per_realization = EnsembleStats::from_samples(std::move(per));
  res.warnings = res.profile.warnings;
  if (failed > 0)
    res.warnings.push_back(std::to_string(failed) + " single-realization fits did not converge");
  std::ostringstream os;
  if (res.gamma_theory < p.omega) {
    os << "Gamma_theory/omega = " << res.gamma_theory / p.omega
       << " < 1: linewidth below level spacing, perturbative regime not satisfied";
    res.warnings.push_back(os.str());
  } else if (res.gamma_theory > p.g) {
    os << "Gamma_theory = " << res.gamma_theory << " exceeds g = " << p.g;
    res.warnings.push_back(os.str());
  }
  return res;
}

LambdaLookup LambdaLookup::lorentzian(double gamma, double omega, Eigen::VectorXd e_full,
                                      Eigen::VectorXd e0) {
  if (!(gamma > 0.0) || !(omega > 0.0))
    throw ArgumentError("LambdaLookup: gamma and omega must be > 0");
  LambdaLookup l;
  l.shape_ = Shape::lorentzian;
  l.rate_ = gamma;
  l.omega_ = omega;
  l.dim_ = e0.size();
  l.e_full_ = std::move(e_full);
  l.e0_ = std::move(e0);
  return l;
}

LambdaLookup LambdaLookup::gaussian(double k, double omega, Eigen::VectorXd e_full,
                                    Eigen::VectorXd e0) {
  if (!(k > 0.0) || !(omega > 0.0))
    throw ArgumentError("LambdaLookup: K and omega must be > 0");
  LambdaLookup l = lorentzian(k, omega, std::move(e_full), std::move(e0));
  l.shape_ = Shape::gaussian;
  return l;
}

LambdaLookup LambdaLookup::empirical(ChaoticProfile profile, Eigen::VectorXd e_full,
                                     Eigen::VectorXd e0) {
  if (profile.bin_values.empty() || !(profile.bin_width > 0.0))
    throw ArgumentError("LambdaLookup: empty profile");
  LambdaLookup l;
  l.shape_ = Shape::empirical;
  l.omega_ = profile.omega_mean;
  l.profile_ = std::move(profile);
  l.dim_ = e0.size();
  l.e_full_ = std::move(e_full);
  l.e0_ = std::move(e0);
  return l;
}

LambdaLookup LambdaLookup::table(Eigen::MatrixXd lambda) {
  if (lambda.rows() != lambda.cols())
    throw ArgumentError("LambdaLookup: table must be square");
  if ((lambda.array() < 0.0).any())
    throw ArgumentError("LambdaLookup: table entries must be >= 0");
  LambdaLookup l;
  l.shape_ = Shape::table;
  l.dim_ = lambda.rows();
  l.table_ = std::move(lambda);
  return l;
}

double LambdaLookup::operator()(Index mu, Index alpha) const {
  if (mu < 0 || mu >= dim_ || alpha < 0 || alpha >= dim_)
    throw ArgumentError("LambdaLookup: index out of range");
  switch (shape_) {
  case Shape::table:
    return table_(mu, alpha);
  case Shape::lorentzian:
    return omega_ * lorentzian_density(e_full_(mu) - e0_(alpha), rate_);
  case Shape::gaussian:
    return omega_ * gaussian_density(e_full_(mu) - e0_(alpha), rate_);
  case Shape::empirical: {
    const double e = e_full_(mu) - e0_(alpha);
    const double lo = profile_.bin_centers.front() - 0.5 * profile_.bin_width;
    const double pos = (e - lo) / profile_.bin_width;
    if (pos < 0.0 || pos >= double(profile_.bin_values.size()))
      return 0.0;
    return omega_ * profile_.bin_values[std::size_t(pos)];
  }
  }
  return 0.0;
}

double LambdaLookup::overlap_sum(Index mu, Index nu) const {
  double s = 0.0;
  for (Index g = 0; g < dim_; ++g)
    s += (*this)(mu, g) * (*this)(nu, g);
  return s;
}

double LambdaLookup::row_sum(Index mu) const {
  double s = 0.0;
  for (Index g = 0; g < dim_; ++g)
    s += (*this)(mu, g);
  return s;
}

namespace {

inline double two(const LambdaLookup& l, Index mu, Index a, Index b) {
  return a == b ? l(mu, a) : 0.0;
}

// Orthogonality correction for c_mu(a) c_mu(b) c_nu(a') c_nu(b'), mu != nu.
double correction(const LambdaLookup& l, Index mu, Index a, Index b, Index nu, Index a2,
                  Index b2) {
  const int deltas = int(a == a2 && b == b2) + int(a == b2 && b == a2);
  if (deltas == 0)
    return 0.0;
  const double den = l.overlap_sum(mu, nu);
  if (!(den > 0.0))
    return 0.0;
  return -l(mu, a) * l(mu, b) * l(nu, a2) * l(nu, b2) / den * deltas;
}

} // namespace

double eigenstate_corr4(const LambdaLookup& l, Index mu, Index nu, Index a, Index b, Index a2,
                        Index b2) {
  if (mu == nu)
    return two(l, mu, a, b) * two(l, mu, a2, b2) + two(l, mu, a, a2) * two(l, mu, b, b2) +
           two(l, mu, a, b2) * two(l, mu, b, a2);
  return two(l, mu, a, b) * two(l, nu, a2, b2) + correction(l, mu, a, b, nu, a2, b2);
}

double eigenstate_corr6(const LambdaLookup& l, Corr6Case c, std::span<const Coefficient> f) {
  if (f.size() != 6)
    throw ArgumentError("eigenstate_corr6: six factors required");
  std::vector<Index> states;
  std::map<Index, std::vector<Index>> by_state;
  for (const auto& x : f) {
    if (!by_state.count(x.state))
      states.push_back(x.state);
    by_state[x.state].push_back(x.alpha);
  }
  if (c == Corr6Case::two_states) {
    if (states.size() != 2)
      throw ArgumentError("eigenstate_corr6(two_states): expected exactly two distinct states");
    Index mu = states[0], nu = states[1];
    if (by_state[mu].size() == 4)
      std::swap(mu, nu);
    const auto& m = by_state[mu];
    const auto& n = by_state[nu];
    if (m.size() != 2 || n.size() != 4)
      throw ArgumentError("eigenstate_corr6(two_states): multiplicity pattern must be 2 + 4");
    const Index a0 = m[0], b0 = m[1];
    double g = two(l, mu, a0, b0) *
               (two(l, nu, n[0], n[1]) * two(l, nu, n[2], n[3]) +
                two(l, nu, n[2], n[1]) * two(l, nu, n[0], n[3]) +
                two(l, nu, n[0], n[2]) * two(l, nu, n[1], n[3]));
    // one nu pair contracted, the remaining nu pair corrected against mu
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) {
        int r[2], k = 0;
        for (int j = 0; j < 4; ++j)
          if (j != p && j != q)
            r[k++] = j;
        g += two(l, nu, n[p], n[q]) * correction(l, mu, a0, b0, nu, n[r[0]], n[r[1]]);
      }
    return g;
  }
  if (states.size() != 3)
    throw ArgumentError("eigenstate_corr6(three_states): expected three distinct states");
  for (Index s : states)
    if (by_state[s].size() != 2)
      throw ArgumentError("eigenstate_corr6(three_states): each state must appear twice");
  const Index mu = states[0], nu = states[1], rho = states[2];
  const auto& m = by_state[mu];
  const auto& n = by_state[nu];
  const auto& r = by_state[rho];
  const double pm = two(l, mu, m[0], m[1]);
  const double pn = two(l, nu, n[0], n[1]);
  const double pr = two(l, rho, r[0], r[1]);
  return pm * pn * pr + pm * correction(l, nu, n[0], n[1], rho, r[0], r[1]) +
         pn * correction(l, mu, m[0], m[1], rho, r[0], r[1]) +
         pr * correction(l, mu, m[0], m[1], nu, n[0], n[1]);
}

std::string to_string(TupleFamily f) {
  switch (f) {
  case TupleFamily::corr4: return "corr4";
  case TupleFamily::corr6_two: return "corr6_two_states";
  case TupleFamily::corr6_three: return "corr6_three_states";
  }
  return "unknown";
}

double tuple_formula(const LambdaLookup& l, const McTuple& t) {
  const auto& f = t.factors;
  switch (t.family) {
  case TupleFamily::corr4:
    if (f.size() != 4 || f[0].state != f[1].state || f[2].state != f[3].state)
      throw ArgumentError("corr4 tuple must be (mu,a)(mu,b)(nu,a')(nu,b')");
    return eigenstate_corr4(l, f[0].state, f[2].state, f[0].alpha, f[1].alpha, f[2].alpha,
                            f[3].alpha);
  case TupleFamily::corr6_two:
    return eigenstate_corr6(l, Corr6Case::two_states, f);
  case TupleFamily::corr6_three:
    return eigenstate_corr6(l, Corr6Case::three_states, f);
  }
  return 0.0;
}

namespace {

void multisets(int pool, int k, int start, std::vector<int>& cur,
               std::vector<std::vector<int>>& out) {
  if (int(cur.size()) == k) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i < pool; ++i) {
    cur.push_back(i);
    multisets(pool, k, i, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> multisets(int pool, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  multisets(pool, k, 0, cur, out);
  return out;
}

} // namespace

std::vector<McTuple> exhaustive_panel(Index dim) {
  if (dim < 12)
    throw ArgumentError("exhaustive_panel: dim must be >= 12");
  const Index m0 = dim / 2;
  const Index st[3] = {m0, m0 + 2, m0 + 5};
  const Index pool[3] = {m0, m0 + 1, m0 + 3};
  const char* sname[3] = {"mu", "nu", "rho"};
  const char letter[3] = {'a', 'b', 'c'};

  // Structural zeros are decided with a flat lookup.
  const LambdaLookup flat = LambdaLookup::table(Eigen::MatrixXd::Constant(dim, dim, 1.0 / dim));

  std::vector<McTuple> out;
  auto push = [&](TupleFamily fam, std::vector<std::pair<int, std::vector<int>>> groups) {
    McTuple t;
    t.family = fam;
    std::string label;
    for (auto& [s, idx] : groups) {
      if (!label.empty())
        label += ' ';
      label += std::string(sname[s]) + ':';
      for (int i : idx) {
        t.factors.push_back({st[s], pool[i]});
        label += letter[i];
      }
    }
    t.label = label;
    if (tuple_formula(flat, t) != 0.0)
      out.push_back(std::move(t));
  };

  const auto p2 = multisets(3, 2);
  const auto p4 = multisets(3, 4);
  for (const auto& q : p4)
    push(TupleFamily::corr4, {{0, q}});
  for (const auto& a : p2)
    for (const auto& b : p2)
      push(TupleFamily::corr4, {{0, a}, {1, b}});
  for (const auto& a : p2)
    for (const auto& q : p4)
      push(TupleFamily::corr6_two, {{0, a}, {1, q}});
  for (const auto& a : p2)
    for (const auto& b : p2)
      for (const auto& c : p2)
        push(TupleFamily::corr6_three, {{0, a}, {1, b}, {2, c}});
  return out;
}

int McReport::count_within(TupleFamily f, double z_max) const {
  int n = 0;
  for (const auto& r : rows)
    if (r.tuple.family == f && std::abs(r.z) <= z_max)
      ++n;
  return n;
}

int McReport::count(TupleFamily f) const {
  int n = 0;
  for (const auto& r : rows)
    if (r.tuple.family == f)
      ++n;
  return n;
}

McReport monte_carlo_eigenstate_check(const RmtParams& p, int n_real, std::uint64_t seed,
                                      std::span<const McTuple> panel, const McOptions& opts) {
  p.validate(false);
  if (n_real < 2)
    throw ArgumentError("monte_carlo_eigenstate_check: n_real must be >= 2");
  const int groups = std::clamp(opts.n_groups, 2, n_real);

  std::vector<Index> states;
  for (const auto& t : panel)
    for (const auto& f : t.factors) {
      if (f.state < 0 || f.state >= p.dim || f.alpha < 0 || f.alpha >= p.dim)
        throw ArgumentError("tuple '" + t.label + "' indexes outside the model");
      if (std::find(states.begin(), states.end(), f.state) == states.end())
        states.push_back(f.state);
    }
  std::sort(states.begin(), states.end());
  auto slot_of = [&](Index s) {
    return Index(std::lower_bound(states.begin(), states.end(), s) - states.begin());
  };
  const Index ns = Index(states.size());
  const Index d = p.dim;

  // rows[r] is (n_states x dim): c_state(alpha) for realization r
  std::vector<Eigen::MatrixXd> rows(static_cast<std::size_t>(n_real));
  parallel_for(rows.size(), opts.threads, [&](std::size_t r) {
    SpectralDecomposition<double> d0;
    const auto df = realize(p, realization_seed(seed, r), d0);
    Eigen::MatrixXd c(ns, d);
    for (Index s = 0; s < ns; ++s)
      c.row(s) = (df.vectors.col(states[std::size_t(s)]).transpose() * d0.vectors);
    rows[r] = std::move(c);
  });

  // Group boundaries as in an even split of [0, n_real).
  std::vector<int> start(groups + 1);
  for (int g = 0; g <= groups; ++g)
    start[g] = int((long long)n_real * g / groups);

  // Per-group sums of c^2 and of every tuple product.
  std::vector<Eigen::MatrixXd> lam_sum(groups, Eigen::MatrixXd::Zero(ns, d));
  std::vector<std::vector<double>> prod_sum(groups, std::vector<double>(panel.size(), 0.0));
  for (int g = 0; g < groups; ++g)
    for (int r = start[g]; r < start[g + 1]; ++r) {
      const auto& c = rows[std::size_t(r)];
      lam_sum[g] += c.cwiseAbs2();
      for (std::size_t t = 0; t < panel.size(); ++t) {
        double x = 1.0;
        for (const auto& f : panel[t].factors)
          x *= c(slot_of(f.state), f.alpha);
        prod_sum[g][t] += x;
      }
    }

  Eigen::MatrixXd lam_tot = Eigen::MatrixXd::Zero(ns, d);
  std::vector<double> prod_tot(panel.size(), 0.0);
  for (int g = 0; g < groups; ++g) {
    lam_tot += lam_sum[g];
    for (std::size_t t = 0; t < panel.size(); ++t)
      prod_tot[t] += prod_sum[g][t];
  }

  auto lookup_from = [&](const Eigen::MatrixXd& sums, double n) {
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(d, d);
    for (Index s = 0; s < ns; ++s)
      full.row(states[std::size_t(s)]) = sums.row(s) / n;
    return LambdaLookup::table(std::move(full));
  };

  McReport rep;
  rep.params = p;
  rep.n_realizations = n_real;
  rep.seed = seed;
  const LambdaLookup all = lookup_from(lam_tot, n_real);
  std::vector<LambdaLookup> jk;
  for (int g = 0; g < groups; ++g) {
    const double n = n_real - (start[g + 1] - start[g]);
    jk.push_back(lookup_from(lam_tot - lam_sum[g], n));
  }
  for (std::size_t t = 0; t < panel.size(); ++t) {
    McRow row;
    row.tuple = panel[t];
    row.mc_mean = prod_tot[t] / n_real;
    row.formula = tuple_formula(all, panel[t]);
    const double diff = row.mc_mean - row.formula;
    std::vector<double> reps(groups);
    double mean = 0.0;
    for (int g = 0; g < groups; ++g) {
      const double n = n_real - (start[g + 1] - start[g]);
      reps[g] = (prod_tot[t] - prod_sum[g][t]) / n - tuple_formula(jk[g], panel[t]);
      mean += reps[g];
    }
    mean /= groups;
    double ss = 0.0;
    for (double x : reps)
      ss += (x - mean) * (x - mean);
    row.std_error = std::sqrt(double(groups - 1) / groups * ss);
    row.z = row.std_error > 0 ? diff / row.std_error
                              : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

SelfAveragingResult self_averaging_check(const RmtParams& p, const SelfAveragingSpec& spec,
                                         int n_real, std::uint64_t seed, int threads) {
  p.validate(true);
  if (n_real < 1)
    throw ArgumentError("self_averaging_check: n_real must be >= 1");
  const Index a0 = spec.basis_index.value_or(p.dim / 2);
  if (a0 < 0 || a0 >= p.dim)
    throw ArgumentError("self_averaging_check: basis index out of range");
  SelfAveragingResult res;
  // g = 0 has no linewidth; fall back to the inverse level spacing
  const double rate = p.gamma_theory() > 0.0 ? p.gamma_theory() : p.omega;
  res.t = spec.t > 0.0 ? spec.t : 1.0 / rate;

  const double shell = spec.shell_factor * rate;
  std::vector<double> xs(static_cast<std::size_t>(n_real));
  parallel_for(xs.size(), threads, [&](std::size_t r) {
    SpectralDecomposition<double> d0;
    const auto df = realize(p, realization_seed(seed, r), d0);
    // H0 is diagonal, so its eigenbasis is the computational basis
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(p.dim);
    for (Index b = 0; b < p.dim; ++b)
      if (std::abs(d0.energies(b) - d0.energies(a0)) <= shell)
        proj(b) = 1.0;
    const Operator<double> a = proj.asDiagonal();
    StateVector phi = StateVector::Zero(p.dim);
    phi(a0) = 1.0;
    xs[r] = one_point_series(phi, df, a, std::vector<double>{res.t}).values[0].real();
  });
  res.stats = EnsembleStats::from_samples(std::move(xs));
  res.stderr_available = res.stats.std_error.has_value();
  if (res.stderr_available && res.stats.mean != 0.0)
    res.relative_spread = *res.stats.std_error / std::abs(res.stats.mean);
  return res;
}

} // namespace chaoscorr
