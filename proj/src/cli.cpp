#include "chaoscorr/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chaoscorr/config.hpp"
#include "chaoscorr/io.hpp"
#include "chaoscorr/predictions.hpp"
#include "chaoscorr/rmtlab.hpp"

namespace chaoscorr::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Tracks every emitted file so the manifest can list its digest.
class Emitter {
public:
  explicit Emitter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& rel, const std::string& content) {
    io::atomic_write(dir_ / rel, content);
    files_[rel] = {io::hex64(io::fnv1a(content)), content.size()};
  }

  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  void manifest(const std::string& command, const std::string& config_hash,
                std::uint64_t seed, const std::string& started) {
    json files = json::array();
    for (const auto& [path, d] : files_)
      files.push_back({{"path", path}, {"fnv1a", d.first}, {"bytes", d.second}});
    const json m = {{"command", command},
                    {"config_hash", config_hash},
                    {"software_version", kVersion},
                    {"seed", seed},
                    {"started_utc", started},
                    {"finished_utc", utc_now()},
                    {"files", files}};
    io::atomic_write(dir_ / "manifest.json", m.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

private:
  fs::path dir_;
  std::map<std::string, std::pair<std::string, std::size_t>> files_;
};

struct Context {
  RunConfig cfg;
  std::string config_hash;
  std::optional<io::DecompositionCache> cache;
  bool emit_plot = false;
  std::ostream* log = nullptr;
};

void note(const Context& c, const std::string& s) {
  if (c.log)
    *c.log << "[chwf] " << s << "\n";
}

Context make_context(const CommandOptions& o, std::ostream& err) {
  if (o.config_path.empty())
    throw ConfigError("--config is required");
  Context c;
  c.cfg = load_config(o.config_path);
  if (o.output_dir)
    c.cfg.output_dir = *o.output_dir;
  if (o.seed)
    c.cfg.seed = *o.seed;
  if (o.threads) {
    if (*o.threads < 1)
      throw ConfigError("--threads must be >= 1");
    c.cfg.threads = *o.threads;
  }
  c.config_hash = io::hex64(io::fnv1a(canonical_config(c.cfg)));
  std::optional<std::string> cache_dir = o.cache_dir;
  if (!cache_dir)
    if (const char* env = std::getenv("CHWF_CACHE_DIR"); env && *env)
      cache_dir = env;
  if (cache_dir)
    c.cache.emplace(*cache_dir);
  c.emit_plot = o.emit_plot_data;
  c.log = &err;
  return c;
}

SpectralDecomposition<double> decompose(const Context& c, const std::string& key,
                                        const Operator<double>& h, HamiltonianTag tag) {
  auto compute = [&] { return hermitian_eigendecomposition(h); };
  SpectralDecomposition<double> d;
  if (c.cache) {
    bool hit = false;
    try {
      d = c.cache->get_or_compute(key, compute, &hit);
    } catch (const ChecksumError& e) {
      throw ChecksumError(std::string("eigendecomposition cache: ") + e.what());
    }
    note(c, (hit ? "cache hit: " : "cache miss: ") + key);
  } else {
    d = compute();
  }
  d.tag = tag;
  return d;
}

HamiltonianSet<double> chain_system(const Context& c) {
  const ChainParams& p = c.cfg.chain();
  note(c, "building " + p.canonical());
  HamiltonianSet<double> hs = build_spin_chain(p);
  hs.decomp0 = decompose(c, p.canonical() + ";h0", hs.h0, HamiltonianTag::noninteracting);
  hs.decomp_full = decompose(c, p.canonical() + ";full", hs.h_full, HamiltonianTag::full);
  return hs;
}

std::vector<StateVector> initial_states(const Context& c, const HamiltonianSet<double>& hs) {
  const auto& spec = c.cfg.initial_state;
  if (spec.kind != InitialStateSpec::Kind::random_product)
    return {prepare_initial_state(spec, *hs.decomp0)};
  const std::uint64_t base = realization_seed(c.cfg.seed, spec.seed);
  std::vector<StateVector> out;
  for (int r = 0; r < c.cfg.n_bath_realizations; ++r) {
    InitialStateSpec s = spec;
    s.seed = realization_seed(base, std::uint64_t(r));
    out.push_back(prepare_initial_state(s, *hs.decomp0));
  }
  return out;
}

CorrelatorSeries average(std::vector<CorrelatorSeries> xs) {
  CorrelatorSeries out = std::move(xs.front());
  for (std::size_t r = 1; r < xs.size(); ++r)
    for (std::size_t k = 0; k < out.values.size(); ++k)
      out.values[k] += xs[r].values[k];
  const double n = double(xs.size());
  for (auto& v : out.values)
    v /= n;
  return out;
}

using OpMap = std::map<std::string, Operator<double>>;

OpMap build_operators(const RunConfig& cfg) {
  OpMap ops;
  for (const auto& r : cfg.correlators)
    for (const auto& o : r.observables)
      if (!ops.count(o))
        ops.emplace(o, observable_operator(o, cfg.chain().n_sites));
  return ops;
}

// Exact series for one request and one state under one Hamiltonian.
CorrelatorSeries exact_series(const CorrelatorRequest& r, const StateVector& psi,
                              const SpectralDecomposition<double>& dec, const OpMap& ops,
                              std::span<const double> times) {
  auto op = [&](std::size_t j) -> const Operator<double>& { return ops.at(r.observables[j]); };
  switch (r.kind) {
  case CorrelatorKind::one_point:
    return one_point_series(psi, dec, op(0), times, r.observables);
  case CorrelatorKind::two_point:
    return two_point_series(psi, dec, op(0), op(1), times, r.t2, r.observables);
  case CorrelatorKind::otoc:
    return four_point_series(psi, dec, op(0), op(1), op(0), op(1), times, r.observables);
  case CorrelatorKind::four_point:
    return four_point_series(psi, dec, op(0), op(1), op(2), op(3), times, r.observables);
  case CorrelatorKind::squared_commutator:
    return squared_commutator_series(psi, dec, op(0), op(1), times, r.observables);
  }
  throw ArgumentError("unknown correlator kind");
}

std::string plot_csv(const CorrelatorSeries& s, io::Metadata meta) {
  const std::size_t n = s.size(), stride = std::max<std::size_t>(1, (n + 199) / 200);
  CorrelatorSeries d = s;
  d.times.clear();
  d.values.clear();
  for (std::size_t k = 0; k < n; k += stride) {
    d.times.push_back(s.times[k]);
    d.values.push_back(s.values[k]);
  }
  meta.emplace_back("downsample_stride", std::to_string(stride));
  return io::series_csv(d, std::move(meta));
}

io::Metadata base_meta(const Context& c) {
  const std::string model =
      std::visit([](const auto& p) { return p.canonical(); }, c.cfg.model);
  return {{"config_hash", c.config_hash},
          {"params_hash", io::hex64(io::fnv1a(model))},
          {"seed", std::to_string(c.cfg.seed)},
          {"n_states", std::to_string(c.cfg.initial_state.kind ==
                                              InitialStateSpec::Kind::random_product
                                          ? c.cfg.n_bath_realizations
                                          : 1)}};
}

double hs_norm(const Operator<double>& a) { return a.norm() / std::sqrt(double(a.rows())); }

// ---------------------------------------------------------------- simulate

int cmd_simulate(Context& c, Emitter& em, std::ostream& out) {
  const HamiltonianSet<double> hs = chain_system(c);
  const auto states = initial_states(c, hs);
  const OpMap ops = build_operators(c.cfg);
  const auto times = c.cfg.time_grid.times();
  json summary = {{"config_hash", c.config_hash}, {"n_states", states.size()}};

  json de = json::object();
  for (const auto& [name, a] : ops) {
    std::vector<double> v(states.size());
    parallel_for(states.size(), c.cfg.threads,
                 [&](std::size_t r) { v[r] = diagonal_ensemble_average(states[r], *hs.decomp_full, a); });
    de[name] = EnsembleStats::from_samples(v).mean;
  }
  summary["diagonal_ensemble"] = de;

  for (const auto& r : c.cfg.correlators) {
    note(c, "simulate " + r.name());
    for (const auto* dec : {&*hs.decomp_full, &*hs.decomp0}) {
      std::vector<CorrelatorSeries> per(states.size());
      parallel_for(states.size(), c.cfg.threads,
                   [&](std::size_t k) { per[k] = exact_series(r, states[k], *dec, ops, times); });
      const CorrelatorSeries s = average(std::move(per));
      const std::string suffix = dec->tag == HamiltonianTag::full ? "" : "_h0";
      em.write(r.name() + suffix + ".csv", io::series_csv(s, base_meta(c)));
      if (c.emit_plot)
        em.write("plot/" + r.name() + suffix + ".csv", plot_csv(s, base_meta(c)));
    }
  }
  em.write_json("summary.json", summary);
  out << "simulate: wrote " << c.cfg.correlators.size() * 2 << " series to "
      << em.dir().string() << "\n";
  return exit_ok;
}

// ---------------------------------------------------------------- fitting

struct Fits {
  ChaoticProfile profile;
  std::map<FitShape, FitResult> fits;
};

ChaoticProfile chain_profile(const Context& c, const HamiltonianSet<double>& hs) {
  const auto ov = overlap_matrix(*hs.decomp_full, *hs.decomp0);
  ProfileOptions po;
  po.range_factor = c.cfg.lambda.range_factor;
  ChaoticProfile p = lambda_profile(ov, c.cfg.lambda.window_fraction, c.cfg.lambda.n_bins, po);
  for (const auto& w : p.warnings)
    note(c, "profile warning: " + w);
  return p;
}

Fits fit_all(const Context& c, ChaoticProfile profile, const std::vector<FitShape>& shapes) {
  Fits f;
  f.profile = std::move(profile);
  FitOptions fo;
  fo.truncation_factor = c.cfg.lambda.truncation_factor;
  for (auto s : shapes)
    f.fits[s] = fit_profile(f.profile, s, fo);
  return f;
}

json fit_json(const FitResult& r) {
  return {{"shape", to_string(r.shape)},        {"rate", r.rate},
          {"residual", r.residual},             {"covariance", r.covariance},
          {"initial_guess", r.initial_guess},   {"iterations", r.iterations},
          {"n_points", r.n_points}};
}

json profile_json(const ChaoticProfile& p) {
  return {{"bin_width", p.bin_width},       {"mu_begin", p.mu_begin},
          {"mu_end", p.mu_end},             {"omega_mean", p.omega_mean},
          {"n_states", p.n_states},         {"normalization", p.normalization()},
          {"mean", p.mean()},               {"second_moment", p.second_moment()},
          {"warnings", p.warnings}};
}

std::string profile_csv(const Context& c, const Fits& f) {
  std::vector<std::string> cols{"energy", "density"};
  std::vector<std::vector<double>> data{f.profile.bin_centers, f.profile.bin_values};
  for (const auto& [shape, fit] : f.fits) {
    cols.push_back(to_string(shape));
    std::vector<double> v;
    for (double e : f.profile.bin_centers)
      v.push_back(shape == FitShape::lorentzian ? lorentzian_density(e, fit.rate)
                                                : gaussian_density(e, fit.rate));
    data.push_back(std::move(v));
  }
  return io::csv_text(base_meta(c), cols, data);
}

int cmd_fit_lambda(Context& c, Emitter& em, std::ostream& out) {
  json report;
  Fits f;
  if (c.cfg.is_spin_chain()) {
    const HamiltonianSet<double> hs = chain_system(c);
    f = fit_all(c, chain_profile(c, hs), c.cfg.lambda.fit_shapes);
    report["model"] = c.cfg.chain().canonical();
  } else {
    const RmtParams& p = c.cfg.rmt_params();
    EnsembleOptions eo;
    eo.window_fraction = c.cfg.lambda.window_fraction;
    eo.n_bins = c.cfg.lambda.n_bins;
    eo.range_factor = c.cfg.lambda.range_factor;
    eo.truncation_factor = c.cfg.lambda.truncation_factor;
    eo.threads = c.cfg.threads;
    const auto ens = ensemble_lambda_experiment(p, c.cfg.rmt.n_realizations, c.cfg.seed, eo);
    f = fit_all(c, ens.profile, c.cfg.lambda.fit_shapes);
    report["model"] = p.canonical();
    report["gamma_theory"] = ens.gamma_theory;
    report["n_realizations"] = c.cfg.rmt.n_realizations;
    report["warnings"] = ens.warnings;
  }
  report["profile"] = profile_json(f.profile);
  for (const auto& [shape, fit] : f.fits) {
    report["fits"][to_string(shape)] = fit_json(fit);
    out << "fit-lambda: " << to_string(shape) << " rate = " << fit.rate
        << " (residual " << fit.residual << ")\n";
  }
  em.write("lambda_profile.csv", profile_csv(c, f));
  em.write_json("lambda_fit.json", report);
  return exit_ok;
}

// ---------------------------------------------------------------- compare

struct Comparison {
  CorrelatorSeries exact, pred_l, pred_g;
  double max_abs_de = 0.0;
};

Operator<double> shifted(const Operator<double>& a, double de) {
  Operator<double> s = a;
  s.diagonal().array() -= de;
  return s;
}

CorrelatorSeries with_times(CorrelatorSeries s, std::span<const double> times) {
  s.times.assign(times.begin(), times.end());
  return s;
}

// Predictions for one state under both kernels.
Comparison compare_one(const CorrelatorRequest& r, const StateVector& psi,
                       const HamiltonianSet<double>& hs, const OpMap& ops,
                       std::span<const double> times, const OmegaSource& lor,
                       const OmegaSource& gau, bool four_point_raw,
                       std::optional<double> stub) {
  const auto& d0 = *hs.decomp0;
  const auto& df = *hs.decomp_full;
  auto op = [&](std::size_t j) -> const Operator<double>& { return ops.at(r.observables[j]); };
  auto de_of = [&](const Operator<double>& a) { return diagonal_ensemble_average(psi, df, a); };

  Comparison out;
  out.exact = exact_series(r, psi, df, ops, times);

  auto both = [&](auto&& predict, double shift) {
    if (stub) {
      KernelSeries k = constant_kernel(times, *stub);
      k.shift = shift;
      out.pred_l = predict(k);
      out.pred_g = predict(k);
      return;
    }
    out.pred_l = predict(sample_omega(lor, times, shift));
    out.pred_g = predict(sample_omega(gau, times, shift));
  };

  switch (r.kind) {
  case CorrelatorKind::one_point: {
    PredictionInputs in;
    in.reference = one_point_series(psi, d0, op(0), times, r.observables);
    in.a1_de = de_of(op(0));
    out.max_abs_de = std::abs(*in.a1_de);
    both([&](KernelSeries k) { in.omega = std::move(k); return predict_one_point(in); }, 0.0);
    break;
  }
  case CorrelatorKind::two_point: {
    const StateVector psi2 = r.t2 == 0.0 ? psi : evolve_state(df, psi, r.t2);
    std::vector<double> tau(times.begin(), times.end());
    for (auto& t : tau)
      t -= r.t2;
    PredictionInputs in;
    in.reference =
        with_times(two_point_series(psi2, d0, op(0), op(1), tau, 0.0, r.observables), times);
    in.a1_de = de_of(op(0));
    in.a2_static = expectation(psi2, op(1));
    out.max_abs_de = std::abs(*in.a1_de);
    both(
        [&](KernelSeries k) {
          in.omega = std::move(k);
          return r.t2 == 0.0 ? predict_two_point(in) : predict_two_time(in, r.t2);
        },
        r.t2);
    break;
  }
  case CorrelatorKind::otoc:
  case CorrelatorKind::four_point: {
    const std::vector<std::size_t> idx = r.kind == CorrelatorKind::otoc
                                             ? std::vector<std::size_t>{0, 1, 0, 1}
                                             : std::vector<std::size_t>{0, 1, 2, 3};
    std::vector<Operator<double>> a;
    PredictionInputs in;
    for (std::size_t j : idx) {
      const double de = de_of(op(j));
      a.push_back(four_point_raw ? op(j) : shifted(op(j), de));
      in.observable_de.push_back(four_point_raw ? de : de_of(a.back()));
      in.observable_norm.push_back(hs_norm(op(j)));
      out.max_abs_de = std::max(out.max_abs_de, std::abs(de));
    }
    in.reference = four_point_series(psi, d0, a[0], a[1], a[2], a[3], times, r.observables);
    FourPointOptions fo;
    fo.allow_nonzero_de = four_point_raw;
    both([&](KernelSeries k) { in.omega = std::move(k); return predict_four_point(in, fo); }, 0.0);
    break;
  }
  case CorrelatorKind::squared_commutator: {
    const double de1 = de_of(op(0)), de2 = de_of(op(1));
    out.max_abs_de = std::max(std::abs(de1), std::abs(de2));
    const Operator<double> a1 = shifted(op(0), de1), a2 = shifted(op(1), de2);
    const Operator<double> a1sq = a1 * a1, a2sq = a2 * a2;
    const auto parts = squared_commutator_parts(psi, d0, a1, a2, times, r.observables);
    SquaredCommutatorInputs in;
    in.f_ref = parts.f;
    in.i_ref = parts.i;
    in.d_ref = parts.d;
    in.a1sq_ref = one_point_series(psi, d0, a1sq, times, r.observables);
    in.a1sq_de = de_of(a1sq);
    in.a2sq_de = de_of(a2sq);
    in.a2sq_static = expectation(psi, a2sq).real();
    both(
        [&](KernelSeries k) {
          in.omega = std::move(k);
          return predict_squared_commutator(in);
        },
        0.0);
    break;
  }
  }
  return out;
}

struct Rms {
  double re = 0.0, im = 0.0, abs = 0.0;
  int n = 0;
};

Rms rms_in_window(const CorrelatorSeries& a, const CorrelatorSeries& b, double t0, double t1) {
  Rms r;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a.times[k] < t0 || a.times[k] > t1)
      continue;
    const cplx d = a.values[k] - b.values[k];
    r.re += d.real() * d.real();
    r.im += d.imag() * d.imag();
    ++r.n;
  }
  if (r.n > 0) {
    r.abs = std::sqrt((r.re + r.im) / r.n);
    r.re = std::sqrt(r.re / r.n);
    r.im = std::sqrt(r.im / r.n);
  }
  return r;
}

json rms_json(const Rms& r) {
  return {{"re", r.re}, {"im", r.im}, {"abs", r.abs}, {"n_points", r.n}};
}

int cmd_compare(Context& c, Emitter& em, std::ostream& out) {
  const HamiltonianSet<double> hs = chain_system(c);
  const bool stub = c.cfg.compare.omega_stub.has_value();
  // the stub needs no profile, which small systems may not support
  Fits f;
  if (!stub)
    f = fit_all(c, chain_profile(c, hs), {FitShape::lorentzian, FitShape::gaussian});
  const OmegaSource lor =
      stub ? OmegaSource{LorentzianKernel{0.0}} : omega_source(f.fits.at(FitShape::lorentzian));
  const OmegaSource gau =
      stub ? OmegaSource{GaussianKernel{0.0}} : omega_source(f.fits.at(FitShape::gaussian));
  const auto states = initial_states(c, hs);
  const OpMap ops = build_operators(c.cfg);
  const auto times = c.cfg.time_grid.times();
  const double t0 = c.cfg.compare.rms_t_min, t1 = c.cfg.compare.rms_t_max;

  json metrics;
  metrics["config_hash"] = c.config_hash;
  metrics["rms_window"] = {t0, t1};
  if (c.cfg.compare.omega_stub)
    metrics["omega_stub"] = *c.cfg.compare.omega_stub;
  if (!stub) {
    metrics["profile"] = profile_json(f.profile);
    for (const auto& [shape, fit] : f.fits)
      metrics["fits"][to_string(shape)] = fit_json(fit);
    out << "compare: Gamma = " << f.fits.at(FitShape::lorentzian).rate
        << ", K = " << f.fits.at(FitShape::gaussian).rate << "\n";
  }

  json de = json::object();
  for (const auto& [name, a] : ops) {
    std::vector<double> v(states.size());
    parallel_for(states.size(), c.cfg.threads,
                 [&](std::size_t r) { v[r] = diagonal_ensemble_average(states[r], *hs.decomp_full, a); });
    de[name] = EnsembleStats::from_samples(v).mean;
  }
  metrics["diagonal_ensemble"] = de;

  for (const auto& r : c.cfg.correlators) {
    note(c, "compare " + r.name());
    std::vector<Comparison> per(states.size());
    parallel_for(states.size(), c.cfg.threads, [&](std::size_t k) {
      per[k] = compare_one(r, states[k], hs, ops, times, lor, gau, c.cfg.compare.four_point_raw,
                           c.cfg.compare.omega_stub);
    });
    std::vector<CorrelatorSeries> ex, pl, pg;
    double max_de = 0.0;
    for (auto& p : per) {
      ex.push_back(std::move(p.exact));
      pl.push_back(std::move(p.pred_l));
      pg.push_back(std::move(p.pred_g));
      max_de = std::max(max_de, p.max_abs_de);
    }
    const auto e = average(std::move(ex)), l = average(std::move(pl)), g = average(std::move(pg));
    io::Metadata meta = base_meta(c);
    meta.emplace_back("kind", to_string(r.kind));
    std::string obs;
    for (const auto& o : r.observables)
      obs += (obs.empty() ? "" : ";") + o;
    meta.emplace_back("observables", obs);
    em.write("compare_" + r.name() + ".csv",
             io::csv_text(meta,
                          {"time", "exact_re", "exact_im", "pred_lorentzian", "pred_gaussian",
                           "pred_lorentzian_im", "pred_gaussian_im"},
                          {e.times, e.real(), e.imag(), l.real(), g.real(), l.imag(), g.imag()}));
    if (c.emit_plot) {
      em.write("plot/" + r.name() + ".csv", plot_csv(e, base_meta(c)));
      em.write("plot/" + r.name() + "_pred_lorentzian.csv", plot_csv(l, base_meta(c)));
      em.write("plot/" + r.name() + "_pred_gaussian.csv", plot_csv(g, base_meta(c)));
    }
    const Rms rl = rms_in_window(e, l, t0, t1), rg = rms_in_window(e, g, t0, t1);
    metrics["correlators"][r.name()] = {{"kind", to_string(r.kind)},
                                        {"observables", r.observables},
                                        {"rms_lorentzian", rms_json(rl)},
                                        {"rms_gaussian", rms_json(rg)},
                                        {"max_abs_de", max_de}};
    out << "compare: " << r.name() << " rms(lorentzian) = " << rl.abs
        << ", rms(gaussian) = " << rg.abs << "\n";
  }
  em.write_json("metrics.json", metrics);
  return exit_ok;
}

// ---------------------------------------------------------------- rmt-verify

int cmd_rmt_verify(Context& c, Emitter& em, std::ostream& out) {
  const RmtParams& p = c.cfg.rmt_params();
  EnsembleOptions eo;
  eo.window_fraction = c.cfg.lambda.window_fraction;
  eo.n_bins = c.cfg.lambda.n_bins;
  eo.range_factor = c.cfg.lambda.range_factor;
  eo.truncation_factor = c.cfg.lambda.truncation_factor;
  eo.threads = c.cfg.threads;
  note(c, "ensemble linewidth for " + p.canonical());
  const auto ens = ensemble_lambda_experiment(p, c.cfg.rmt.n_realizations, c.cfg.seed, eo);
  const double ratio = ens.fit.rate / ens.gamma_theory;

  json report;
  report["config_hash"] = c.config_hash;
  report["linewidth"] = {{"model", p.canonical()},
                         {"n_realizations", c.cfg.rmt.n_realizations},
                         {"gamma_theory", ens.gamma_theory},
                         {"fit", fit_json(ens.fit)},
                         {"ratio", ratio},
                         {"gamma_mean_per_realization", ens.gamma_per_realization.mean},
                         {"gamma_std_error", ens.gamma_per_realization.std_error
                                                 ? json(*ens.gamma_per_realization.std_error)
                                                 : json(nullptr)},
                         {"warnings", ens.warnings}};
  out << "rmt-verify: Gamma_fit / Gamma_theory = " << ratio << "\n";

  int failures = 0;
  json mc = json::array();
  for (std::size_t i = 0; i < c.cfg.rmt.monte_carlo.size(); ++i) {
    const auto& spec = c.cfg.rmt.monte_carlo[i];
    note(c, "Monte-Carlo eigenstate check for " + spec.params.canonical());
    const auto panel = exhaustive_panel(spec.params.dim);
    McOptions mo;
    mo.n_groups = c.cfg.rmt.mc_groups;
    mo.threads = c.cfg.threads;
    const McReport rep = monte_carlo_eigenstate_check(
        spec.params, spec.n_realizations, realization_seed(c.cfg.seed, 1000 + i), panel, mo);
    std::vector<std::string> family, label;
    std::vector<double> mean, formula, se, z;
    json rows = json::array();
    int bad = 0;
    for (const auto& r : rep.rows) {
      mean.push_back(r.mc_mean);
      formula.push_back(r.formula);
      se.push_back(r.std_error);
      z.push_back(r.z);
      if (!(std::abs(r.z) <= 3.0))
        ++bad;
      rows.push_back({{"family", to_string(r.tuple.family)},
                      {"label", r.tuple.label},
                      {"mc_mean", r.mc_mean},
                      {"formula", r.formula},
                      {"std_error", r.std_error},
                      {"z", r.z}});
    }
    failures += bad;
    json counts;
    for (auto fam : {TupleFamily::corr4, TupleFamily::corr6_two, TupleFamily::corr6_three})
      counts[to_string(fam)] = {{"within_3se", rep.count_within(fam, 3.0)},
                                {"total", rep.count(fam)}};
    mc.push_back({{"model", spec.params.canonical()},
                  {"n_realizations", spec.n_realizations},
                  {"counts", counts},
                  {"n_outside_3se", bad},
                  {"rows", rows}});
    std::vector<double> idx(rep.rows.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      idx[k] = double(k);
    em.write("mc_dim" + std::to_string(spec.params.dim) + ".csv",
             io::csv_text({{"model", spec.params.canonical()},
                           {"n_realizations", std::to_string(spec.n_realizations)}},
                          {"tuple", "mc_mean", "formula", "std_error", "z"},
                          {idx, mean, formula, se, z}));
    out << "rmt-verify: dim " << spec.params.dim << ": " << rep.rows.size() - bad << "/"
        << rep.rows.size() << " tuples within 3 SE\n";
  }
  report["monte_carlo"] = mc;

  if (c.cfg.rmt.self_averaging) {
    json sa = json::array();
    const auto& s = *c.cfg.rmt.self_averaging;
    double prev_spread = 0.0;
    for (std::size_t i = 0; i < s.dims.size(); ++i) {
      RmtParams q{s.dims[i], s.omega_n / s.dims[i], s.g};
      const auto r = self_averaging_check(q, {}, s.n_realizations,
                                          realization_seed(c.cfg.seed, 2000 + i), c.cfg.threads);
      sa.push_back({{"model", q.canonical()},
                    {"observable", "energy_shell_probability"},
                    {"t", r.t},
                    {"mean", r.stats.mean},
                    {"std_error", r.stats.std_error ? json(*r.stats.std_error) : json(nullptr)},
                    {"relative_spread", r.relative_spread}});
      if (i > 0 && r.relative_spread >= prev_spread)
        out << "rmt-verify: warning: relative spread did not decrease with dim\n";
      prev_spread = r.relative_spread;
      out << "rmt-verify: self-averaging dim " << q.dim << " relative spread "
          << r.relative_spread << "\n";
    }
    report["self_averaging"] = sa;
  }

  report["tuples_outside_3se"] = failures;
  em.write_json("rmt_report.json", report);
  if (failures > 0) {
    out << "rmt-verify: " << failures << " tuple(s) with |z| > 3\n";
    return exit_check_failed;
  }
  return exit_ok;
}

} // namespace

int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out,
                std::ostream& err) {
  try {
    Context c = make_context(opts, err);
    if (command == "simulate" || command == "compare")
      c.cfg.chain(); // model check before any output
    const std::string started = utc_now();
    Emitter em(c.cfg.output_dir);
    int code = exit_usage;
    if (command == "simulate")
      code = cmd_simulate(c, em, out);
    else if (command == "compare")
      code = cmd_compare(c, em, out);
    else if (command == "fit-lambda")
      code = cmd_fit_lambda(c, em, out);
    else if (command == "rmt-verify")
      code = cmd_rmt_verify(c, em, out);
    else
      throw ArgumentError("unknown command '" + command + "'");
    em.manifest(command, c.config_hash, c.cfg.seed, started);
    return code;
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return exit_validation;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return exit_numeric;
  } catch (const DomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_numeric;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Exact and predicted correlation functions in chaotic quantum systems", "chwf"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  CommandOptions opts;
  auto add = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", opts.config_path, "JSON run configuration")->required();
    s->add_option("--output-dir", opts.output_dir, "Directory for emitted files");
    s->add_option("--cache-dir", opts.cache_dir,
                  "Eigendecomposition cache directory (default: $CHWF_CACHE_DIR)");
    s->add_option("--seed", opts.seed, "Override the config seed");
    s->add_option("--threads", opts.threads, "Worker threads");
    s->add_flag("--emit-plot-data", opts.emit_plot_data, "Also write downsampled series");
    return s;
  };
  add("simulate", "Exact series under the full and non-interacting Hamiltonians");
  add("compare", "Exact series against Lorentzian and Gaussian predictions");
  add("rmt-verify", "Random-matrix linewidth and eigenstate-correlation checks");
  add("fit-lambda", "Chaotic wave-function profile and width fits");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_usage;
  }
  return run_command(app.get_subcommands().front()->get_name(), opts, std::cout, std::cerr);
}

} // namespace chaoscorr::cli
