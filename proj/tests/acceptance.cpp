// Acceptance driver. Prints one PASS/FAIL line per criterion; details go to
// stderr. Spin-chain criteria run the real CLI and recompute their metrics
// from the emitted CSV files.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "chaoscorr/chaoswf.hpp"
#include "chaoscorr/cli.hpp"
#include "chaoscorr/correlators.hpp"
#include "chaoscorr/io.hpp"
#include "chaoscorr/models.hpp"
#include "chaoscorr/predictions.hpp"
#include "chaoscorr/rmtlab.hpp"

#ifndef CHAOSCORR_CONFIG_DIR
#define CHAOSCORR_CONFIG_DIR "configs"
#endif

using namespace chaoscorr;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Env {
  fs::path configs;
  fs::path cache;
  fs::path work;
  int threads = 1;
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

json load_config(const Env& env, const std::string& name) {
  return json::parse(io::read_file(env.configs / name));
}

// Writes `cfg` next to its output directory and runs `command` on it.
fs::path run_cli(const Env& env, const std::string& command, json cfg, const std::string& tag,
                 const fs::path& cache, int threads) {
  const fs::path dir = env.work / tag;
  fs::remove_all(dir);
  fs::create_directories(dir);
  cfg["output_dir"] = (dir / "out").string();
  const fs::path cfg_path = dir / "config.json";
  io::atomic_write(cfg_path, cfg.dump(2) + "\n");

  cli::CommandOptions o;
  o.config_path = cfg_path.string();
  o.cache_dir = cache.string();
  o.threads = threads;
  std::ostringstream out, err;
  const auto t0 = std::chrono::steady_clock::now();
  const int code = cli::run_command(command, o, out, err);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  [" << tag << "] chwf " << command << " exit " << code << " in " << num(secs)
            << " s\n";
  std::istringstream lines(out.str());
  for (std::string l; std::getline(lines, l);)
    std::cerr << "    " << l << "\n";
  if (code != cli::exit_ok)
    throw std::runtime_error(command + " exited with " + std::to_string(code) + ": " + err.str());
  return dir / "out";
}

fs::path run_cli(const Env& env, const std::string& command, json cfg, const std::string& tag) {
  return run_cli(env, command, std::move(cfg), tag, env.cache, env.threads);
}

struct Table {
  io::CsvTable t;
  const std::vector<double>& col(const std::string& name) const {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
      if (t.columns[i] == name)
        return t.data[i];
    throw std::runtime_error("missing column " + name);
  }
};

Table read_table(const fs::path& p) { return {io::parse_csv(io::read_file(p))}; }

// RMS of f(k) over rows with t in [t0, t1]
double rms(const Table& tab, double t0, double t1, const std::function<double(std::size_t)>& f) {
  const auto& t = tab.col("time");
  double ss = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= t0 && t[k] <= t1) {
      const double d = f(k);
      ss += d * d;
      ++n;
    }
  if (n == 0)
    throw std::runtime_error("empty RMS window");
  return std::sqrt(ss / n);
}

json with_correlators(json cfg, std::initializer_list<json> correlators) {
  cfg["correlators"] = json::array();
  for (const auto& c : correlators)
    cfg["correlators"].push_back(c);
  return cfg;
}

json corr(const std::string& kind, std::vector<std::string> obs) {
  return {{"kind", kind}, {"observables", obs}};
}

// ---------------------------------------------------------------- criteria

Verdict c1_weak_fit(const Env& env) {
  const fs::path out = run_cli(env, "fit-lambda", load_config(env, "weak_coupling.json"), "c1");
  const json fit = json::parse(io::read_file(out / "lambda_fit.json"));
  const double g = fit["fits"]["lorentzian"]["rate"];
  return {g >= 0.070 && g <= 0.105, "Lorentzian Gamma = " + num(g) + ", required [0.070, 0.105]"};
}

Verdict c2_strong_fit(const Env& env) {
  const fs::path out =
      run_cli(env, "fit-lambda", load_config(env, "strong_coupling.json"), "c2");
  const json fit = json::parse(io::read_file(out / "lambda_fit.json"));
  const double k = fit["fits"]["gaussian"]["rate"];
  const double g = fit["fits"]["lorentzian"]["rate"];
  const bool ok = k >= 0.23 && k <= 0.39 && g >= 0.59 && g <= 0.99;
  return {ok, "Gaussian K = " + num(k) + " (required [0.23, 0.39]), Lorentzian Gamma = " +
                  num(g) + " (required [0.59, 0.99])"};
}

Verdict c3_one_point(const Env& env) {
  const json cfg = with_correlators(load_config(env, "weak_coupling.json"),
                                    {corr("one_point", {"sigma_x(1)"}),
                                     corr("one_point", {"sigma_z(1)"})});
  const fs::path out = run_cli(env, "compare", cfg, "c3");
  bool ok = true;
  std::string detail;
  for (const char* name : {"one_point_sigma_x1", "one_point_sigma_z1"}) {
    const Table t = read_table(out / ("compare_" + std::string(name) + ".csv"));
    const auto &ex = t.col("exact_re"), &pl = t.col("pred_lorentzian");
    const double r = rms(t, 0, 30, [&](std::size_t k) { return ex[k] - pl[k]; });
    ok = ok && r <= 0.1;
    detail += std::string(detail.empty() ? "" : ", ") + name + " rms " + num(r);
  }
  return {ok, detail + " over t in [0, 30], required <= 0.1"};
}

Verdict c4_two_point(const Env& env) {
  const json cfg = with_correlators(load_config(env, "weak_coupling.json"),
                                    {corr("two_point", {"sigma_x(1)", "sigma_z(1)"}),
                                     corr("two_point", {"sigma_x(1)", "sigma_x(1)"})});
  const fs::path out = run_cli(env, "compare", cfg, "c4");
  bool ok = true;
  std::string detail;
  for (const char* name : {"two_point_sigma_x1_sigma_z1", "two_point_sigma_x1_sigma_x1"}) {
    const Table t = read_table(out / ("compare_" + std::string(name) + ".csv"));
    const auto &er = t.col("exact_re"), &ei = t.col("exact_im");
    const auto &pr = t.col("pred_lorentzian"), &pi = t.col("pred_lorentzian_im");
    const double rr = rms(t, 0, 30, [&](std::size_t k) { return er[k] - pr[k]; });
    const double ri = rms(t, 0, 30, [&](std::size_t k) { return ei[k] - pi[k]; });
    ok = ok && rr <= 0.15 && ri <= 0.15;
    detail += std::string(detail.empty() ? "" : ", ") + name + " rms re " + num(rr) + " im " +
              num(ri);
  }
  return {ok, detail + ", required <= 0.15"};
}

Verdict c5_otoc(const Env& env) {
  const json cfg = with_correlators(load_config(env, "weak_coupling.json"),
                                    {corr("otoc", {"sigma_x(1)", "sigma_z(1)"}),
                                     corr("otoc", {"sigma_x(1)", "sigma_x(1)"})});
  const fs::path out = run_cli(env, "compare", cfg, "c5");
  bool ok = true;
  std::string detail;
  for (const char* name : {"otoc_sigma_x1_sigma_z1", "otoc_sigma_x1_sigma_x1"}) {
    const Table t = read_table(out / ("compare_" + std::string(name) + ".csv"));
    const auto &er = t.col("exact_re"), &ei = t.col("exact_im");
    const auto &pr = t.col("pred_lorentzian"), &pi = t.col("pred_lorentzian_im");
    const double r = rms(t, 0, 30, [&](std::size_t k) {
      return std::hypot(er[k] - pr[k], ei[k] - pi[k]);
    });
    ok = ok && r <= 0.2;
    detail += std::string(detail.empty() ? "" : ", ") + name + " rms " + num(r);
  }
  return {ok, detail + " (complex modulus), required <= 0.2"};
}

Verdict c6_squared_commutator(const Env& env) {
  const json cfg =
      with_correlators(load_config(env, "weak_coupling.json"),
                       {corr("squared_commutator", {"projector_up(1)", "sigma_z(1)"})});
  const fs::path out = run_cli(env, "compare", cfg, "c6");
  const Table t = read_table(out / "compare_squared_commutator_projector_up1_sigma_z1.csv");
  const auto& ex = t.col("exact_re");
  const double c0 = std::abs(ex.front());
  const double tail = rms(t, 30, 40, [&](std::size_t k) { return ex[k] - 0.5; });
  const auto& pl = t.col("pred_lorentzian");
  const double pred = rms(t, 0, 30, [&](std::size_t k) { return ex[k] - pl[k]; });
  std::cerr << "  squared commutator prediction rms over [0, 30]: " << num(pred) << "\n";
  return {c0 <= 1e-9 && tail <= 0.1, "|C(0)| = " + num(c0, 3) +
                                         " (required <= 1e-9), rms(C - 1/2) over [30, 40] = " +
                                         num(tail) + " (required <= 0.1)"};
}

Verdict c7_rmt_linewidth(const Env& env) {
  json cfg = load_config(env, "rmt_n400.json");
  cfg["lambda_extraction"] = {{"fit_shapes", {"lorentzian"}}};
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = run_cli(env, "fit-lambda", cfg, "c7");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json fit = json::parse(io::read_file(out / "lambda_fit.json"));
  const double g = fit["fits"]["lorentzian"]["rate"];
  const double theory = fit["gamma_theory"];
  const int n = fit["n_realizations"];
  const double ratio = g / theory;
  const bool ok = std::abs(ratio - 1.0) <= 0.15 && n >= 20 && secs <= 300.0;
  return {ok, "Gamma_fit = " + num(g) + ", pi g^2/(omega N) = " + num(theory) + ", ratio " +
                  num(ratio) + " over " + std::to_string(n) +
                  " realizations (required within 15%), " + num(secs, 3) + " s (limit 300 s)"};
}

Verdict c8_eigenstate_correlations(const Env& env) {
  // Same model sizes and seeds as rmt-verify with configs/rmt_n400.json.
  const json cfg = load_config(env, "rmt_n400.json");
  const std::uint64_t seed = cfg.value("seed", std::uint64_t(0));
  const auto& specs = cfg["rmt"]["monte_carlo"];
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const RmtParams p{specs[i]["dim"], specs[i]["omega"], specs[i]["g"]};
    const int n_real = specs[i]["n_realizations"];
    const auto panel = exhaustive_panel(p.dim);
    McOptions mo;
    mo.threads = env.threads;
    const McReport rep =
        monte_carlo_eigenstate_check(p, n_real, realization_seed(seed, 1000 + i), panel, mo);
    detail += std::string(detail.empty() ? "" : "; ") + "N = " + std::to_string(p.dim) + ":";
    for (auto fam : {TupleFamily::corr4, TupleFamily::corr6_two, TupleFamily::corr6_three}) {
      const int within = rep.count_within(fam, 3.0);
      ok = ok && within >= 5;
      detail += " " + to_string(fam) + " " + std::to_string(within) + "/" +
                std::to_string(rep.count(fam));
    }
    for (const auto& r : rep.rows)
      if (!(std::abs(r.z) <= 3.0))
        std::cerr << "  N = " << p.dim << " outside 3 SE: " << r.tuple.label << " z = "
                  << num(r.z) << "\n";
  }
  return {ok, detail + " within 3 SE (required >= 5 per family)"};
}

// Each invariant reports its worst value against its bound.
struct Check {
  std::string name;
  double value;
  double bound;
  bool ok() const { return value <= bound; }
};

StateVector random_state(int n_sites, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return random_product_state(n_sites, gen);
}

std::vector<double> linspace(double t_max, int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k)
    t[k] = t_max * k / (n - 1);
  return t;
}

Verdict c9_invariants(const Env& env) {
  std::vector<Check> checks;

  // fitted kernels and overlap rows on the 12-spin weak-coupling chain
  {
    const ChainParams p = ChainParams::weak_coupling();
    const HamiltonianSet<double> hs = build_spin_chain(p);
    const io::DecompositionCache cache(env.cache);
    const auto d0 = cache.get_or_compute(p.canonical() + ";h0",
                                         [&] { return hermitian_eigendecomposition(hs.h0); });
    const auto df = cache.get_or_compute(p.canonical() + ";full",
                                         [&] { return hermitian_eigendecomposition(hs.h_full); });
    const auto ov = overlap_matrix(df, d0);
    checks.push_back({"overlap row norm defect", ov.row_norm_defect(), 1e-10});

    const ChaoticProfile prof = lambda_profile(ov, 0.2, 101);
    const FitResult lf = fit_profile(prof, FitShape::lorentzian);
    const FitResult gf = fit_profile(prof, FitShape::gaussian);
    const std::vector<OmegaSource> fitted{omega_source(lf), omega_source(gf)};
    double at_zero = 0.0, asym = 0.0;
    for (const auto& s : fitted)
      at_zero = std::max(at_zero, std::abs(omega_of_t(s, 0.0) - 1.0));
    for (const auto& s : {fitted[0], fitted[1], OmegaSource{NumericKernel{prof}}})
      for (double t : linspace(40, 81))
        asym = std::max(asym, std::abs(omega_of_t(s, t) - omega_of_t(s, -t)));
    checks.push_back({"|Omega(0) - 1| (fitted kernels)", at_zero, 1e-12});
    checks.push_back({"|Omega(t) - Omega(-t)|", asym, 1e-12});
    std::cerr << "  numeric kernel Omega(0) = captured profile mass " << num(prof.normalization())
              << "\n";

    // regression identity on predicted envelopes with the fitted rates
    double worst = 0.0;
    for (const FitResult* f : {&lf, &gf}) {
      const OmegaSource src = omega_source(*f);
      for (int n : {2, 4}) {
        const auto ts = linspace(n == 4 && f->shape == FitShape::gaussian ? 30 : 40, 401);
        CorrelatorSeries ref;
        ref.times = ts;
        ref.values.assign(ts.size(), cplx(0.8, 0.0));
        PredictionInputs in;
        in.reference = ref;
        in.omega = sample_omega(src, ts);
        CorrelatorSeries pred;
        double baseline = 0.0;
        if (n == 2) {
          in.a1_de = 0.1;
          pred = predict_one_point(in);
          baseline = 0.1;
        } else {
          in.reference.kind = CorrelatorKind::four_point;
          in.observable_de = {0.0, 0.0};
          in.observable_norm = {1.0, 1.0};
          pred = predict_four_point(in);
        }
        worst = std::max(worst, regression_residual(pred, {f->shape, f->rate, n, baseline}));
      }
    }
    checks.push_back({"regression residual, n in {2, 4}", worst, 1e-6});
  }

  // 8-spin chain: Heisenberg spectra, squared commutator sign, Hermiticity
  {
    ChainParams p;
    p.n_sites = 8;
    p.r1 = 4;
    p.r2 = 7;
    p.jx_i = 0.4;
    const HamiltonianSet<double> hs = build_spin_chain(p);
    const auto df = hermitian_eigendecomposition(hs.h_full);
    const int n = p.n_sites;
    const Operator<double> a = embed_site_operator(pauli::x(), 1, n) +
                               0.5 * embed_site_operator(pauli::z(), 3, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sa(a, Eigen::EigenvaluesOnly);
    double spec = 0.0;
    for (double t : {0.7, 13.1, 250.0}) {
      const Operator<cplx> at = heisenberg_operator(df, a, t);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> st(at, Eigen::EigenvaluesOnly);
      spec = std::max(spec, (st.eigenvalues() - sa.eigenvalues()).cwiseAbs().maxCoeff());
    }
    checks.push_back({"Heisenberg spectrum drift", spec, 1e-9});

    const auto ts = linspace(40, 401);
    const Operator<double> pu = embed_site_operator(pauli::projector_up(), 1, n);
    const Operator<double> z1 = embed_site_operator(pauli::z(), 1, n);
    const Operator<double> x1 = embed_site_operator(pauli::x(), 1, n);
    const Operator<double> zn = embed_site_operator(pauli::z(), n, n);
    double neg = 0.0, herm = 0.0;
    for (std::uint64_t s = 1; s <= 3; ++s) {
      const StateVector psi = random_state(n, s);
      for (const auto& [a1, a2] : {std::pair{&pu, &z1}, std::pair{&x1, &zn}}) {
        const auto c = squared_commutator_series(psi, df, *a1, *a2, ts);
        for (const auto& v : c.values)
          neg = std::max(neg, -v.real());
      }
      // <A(t) A(0)> against <A(0) A(t)> built from the Heisenberg operator
      const auto g = two_point_series(psi, df, x1, x1, ts, 0.0);
      for (std::size_t k = 0; k < ts.size(); k += 40) {
        const Operator<cplx> xt = heisenberg_operator(df, x1, ts[k]);
        const cplx rev = psi.dot(x1.cast<cplx>() * (xt * psi));
        herm = std::max(herm, std::abs(std::conj(g.values[k]) - rev));
      }
    }
    checks.push_back({"max(-C(t))", neg, 1e-9});
    checks.push_back({"autocorrelation Hermiticity defect", herm, 1e-9});
  }

  // 3-spin nondegenerate instance: DE against a long-time average
  {
    ChainParams p;
    p.n_sites = 3;
    p.r1 = 2;
    p.r2 = 3;
    p.bz_s = 0.43;
    p.bx_s = 0.37;
    p.bx_b = 0.29;
    p.jx_b = 0.71;
    p.jz_i = 0.23;
    p.jx_i = 0.61;
    const HamiltonianSet<double> hs = build_spin_chain(p);
    const auto df = hermitian_eigendecomposition(hs.h_full);
    double gap = 1e300;
    for (Index k = 1; k < df.dim(); ++k)
      gap = std::min(gap, df.energies(k) - df.energies(k - 1));
    const Operator<double> a = embed_site_operator(pauli::projector_up(), 1, 3);
    const StateVector psi = neel_state(3);
    const double de = diagonal_ensemble_average(psi, df, a);
    const auto ts = linspace(4000, 80001);
    const auto s = one_point_series(psi, df, a, ts);
    double avg = 0.0;
    for (const auto& v : s.values)
      avg += v.real();
    avg /= double(s.size());
    std::cerr << "  3-spin: min level gap " << num(gap) << ", DE " << num(de)
              << ", time average " << num(avg) << "\n";
    checks.push_back({"|DE - time average| / |DE|", gap > 1e-6 ? std::abs(de - avg) / std::abs(de)
                                                               : 1e300,
                      0.02});
  }

  // full CLI runs: cold and warm cache, different thread counts
  {
    json cfg = {{"model",
                 {{"type", "spin_chain"}, {"n_sites", 8}, {"r1", 4}, {"r2", 7}, {"jx_i", 0.4}}},
                {"initial_state",
                 {{"kind", "random_product"}, {"seed", 5}, {"n_bath_realizations", 3}}},
                {"correlators",
                 json::array({corr("one_point", {"sigma_x(1)"}),
                              corr("two_point", {"sigma_x(1)", "sigma_z(1)"}),
                              corr("otoc", {"sigma_x(1)", "sigma_z(1)"}),
                              corr("squared_commutator", {"projector_up(1)", "sigma_z(1)"})})},
                {"time_grid", {{"t_max", 20}, {"n_points", 81}}},
                {"compare", {{"rms_window", {0, 20}}}},
                {"seed", 3}};
    const fs::path cache = env.work / "c9_cache";
    fs::remove_all(cache);
    bool same = true;
    for (const char* cmd : {"simulate", "compare"}) {
      const json m1 = json::parse(
          io::read_file(run_cli(env, cmd, cfg, std::string("c9_") + cmd + "_a", cache, 1) /
                        "manifest.json"));
      const json m2 = json::parse(io::read_file(
          run_cli(env, cmd, cfg, std::string("c9_") + cmd + "_b", cache, env.threads) /
          "manifest.json"));
      same = same && m1["files"] == m2["files"] && !m1["files"].empty();
    }
    checks.push_back({"CLI digest mismatch", same ? 0.0 : 1.0, 0.0});
  }

  bool ok = true;
  std::string detail;
  for (const auto& c : checks) {
    ok = ok && c.ok();
    std::cerr << "  " << (c.ok() ? "ok  " : "BAD ") << c.name << " = " << num(c.value, 3)
              << " (bound " << num(c.bound, 3) << ")\n";
    if (!c.ok())
      detail += std::string(detail.empty() ? "" : ", ") + c.name + " = " + num(c.value, 3);
  }
  return {ok, ok ? std::to_string(checks.size()) + " invariants hold" : "violated: " + detail};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"chaoscorr acceptance checks"};
  std::vector<int> only;
  std::string cache_dir, work_dir = "acceptance_out", config_dir = CHAOSCORR_CONFIG_DIR;
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--cache-dir", cache_dir, "eigendecomposition cache (default: <work>/cache)");
  app.add_option("--work-dir", work_dir, "scratch directory for CLI outputs");
  app.add_option("--config-dir", config_dir, "directory holding the shipped configs");
  app.add_option("--threads", threads)->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  Env env{config_dir, cache_dir.empty() ? fs::path(work_dir) / "cache" : fs::path(cache_dir),
          work_dir, threads};
  fs::create_directories(env.work);
  fs::create_directories(env.cache);

  const std::vector<std::pair<std::string, std::function<Verdict(const Env&)>>> criteria{
      {"weak-coupling Lambda fit", c1_weak_fit},
      {"strong-coupling Lambda fit", c2_strong_fit},
      {"one-point envelopes", c3_one_point},
      {"two-point agreement", c4_two_point},
      {"OTOC agreement", c5_otoc},
      {"squared commutator", c6_squared_commutator},
      {"RMT linewidth", c7_rmt_linewidth},
      {"eigenstate correlations vs Monte Carlo", c8_eigenstate_correlations},
      {"invariant suite", c9_invariants},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end())
      continue;
    Verdict v;
    try {
      v = criteria[i].second(env);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
              << "): " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
