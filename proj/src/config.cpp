#include "chaoscorr/config.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

namespace chaoscorr {

using json = nlohmann::json;

namespace {

// Reads the keys of one JSON object and rejects anything it did not consume.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const char* key) const { return path_ + "/" + key; }

  template <typename T> void get(const char* key, T& out) {
    const json* v = raw(key);
    if (!v)
      return;
    out = convert<T>(*v, at(key));
  }

  template <typename T> T require(const char* key) {
    const json* v = raw(key);
    if (!v)
      throw ConfigError(at(key) + ": required field is missing");
    return convert<T>(*v, at(key));
  }

  Section child(const char* key) {
    const json* v = raw(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, at(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError(path_ + "/" + it.key() + ": unknown key");
  }

  template <typename T> static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean())
        throw ConfigError(path + ": expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string())
        throw ConfigError(path + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer())
        throw ConfigError(path + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned())
          return v.get<T>();
        if (v.get<std::int64_t>() < 0)
          throw ConfigError(path + ": expected a non-negative integer");
      }
      return v.get<T>();
    } else {
      if (!v.is_number())
        throw ConfigError(path + ": expected a number");
      return v.get<T>();
    }
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

struct Factor {
  std::string base;
  int site;
};

std::vector<Factor> observable_factors(const std::string& name) {
  static const std::regex one(R"(\s*(sigma_x|sigma_z|sigma_plus|sigma_minus|projector_up)\((\d+)\)\s*)");
  static const std::regex ident(R"(\s*identity\s*)");
  std::vector<Factor> out;
  std::stringstream ss(name);
  std::string part;
  std::size_t parts = 0;
  while (std::getline(ss, part, '*')) {
    ++parts;
    std::smatch m;
    if (std::regex_match(part, ident))
      continue;
    if (!std::regex_match(part, m, one))
      throw ConfigError("unknown observable '" + name + "'");
    out.push_back({m[1].str(), std::stoi(m[2].str())});
  }
  // getline drops a trailing empty factor
  if (parts == 0 || parts != std::size_t(std::count(name.begin(), name.end(), '*')) + 1)
    throw ConfigError("unknown observable '" + name + "'");
  return out;
}

Operator<double> base_matrix(const std::string& b) {
  if (b == "sigma_x")
    return pauli::x();
  if (b == "sigma_z")
    return pauli::z();
  if (b == "sigma_plus")
    return pauli::plus();
  if (b == "sigma_minus")
    return pauli::minus();
  return pauli::projector_up();
}

CorrelatorKind kind_from_string(const std::string& s, const std::string& path) {
  for (auto k : {CorrelatorKind::one_point, CorrelatorKind::two_point,
                 CorrelatorKind::four_point, CorrelatorKind::otoc,
                 CorrelatorKind::squared_commutator})
    if (to_string(k) == s)
      return k;
  throw ConfigError(path + ": unknown correlator kind '" + s + "'");
}

std::size_t arity(CorrelatorKind k) {
  switch (k) {
  case CorrelatorKind::one_point:
    return 1;
  case CorrelatorKind::four_point:
    return 4;
  default:
    return 2;
  }
}

RmtParams read_rmt(Section& s) {
  RmtParams p;
  s.get("dim", p.dim);
  s.get("omega", p.omega);
  s.get("g", p.g);
  return p;
}

std::vector<CorrelatorRequest> default_correlators() {
  const std::string x = "sigma_x(1)", z = "sigma_z(1)", p = "projector_up(1)";
  return {
      {CorrelatorKind::one_point, {x}, 0.0},
      {CorrelatorKind::one_point, {z}, 0.0},
      {CorrelatorKind::two_point, {x, z}, 0.0},
      {CorrelatorKind::two_point, {x, x}, 0.0},
      {CorrelatorKind::otoc, {x, z}, 0.0},
      {CorrelatorKind::otoc, {x, x}, 0.0},
      {CorrelatorKind::squared_commutator, {p, z}, 0.0},
  };
}

std::string stem(const std::string& obs) {
  std::string s;
  for (char c : obs) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
      s += c;
    else if (c == '*')
      s += "_";
  }
  return s;
}

} // namespace

std::string CorrelatorRequest::name() const {
  std::string s = to_string(kind);
  for (const auto& o : observables)
    s += "_" + stem(o);
  if (kind == CorrelatorKind::two_point && t2 != 0.0) {
    std::ostringstream os;
    os << "_t2_" << t2;
    s += os.str();
  }
  return s;
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(static_cast<std::size_t>(n_points));
  for (int k = 0; k < n_points; ++k)
    t[std::size_t(k)] = n_points == 1 ? 0.0 : t_max * k / (n_points - 1);
  return t;
}

const ChainParams& RunConfig::chain() const {
  if (const auto* p = std::get_if<ChainParams>(&model))
    return *p;
  throw ConfigError("/model/type: this command needs a spin_chain model");
}

const RmtParams& RunConfig::rmt_params() const {
  if (const auto* p = std::get_if<RmtParams>(&model))
    return *p;
  throw ConfigError("/model/type: this command needs a deutsch model");
}

Operator<double> observable_operator(const std::string& name, int n_sites) {
  const auto factors = observable_factors(name);
  // Factors on the same site multiply in the order written.
  std::vector<SiteFactor<double>> merged;
  for (const auto& f : factors) {
    if (f.site < 1 || f.site > n_sites)
      throw ConfigError("observable '" + name + "': site " + std::to_string(f.site) +
                        " out of range [1, " + std::to_string(n_sites) + "]");
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const auto& m) { return m.site == f.site; });
    if (it == merged.end())
      merged.push_back({f.site, base_matrix(f.base)});
    else
      it->base = (it->base * base_matrix(f.base)).eval();
  }
  const Index d = hilbert_dim(n_sites);
  Operator<double> m = Operator<double>::Zero(d, d);
  add_product_term<double>(m, 1.0, merged, n_sites);
  return m;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Section top(root, "");
  RunConfig c;

  {
    if (!top.has("model"))
      throw ConfigError("/model: required section is missing");
    Section m = top.child("model");
    const auto type = m.require<std::string>("type");
    if (type == "spin_chain") {
      ChainParams p;
      m.get("n_sites", p.n_sites);
      m.get("bz_s", p.bz_s);
      m.get("bx_s", p.bx_s);
      m.get("bx_b", p.bx_b);
      m.get("jx_b", p.jx_b);
      m.get("jz_i", p.jz_i);
      m.get("jx_i", p.jx_i);
      m.get("r1", p.r1);
      m.get("r2", p.r2);
      try {
        p.validate();
      } catch (const ArgumentError& e) {
        throw ConfigError(std::string("/model: ") + e.what());
      }
      c.model = p;
    } else if (type == "deutsch") {
      RmtParams p = read_rmt(m);
      try {
        p.validate();
      } catch (const ArgumentError& e) {
        throw ConfigError(std::string("/model: ") + e.what());
      }
      c.model = p;
    } else {
      throw ConfigError("/model/type: unknown model '" + type + "'");
    }
    m.finish();
  }

  {
    Section s = top.child("initial_state");
    std::string kind = "h0_eigenstate";
    s.get("kind", kind);
    using K = InitialStateSpec::Kind;
    if (kind == "h0_eigenstate")
      c.initial_state.kind = K::h0_eigenstate;
    else if (kind == "neel")
      c.initial_state.kind = K::neel;
    else if (kind == "random_product")
      c.initial_state.kind = K::random_product;
    else
      throw ConfigError(s.at("kind") + ": unknown initial state '" + kind + "'");
    s.get("index", c.initial_state.index);
    s.get("index_base", c.initial_state.index_base);
    s.get("seed", c.initial_state.seed);
    s.get("acceptance_window", c.initial_state.acceptance_window);
    s.get("max_attempts", c.initial_state.max_attempts);
    s.get("n_bath_realizations", c.n_bath_realizations);
    if (c.initial_state.index_base != 0 && c.initial_state.index_base != 1)
      throw ConfigError(s.at("index_base") + ": must be 0 or 1");
    if (c.n_bath_realizations < 1)
      throw ConfigError(s.at("n_bath_realizations") + ": must be >= 1");
    if (c.initial_state.max_attempts < 1)
      throw ConfigError(s.at("max_attempts") + ": must be >= 1");
    s.finish();
    if (c.is_spin_chain())
      c.initial_state.n_sites = c.chain().n_sites;
  }

  if (const json* obs = top.raw("observables")) {
    if (!obs->is_array())
      throw ConfigError("/observables: expected an array of names");
    for (std::size_t i = 0; i < obs->size(); ++i) {
      const std::string path = "/observables/" + std::to_string(i);
      const auto name = Section::convert<std::string>((*obs)[i], path);
      try {
        observable_factors(name);
      } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
      }
      c.observables.push_back(name);
    }
  } else {
    c.observables = {"sigma_x(1)", "sigma_z(1)", "projector_up(1)"};
  }

  if (const json* cs = top.raw("correlators")) {
    if (!cs->is_array())
      throw ConfigError("/correlators: expected an array");
    for (std::size_t i = 0; i < cs->size(); ++i) {
      Section s((*cs)[i], "/correlators/" + std::to_string(i));
      CorrelatorRequest r;
      r.kind = kind_from_string(s.require<std::string>("kind"), s.at("kind"));
      const json* names = s.raw("observables");
      if (!names || !names->is_array())
        throw ConfigError(s.at("observables") + ": expected an array of names");
      for (std::size_t j = 0; j < names->size(); ++j)
        r.observables.push_back(Section::convert<std::string>(
            (*names)[j], s.at("observables") + "/" + std::to_string(j)));
      s.get("t2", r.t2);
      if (r.t2 != 0.0 && r.kind != CorrelatorKind::two_point)
        throw ConfigError(s.at("t2") + ": only two_point correlators take t2");
      if (r.observables.size() != arity(r.kind))
        throw ConfigError(s.at("observables") + ": " + to_string(r.kind) + " takes " +
                          std::to_string(arity(r.kind)) + " observables");
      s.finish();
      c.correlators.push_back(std::move(r));
    }
  } else {
    c.correlators = default_correlators();
  }
  for (std::size_t i = 0; i < c.correlators.size(); ++i)
    for (std::size_t j = 0; j < c.correlators[i].observables.size(); ++j) {
      const auto& o = c.correlators[i].observables[j];
      if (std::find(c.observables.begin(), c.observables.end(), o) == c.observables.end())
        throw ConfigError("/correlators/" + std::to_string(i) + "/observables/" +
                          std::to_string(j) + ": unknown observable '" + o + "'");
    }

  {
    Section s = top.child("time_grid");
    s.get("t_max", c.time_grid.t_max);
    s.get("n_points", c.time_grid.n_points);
    if (!(c.time_grid.t_max >= 0.0) || c.time_grid.n_points < 1)
      throw ConfigError("/time_grid: need t_max >= 0 and n_points >= 1");
    s.finish();
  }

  {
    Section s = top.child("lambda_extraction");
    auto& l = c.lambda;
    s.get("window_fraction", l.window_fraction);
    s.get("n_bins", l.n_bins);
    s.get("range_factor", l.range_factor);
    s.get("truncation_factor", l.truncation_factor);
    if (const json* fs = s.raw("fit_shapes")) {
      if (!fs->is_array() || fs->empty())
        throw ConfigError(s.at("fit_shapes") + ": expected a non-empty array");
      l.fit_shapes.clear();
      for (std::size_t i = 0; i < fs->size(); ++i) {
        const auto path = s.at("fit_shapes") + "/" + std::to_string(i);
        try {
          l.fit_shapes.push_back(
              fit_shape_from_string(Section::convert<std::string>((*fs)[i], path)));
        } catch (const ConfigError&) {
          throw;
        } catch (const std::exception& e) {
          throw ConfigError(path + ": " + e.what());
        }
      }
    }
    if (!(l.window_fraction > 0.0 && l.window_fraction <= 1.0))
      throw ConfigError(s.at("window_fraction") + ": must be in (0, 1]");
    if (l.n_bins < 8)
      throw ConfigError(s.at("n_bins") + ": must be >= 8");
    if (!(l.range_factor > 0.0))
      throw ConfigError(s.at("range_factor") + ": must be positive");
    s.finish();
  }

  {
    Section s = top.child("compare");
    if (const json* w = s.raw("rms_window")) {
      if (!w->is_array() || w->size() != 2)
        throw ConfigError(s.at("rms_window") + ": expected [t_min, t_max]");
      c.compare.rms_t_min = Section::convert<double>((*w)[0], s.at("rms_window") + "/0");
      c.compare.rms_t_max = Section::convert<double>((*w)[1], s.at("rms_window") + "/1");
      if (!(c.compare.rms_t_min <= c.compare.rms_t_max))
        throw ConfigError(s.at("rms_window") + ": t_min must not exceed t_max");
    }
    s.get("four_point_raw", c.compare.four_point_raw);
    if (s.raw("omega_stub")) {
      double v = 1.0;
      s.get("omega_stub", v);
      c.compare.omega_stub = v;
    }
    s.finish();
  }

  {
    Section s = top.child("rmt");
    s.get("n_realizations", c.rmt.n_realizations);
    s.get("mc_groups", c.rmt.mc_groups);
    if (c.rmt.n_realizations < 1)
      throw ConfigError(s.at("n_realizations") + ": must be >= 1");
    if (c.rmt.mc_groups < 2)
      throw ConfigError(s.at("mc_groups") + ": must be >= 2");
    if (const json* mc = s.raw("monte_carlo")) {
      if (!mc->is_array())
        throw ConfigError(s.at("monte_carlo") + ": expected an array");
      for (std::size_t i = 0; i < mc->size(); ++i) {
        Section e((*mc)[i], s.at("monte_carlo") + "/" + std::to_string(i));
        McEnsembleSpec spec;
        spec.params = read_rmt(e);
        spec.n_realizations = e.require<int>("n_realizations");
        if (spec.n_realizations < 1)
          throw ConfigError(e.at("n_realizations") + ": must be >= 1");
        try {
          spec.params.validate(false);
        } catch (const ArgumentError& ex) {
          throw ConfigError(e.at("") + " " + ex.what());
        }
        e.finish();
        c.rmt.monte_carlo.push_back(spec);
      }
    } else {
      c.rmt.monte_carlo = {{RmtParams{120, 0.01, 0.2}, 10000},
                           {RmtParams{200, 0.01, 0.25}, 5000}};
    }
    if (s.has("self_averaging")) {
      Section e = s.child("self_averaging");
      SelfAveragingSettings sa;
      if (const json* d = e.raw("dims")) {
        if (!d->is_array() || d->empty())
          throw ConfigError(e.at("dims") + ": expected a non-empty array");
        for (std::size_t i = 0; i < d->size(); ++i)
          sa.dims.push_back(
              Section::convert<int>((*d)[i], e.at("dims") + "/" + std::to_string(i)));
      } else {
        sa.dims = {100, 400};
      }
      e.get("omega_n", sa.omega_n);
      e.get("g", sa.g);
      if (!(sa.omega_n > 0.0))
        throw ConfigError(e.at("omega_n") + ": must be > 0");
      if (!(sa.g > 0.0))
        throw ConfigError(e.at("g") + ": must be > 0");
      e.get("n_realizations", sa.n_realizations);
      if (sa.n_realizations < 2)
        throw ConfigError(e.at("n_realizations") + ": must be >= 2");
      e.finish();
      c.rmt.self_averaging = sa;
    }
    s.finish();
  }

  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  top.get("threads", c.threads);
  if (c.threads < 1)
    throw ConfigError("/threads: must be >= 1");
  top.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in)
    throw ConfigError("cannot read config file " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

std::string canonical_config(const RunConfig& c) {
  json j;
  if (c.is_spin_chain())
    j["model"] = c.chain().canonical();
  else
    j["model"] = c.rmt_params().canonical();
  const auto& s = c.initial_state;
  j["initial_state"] = {{"kind", int(s.kind)},
                        {"index", s.index},
                        {"index_base", s.index_base},
                        {"seed", s.seed},
                        {"acceptance_window", s.acceptance_window},
                        {"max_attempts", s.max_attempts},
                        {"n_bath_realizations", c.n_bath_realizations}};
  j["observables"] = c.observables;
  json cs = json::array();
  for (const auto& r : c.correlators)
    cs.push_back({{"kind", to_string(r.kind)}, {"observables", r.observables}, {"t2", r.t2}});
  j["correlators"] = cs;
  j["time_grid"] = {{"t_max", c.time_grid.t_max}, {"n_points", c.time_grid.n_points}};
  json shapes = json::array();
  for (auto f : c.lambda.fit_shapes)
    shapes.push_back(to_string(f));
  j["lambda_extraction"] = {{"window_fraction", c.lambda.window_fraction},
                            {"n_bins", c.lambda.n_bins},
                            {"range_factor", c.lambda.range_factor},
                            {"truncation_factor", c.lambda.truncation_factor},
                            {"fit_shapes", shapes}};
  j["compare"] = {{"rms_window", {c.compare.rms_t_min, c.compare.rms_t_max}},
                  {"four_point_raw", c.compare.four_point_raw}};
  if (c.compare.omega_stub)
    j["compare"]["omega_stub"] = *c.compare.omega_stub;
  json mc = json::array();
  for (const auto& e : c.rmt.monte_carlo)
    mc.push_back({{"model", e.params.canonical()}, {"n_realizations", e.n_realizations}});
  j["rmt"] = {{"n_realizations", c.rmt.n_realizations},
              {"mc_groups", c.rmt.mc_groups},
              {"monte_carlo", mc}};
  if (c.rmt.self_averaging)
    j["rmt"]["self_averaging"] = {{"dims", c.rmt.self_averaging->dims},
                                  {"omega_n", c.rmt.self_averaging->omega_n},
                                  {"g", c.rmt.self_averaging->g},
                                  {"n_realizations", c.rmt.self_averaging->n_realizations}};
  j["seed"] = c.seed;
  return j.dump();
}

} // namespace chaoscorr
