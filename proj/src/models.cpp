#include "chaoscorr/models.hpp"

#include <array>
#include <cmath>
#include <sstream>

namespace chaoscorr {

namespace {

using F = SiteFactor<double>;

void add(Operator<double>& m, double c, std::initializer_list<F> fs, int n) {
  if (c == 0.0)
    return;
  const std::vector<F> v(fs);
  add_product_term<double>(m, c, v, n);
}

// sigma_i^+ sigma_j^- + sigma_i^- sigma_j^+
void add_hopping(Operator<double>& m, double c, int i, int j, int n) {
  add(m, c, {F{i, pauli::plus()}, F{j, pauli::minus()}}, n);
  add(m, c, {F{i, pauli::minus()}, F{j, pauli::plus()}}, n);
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

} // namespace

void ChainParams::validate() const {
  if (n_sites < 3)
    throw ArgumentError("ChainParams: n_sites must be >= 3");
  if (n_sites > 16)
    throw ArgumentError("ChainParams: n_sites > 16 exceeds dense storage limits");
  for (int r : {r1, r2})
    if (r <= 1 || r > n_sites)
      throw ArgumentError("ChainParams: bath sites must satisfy 1 < r <= n_sites");
  if (r1 == r2)
    throw ArgumentError("ChainParams: r1 and r2 must differ");
  for (double x : {bz_s, bx_s, bx_b, jx_b, jz_i, jx_i})
    if (!std::isfinite(x))
      throw ArgumentError("ChainParams: couplings must be finite");
}

std::string ChainParams::canonical() const {
  return "spin_chain;n=" + std::to_string(n_sites) + ";bz_s=" + fmt(bz_s) +
         ";bx_s=" + fmt(bx_s) + ";bx_b=" + fmt(bx_b) + ";jx_b=" + fmt(jx_b) +
         ";jz_i=" + fmt(jz_i) + ";jx_i=" + fmt(jx_i) + ";r1=" + std::to_string(r1) +
         ";r2=" + std::to_string(r2);
}

void RmtParams::validate(bool allow_zero_coupling) const {
  if (dim < 2)
    throw ArgumentError("RmtParams: dim must be >= 2");
  if (!(omega > 0.0) || !std::isfinite(omega))
    throw ArgumentError("RmtParams: omega must be > 0");
  if (!std::isfinite(g) || g < 0.0 || (!allow_zero_coupling && g == 0.0))
    throw ArgumentError(allow_zero_coupling ? "RmtParams: g must be >= 0"
                                            : "RmtParams: g must be > 0");
}

std::string RmtParams::canonical() const {
  return "deutsch;dim=" + std::to_string(dim) + ";omega=" + fmt(omega) + ";g=" + fmt(g);
}

double RmtParams::gamma_theory() const {
  return 3.14159265358979323846 * g * g / (omega * dim);
}

Operator<double> chain_system_part(const ChainParams& p) {
  p.validate();
  const Index d = hilbert_dim(p.n_sites);
  Operator<double> h = Operator<double>::Zero(d, d);
  add(h, p.bz_s, {F{1, pauli::z()}}, p.n_sites);
  add(h, p.bx_s, {F{1, pauli::x()}}, p.n_sites);
  return h;
}

Operator<double> chain_bath_part(const ChainParams& p) {
  p.validate();
  const Index d = hilbert_dim(p.n_sites);
  Operator<double> h = Operator<double>::Zero(d, d);
  for (int n = 2; n <= p.n_sites; ++n)
    add(h, p.bx_b, {F{n, pauli::x()}}, p.n_sites);
  if (p.jx_b != 0.0)
    for (int n = 2; n < p.n_sites; ++n)
      add_hopping(h, p.jx_b, n, n + 1, p.n_sites);
  return h;
}

Operator<double> chain_interaction_part(const ChainParams& p) {
  p.validate();
  const Index d = hilbert_dim(p.n_sites);
  Operator<double> h = Operator<double>::Zero(d, d);
  for (int r : {p.r1, p.r2}) {
    add(h, p.jz_i, {F{1, pauli::z()}, F{r, pauli::z()}}, p.n_sites);
    if (p.jx_i != 0.0)
      add_hopping(h, p.jx_i, 1, r, p.n_sites);
  }
  return h;
}

HamiltonianSet<double> build_spin_chain(const ChainParams& p) {
  p.validate();
  HamiltonianSet<double> hs;
  hs.h0 = chain_system_part(p);
  hs.h0 += chain_bath_part(p);
  hs.h_full = hs.h0 + chain_interaction_part(p);
  require_hermitian(hs.h0, 1e-12, "H0");
  require_hermitian(hs.h_full, 1e-12, "H");
  return hs;
}

Operator<double> sample_goe(int dim, double g, std::mt19937_64& gen) {
  if (dim < 1)
    throw ArgumentError("sample_goe: dim must be >= 1");
  Operator<double> h = Operator<double>::Zero(dim, dim);
  if (g == 0.0)
    return h;
  std::normal_distribution<double> off(0.0, g / std::sqrt(double(dim)));
  std::normal_distribution<double> diag(0.0, g * std::sqrt(2.0 / dim));
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      const double x = (i == j) ? diag(gen) : off(gen);
      h(i, j) = x;
      h(j, i) = x;
    }
  return h;
}

HamiltonianSet<double> build_deutsch_model(const RmtParams& p, std::uint64_t seed) {
  p.validate();
  HamiltonianSet<double> hs;
  Eigen::VectorXd e(p.dim);
  for (int a = 0; a < p.dim; ++a)
    e(a) = (a + 1 - 0.5 * (p.dim + 1)) * p.omega;
  hs.h0 = e.asDiagonal();
  std::mt19937_64 gen(seed);
  hs.h_full = hs.h0 + sample_goe(p.dim, p.g, gen);
  return hs;
}

StateVector product_state(std::span<const double> angles) {
  const int n = int(angles.size());
  const Index d = hilbert_dim(n);
  StateVector psi(d);
  for (Index b = 0; b < d; ++b) {
    double amp = 1.0;
    for (int k = 1; k <= n; ++k)
      amp *= site_bit(b, k, n) ? std::sin(angles[k - 1]) : std::cos(angles[k - 1]);
    psi(b) = amp;
  }
  return psi;
}

StateVector neel_state(int n_sites) {
  const Index d = hilbert_dim(n_sites);
  Index idx = 0;
  for (int k = 1; k <= n_sites; ++k)
    if (k % 2 == 0)
      idx |= Index(1) << (n_sites - k);
  StateVector psi = StateVector::Zero(d);
  psi(idx) = 1.0;
  return psi;
}

} // namespace chaoscorr
