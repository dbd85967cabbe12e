#include "chaoscorr/correlators.hpp"

namespace chaoscorr {

std::string to_string(CorrelatorKind k) {
  switch (k) {
  case CorrelatorKind::one_point: return "one_point";
  case CorrelatorKind::two_point: return "two_point";
  case CorrelatorKind::four_point: return "four_point";
  case CorrelatorKind::otoc: return "otoc";
  case CorrelatorKind::squared_commutator: return "squared_commutator";
  }
  return "unknown";
}

std::string to_string(HamiltonianTag h) {
  return h == HamiltonianTag::full ? "full" : "noninteracting";
}

std::vector<double> CorrelatorSeries::real() const {
  std::vector<double> r(values.size());
  for (std::size_t k = 0; k < values.size(); ++k)
    r[k] = values[k].real();
  return r;
}

std::vector<double> CorrelatorSeries::imag() const {
  std::vector<double> r(values.size());
  for (std::size_t k = 0; k < values.size(); ++k)
    r[k] = values[k].imag();
  return r;
}

} // namespace chaoscorr
