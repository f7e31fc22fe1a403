#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

#include "cicmap/error.hpp"

namespace cicmap {

enum class LogBase { natural, base2 };

inline std::string_view to_string(LogBase b) { return b == LogBase::natural ? "e" : "2"; }
inline LogBase parse_log_base(std::string_view s) {
  if (s == "e") return LogBase::natural;
  if (s == "2") return LogBase::base2;
  throw InvalidArgument("log base must be 'e' or '2'");
}

namespace detail {

// t * ln(2t) with the convention 0 * log 0 = 0.
template <typename Scalar>
Scalar xlog2x(Scalar t) {
  return t == Scalar(0) ? Scalar(0) : t * std::log(Scalar(2) * t);
}

template <typename Scalar>
void check_probability(Scalar rho, const char* what) {
  if (!(rho >= Scalar(0) && rho <= Scalar(1))) {
    throw InvalidArgument(std::string(what) + ": probability outside [0, 1]");
  }
}

template <typename Scalar>
Scalar rescale(Scalar nats, LogBase base) {
  return base == LogBase::natural ? nats : nats / Scalar(std::numbers::ln2_v<Scalar>);
}

}  // namespace detail

// Signed information content of a feature against the neutral reference
// rho = 1/2: C(rho) = rho ln(2 rho) - (1 - rho) ln(2 (1 - rho)).
// Positive for rho > 1/2, zero at 1/2, negative below.
template <typename Scalar>
Scalar classification_information(Scalar rho_p, LogBase base = LogBase::natural) {
  detail::check_probability(rho_p, "classification_information");
  if (rho_p == Scalar(0.5)) return Scalar(0);
  return detail::rescale(detail::xlog2x(rho_p) - detail::xlog2x(Scalar(1) - rho_p), base);
}

// Kullback-Leibler divergence from the neutral reference. Symmetric in
// rho <-> 1 - rho and blind to the direction of the bias.
template <typename Scalar>
Scalar kl_divergence(Scalar rho_p, LogBase base = LogBase::natural) {
  detail::check_probability(rho_p, "kl_divergence");
  if (rho_p == Scalar(0.5)) return Scalar(0);
  return detail::rescale(detail::xlog2x(rho_p) + detail::xlog2x(Scalar(1) - rho_p), base);
}

}  // namespace cicmap
