#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace medzim {

struct QuadratureSpec {
  enum class Method {
    AdaptiveGaussKronrod,  // global adaptive bisection with a 21-point Kronrod rule
    GaussLegendre,         // fixed composite 10-point Gauss rule on equal panels
  };

  Method method = Method::AdaptiveGaussKronrod;
  double abs_tol = 1e-300;
  double rel_tol = 1e-12;
  std::size_t max_subdivisions = 400;
  std::size_t panels = 32;  // GaussLegendre only

  void validate() const;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t intervals = 0;
};

/// Integrates f over [lo, hi]. The adaptive method throws QuadratureError
/// if the requested tolerance is not met within max_subdivisions.
QuadratureResult integrate(const std::function<double(double)>& f, double lo, double hi,
                           const QuadratureSpec& spec);

}  // namespace medzim
