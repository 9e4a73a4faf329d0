#include "medzim/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <vector>

namespace medzim {

namespace {

using Kronrod21 = boost::math::quadrature::gauss_kronrod<double, 21>;
using Gauss10 = boost::math::quadrature::gauss<double, 10>;

struct Segment {
  double lo;
  double hi;
  double value;
  double error;

  bool operator<(const Segment& other) const { return error < other.error; }
};

Segment kronrod_segment(const std::function<double(double)>& f, double lo, double hi) {
  const auto& nodes = Kronrod21::abscissa();
  const auto& kw = Kronrod21::weights();
  const auto& gw = Gauss10::weights();
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  const double f0 = f(center);
  double kronrod = kw[0] * f0;
  double gauss = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double dx = half * nodes[i];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kw[i] * pair;
    // Gauss nodes sit at the odd Kronrod indices.
    if (i % 2 == 1) {
      gauss += gw[(i - 1) / 2] * pair;
    }
  }
  kronrod *= half;
  gauss *= half;
  return Segment{lo, hi, kronrod, std::abs(kronrod - gauss)};
}

QuadratureResult adaptive(const std::function<double(double)>& f, double lo, double hi,
                          const QuadratureSpec& spec) {
  std::priority_queue<Segment> heap;
  Segment first = kronrod_segment(f, lo, hi);
  double total = first.value;
  double total_error = first.error;
  heap.push(first);

  auto tolerance = [&] { return std::max(spec.abs_tol, spec.rel_tol * std::abs(total)); };

  // The running sums drift when large early errors are replaced by tiny
  // ones, so they are recomputed from the heap before giving up.
  auto resum = [&] {
    auto copy = heap;
    total = 0.0;
    total_error = 0.0;
    while (!copy.empty()) {
      total += copy.top().value;
      total_error += copy.top().error;
      copy.pop();
    }
  };

  while (total_error > tolerance()) {
    if (heap.size() % 32 == 0) {
      resum();
      if (total_error <= tolerance()) break;
    }
    if (heap.size() >= spec.max_subdivisions) {
      char detail[96];
      std::snprintf(detail, sizeof(detail), " (integral %.6g, error estimate %.3g)", total,
                    total_error);
      throw QuadratureError("adaptive quadrature did not converge within " +
                            std::to_string(spec.max_subdivisions) + " subdivisions" + detail);
    }
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      // Interval at machine resolution; accept what we have.
      heap.push(worst);
      break;
    }
    const Segment left = kronrod_segment(f, worst.lo, mid);
    const Segment right = kronrod_segment(f, mid, worst.hi);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum from the segments so the reported value carries no drift from
  // the running updates. Sorting by position fixes the summation order.
  std::vector<Segment> segments;
  segments.reserve(heap.size());
  while (!heap.empty()) {
    segments.push_back(heap.top());
    heap.pop();
  }
  std::sort(segments.begin(), segments.end(),
            [](const Segment& a, const Segment& b) { return a.lo < b.lo; });
  QuadratureResult out;
  for (const auto& s : segments) {
    out.value += s.value;
    out.error += s.error;
  }
  out.intervals = segments.size();
  return out;
}

QuadratureResult composite_gauss(const std::function<double(double)>& f, double lo, double hi,
                                 const QuadratureSpec& spec) {
  const auto& nodes = Gauss10::abscissa();
  const auto& weights = Gauss10::weights();
  const double width = (hi - lo) / static_cast<double>(spec.panels);
  QuadratureResult out;
  for (std::size_t p = 0; p < spec.panels; ++p) {
    const double a = lo + width * static_cast<double>(p);
    const double center = a + 0.5 * width;
    const double half = 0.5 * width;
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double dx = half * nodes[i];
      sum += weights[i] * (f(center - dx) + f(center + dx));
    }
    out.value += half * sum;
  }
  out.intervals = spec.panels;
  return out;
}

}  // namespace

void QuadratureSpec::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) {
    throw std::invalid_argument("QuadratureSpec: tolerances must be positive");
  }
  if (max_subdivisions == 0 || panels == 0) {
    throw std::invalid_argument("QuadratureSpec: subdivision and panel counts must be positive");
  }
}

QuadratureResult integrate(const std::function<double(double)>& f, double lo, double hi,
                           const QuadratureSpec& spec) {
  if (!(hi > lo)) {
    return {};
  }
  if (spec.method == QuadratureSpec::Method::GaussLegendre) {
    return composite_gauss(f, lo, hi, spec);
  }
  return adaptive(f, lo, hi, spec);
}

}  // namespace medzim
