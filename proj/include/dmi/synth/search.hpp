#pragma once

// Scalar line searches over the dilation scalar and the invariant-set rate.
// Probes that fail (infeasible, solver trouble) score +inf.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "dmi/error.hpp"

namespace dmi::synth {

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

struct Probe {
  double x = 0.0;
  double value = kInfeasible;
};

struct SearchResult {
  double x = 0.0;
  double value = kInfeasible;
  int evaluations = 0;
  std::vector<Probe> trace;
};

/// Objective returning gamma, or nullopt when the probe is infeasible.
using Objective = std::function<std::optional<double>(double)>;

namespace detail {

inline double probe(const Objective& f, double x) {
  try {
    const std::optional<double> v = f(x);
    return v && std::isfinite(*v) ? *v : kInfeasible;
  } catch (const Error&) {
    return kInfeasible;
  }
}

/// Evaluates f at every point, up to `jobs` at a time.
inline std::vector<double> probe_all(const Objective& f, const std::vector<double>& xs, int jobs) {
  std::vector<double> out(xs.size(), kInfeasible);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs > 0 ? jobs : 1, xs.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = probe(f, xs[i]);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < xs.size(); i += workers) out[i] = probe(f, xs[i]);
    });
  }
  for (std::thread& t : pool) t.join();
  return out;
}

inline bool better(const Probe& a, const Probe& b) {
  if (a.value != b.value) return a.value < b.value;
  return a.x < b.x;
}

}  // namespace detail

struct GoldenOptions {
  double tol = 0.05;      // bracket width at which to stop
  int max_iter = 12;      // objective evaluations
  bool log_scale = true;  // search in log(x); tol is then a log-width
};

/// Golden-section minimization on [lo, hi]. Returns the best probe seen.
/// Where both interior probes are infeasible the bracket moves toward lo.
inline SearchResult golden_search(const Objective& f, double lo, double hi, const GoldenOptions& o = {}) {
  if (!(lo > 0.0) || !(hi > lo) || o.max_iter < 1 || !(o.tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "golden_search needs 0 < lo < hi, tol > 0, max_iter >= 1");
  }
  auto to = [&](double x) { return o.log_scale ? std::log(x) : x; };
  auto from = [&](double u) { return o.log_scale ? std::exp(u) : u; };
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;

  SearchResult res;
  auto eval = [&](double u) {
    const Probe p{from(u), detail::probe(f, from(u))};
    res.trace.push_back(p);
    ++res.evaluations;
    return p.value;
  };

  double a = to(lo), b = to(hi);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = eval(c);
  double fd = o.max_iter > 1 ? eval(d) : kInfeasible;
  while (res.evaluations < o.max_iter && (b - a) > o.tol) {
    const bool keep_left = (fc < fd) || (fc == fd && !std::isfinite(fc)) || (fc == fd && c < d);
    if (keep_left) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = eval(d);
    }
  }
  const Probe best = *std::min_element(res.trace.begin(), res.trace.end(), detail::better);
  if (!std::isfinite(best.value)) throw Error(ErrorCode::AllInfeasible, "golden search: every probe infeasible");
  res.x = best.x;
  res.value = best.value;
  return res;
}

/// Log-spaced grid lo..hi with n points.
struct Grid {
  double lo = 1e-2;
  double hi = 1e2;
  int n = 13;

  [[nodiscard]] std::vector<double> points() const {
    if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw Error(ErrorCode::InvalidArgument, "bad grid");
    std::vector<double> xs;
    if (n == 1) return {lo};
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) xs.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
    return xs;
  }
};

struct AlphaSearchOptions {
  Grid grid;
  int refine_evals = 8;  // golden steps between the best grid point's neighbours
  int jobs = 1;
  std::vector<double> extra;  // probed alongside the grid (e.g. a known good alpha)
};

/// Grid scan followed by one golden refinement between the grid neighbours
/// of the best point.
inline SearchResult alpha_search(const Objective& f, const AlphaSearchOptions& o = {}) {
  std::vector<double> xs = o.grid.points();
  for (double x : o.extra)
    if (x > 0.0 && std::isfinite(x)) xs.push_back(x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  const std::vector<double> vs = detail::probe_all(f, xs, o.jobs);
  SearchResult res;
  for (std::size_t i = 0; i < xs.size(); ++i) res.trace.push_back({xs[i], vs[i]});
  res.evaluations = static_cast<int>(xs.size());
  std::size_t k = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (detail::better(res.trace[i], res.trace[k])) k = i;
  if (!std::isfinite(vs[k])) throw Error(ErrorCode::AllInfeasible, "alpha search: every grid point infeasible");

  if (xs.size() > 1 && o.refine_evals > 0) {
    const double lo = xs[k == 0 ? 0 : k - 1];
    const double hi = xs[k + 1 == xs.size() ? k : k + 1];
    GoldenOptions g;
    g.max_iter = o.refine_evals;
    g.tol = 1e-3;
    try {
      SearchResult r = golden_search(f, lo, hi, g);
      res.evaluations += r.evaluations;
      res.trace.insert(res.trace.end(), r.trace.begin(), r.trace.end());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllInfeasible) throw;
      // refinement found nothing better than the grid point itself
    }
  }
  const Probe best = *std::min_element(res.trace.begin(), res.trace.end(), detail::better);
  res.x = best.x;
  res.value = best.value;
  return res;
}

}  // namespace dmi::synth
