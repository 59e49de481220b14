#pragma once

// Infeasible-start primal-dual interior-point method for small dense SDPs,
// HKM search direction with Mehrotra predictor-corrector.
//
// The LMI decision vector x is the dual variable y of the pair
//   (P) min <C, X>  s.t.  <A_i, X> = b_i,  X >= 0
//   (D) max b^T y   s.t.  C - sum_i y_i A_i = Z >= 0
// with C_j = -F_j0 - delta_j I, A_ij = F_ji, b = -c. Box rows |x_i| <= bound
// and optional lower bounds form an extra linear (diagonal) cone.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dmi/lmi.hpp"

namespace dmi::sdp {

struct SolverOptions {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iter = 200;
  double step_fraction = 0.98;
  /// Box |x_i| <= var_bound on every decision variable. Keeps the primal
  /// multiplier set bounded so infeasible probes terminate.
  double var_bound = 1e7;

  void validate() const {
    if (!(tol_gap > 0.0) || !(tol_feas > 0.0) || max_iter <= 0 || !(step_fraction > 0.0) ||
        !(step_fraction < 1.0) || !(var_bound > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "solver options out of range");
    }
  }
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::NumericalLimit: return "NumericalLimit";
  }
  return "?";
}

struct SdpSolution {
  Vec x;
  std::vector<Mat> dual_blocks;
  Status status = Status::NumericalLimit;
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double primal_objective = 0.0;  // c^T x at the returned point
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;  // residual of the LMI system (our side)
  double dual_infeasibility = 0.0;
  std::vector<double> mu_history;
};

/// Multiplier-side residual accepted (relative to tol_feas) for an iterate
/// whose LMI side is feasible and whose gap has converged.
inline constexpr double kRelaxedFeas = 1e3;
inline constexpr double kRelaxedGap = 1e2;

namespace detail {

struct Cone {
  Index dim;
  Mat c;                            // C_j
  std::vector<lmi::BlockCoef> a;    // A_ij
};

struct LinearRow {
  Index var;
  double coef;  // row is coef * y_var <= rhs
  double rhs;
};

/// Smallest eigenvalue of L^-1 D L^-T where X = L L^T; returns the largest
/// step a with X + a D >= 0 (infinity when D is PSD).
inline double max_step(const Eigen::LLT<Mat>& chol, const Mat& d) {
  const Mat& l = chol.matrixLLT();
  Mat w = l.triangularView<Eigen::Lower>().solve(d);
  w = l.triangularView<Eigen::Lower>().solve(w.transpose()).eval();
  w = 0.5 * (w + w.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat> es(w, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()[0];
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline double dot(const Mat& a, const Mat& b) { return a.cwiseProduct(b).sum(); }

}  // namespace detail

/// Solves min c^T x s.t. F_j(x) <= -delta_j I. Deterministic.
inline SdpSolution solve(const lmi::StandardSdp& sdp, const SolverOptions& opts = {}) {
  using detail::Cone;
  using detail::dot;
  opts.validate();
  const Index m = sdp.m;
  if (sdp.c.size() != m) throw Error(ErrorCode::DimensionMismatch, "objective length");

  std::vector<Cone> cones;
  double c_scale = 0.0;
  for (const lmi::SdpBlock& b : sdp.blocks) {
    if (b.dim < 1) throw Error(ErrorCode::InvalidArgument, "empty block");
    Cone k{b.dim, -b.constant - b.margin * Mat::Identity(b.dim, b.dim), b.coefs};
    c_scale = std::max(c_scale, b.constant.cwiseAbs().rowwise().sum().maxCoeff());
    cones.push_back(std::move(k));
  }

  std::vector<detail::LinearRow> rows;
  std::vector<bool> has_lower(static_cast<std::size_t>(m), false);
  for (const auto& [var, lo] : sdp.lower_bounds) {
    rows.push_back({var, -1.0, -lo});
    has_lower[static_cast<std::size_t>(var)] = true;
  }
  for (Index i = 0; i < m; ++i) {
    rows.push_back({i, 1.0, opts.var_bound});
    if (!has_lower[static_cast<std::size_t>(i)]) rows.push_back({i, -1.0, opts.var_bound});
  }
  const Index p = static_cast<Index>(rows.size());

  const Vec b = -sdp.c;
  const double b_norm = b.norm();
  double cmat_norm = 0.0;
  for (const Cone& k : cones) cmat_norm += k.c.squaredNorm();
  cmat_norm = std::sqrt(cmat_norm);

  Index n_total = p;
  for (const Cone& k : cones) n_total += k.dim;

  // Starting point.
  const double tau = 10.0 * (1.0 + c_scale);
  Vec y = Vec::Zero(m);
  std::vector<Mat> xs, zs;
  for (const Cone& k : cones) {
    xs.push_back(tau * Mat::Identity(k.dim, k.dim));
    zs.push_back(tau * Mat::Identity(k.dim, k.dim));
  }
  Vec xl(p), zl(p);
  for (Index r = 0; r < p; ++r) {
    const double slack = rows[static_cast<std::size_t>(r)].rhs;
    zl[r] = slack > 0.0 ? slack : tau;
    xl[r] = tau * tau / zl[r];
  }

  auto apply_a = [&](const std::vector<Mat>& mats, const Vec& lin) {
    Vec out = Vec::Zero(m);
    for (std::size_t j = 0; j < cones.size(); ++j)
      for (const lmi::BlockCoef& bc : cones[j].a) {
        double s = 0.0;
        for (const lmi::Entry& e : bc.entries) s += e.value * mats[j](e.row, e.col);
        out[bc.var] += s;
      }
    for (Index r = 0; r < p; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      out[row.var] += row.coef * lin[r];
    }
    return out;
  };
  auto apply_at = [&](const Vec& v, std::vector<Mat>& mats, Vec& lin) {
    mats.resize(cones.size());
    for (std::size_t j = 0; j < cones.size(); ++j) {
      mats[j] = Mat::Zero(cones[j].dim, cones[j].dim);
      for (const lmi::BlockCoef& bc : cones[j].a) {
        const double vi = v[bc.var];
        if (vi == 0.0) continue;
        for (const lmi::Entry& e : bc.entries) mats[j](e.row, e.col) += vi * e.value;
      }
    }
    lin.resize(p);
    for (Index r = 0; r < p; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      lin[r] = row.coef * v[row.var];
    }
  };

  SdpSolution sol;
  sol.x = y;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<Mat> zinv(cones.size());
  std::vector<Eigen::LLT<Mat>> xchol(cones.size()), zchol(cones.size());
  std::vector<Mat> rd(cones.size());
  Vec rdl(p);
  std::vector<Mat> aty;
  Vec atyl;

  int stall = 0;
  bool have_relaxed = false;
  double best_merit = inf;
  int since_best = 0;
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    sol.iterations = iter;
    // Residuals and measures.
    apply_at(y, aty, atyl);
    double rd_norm2 = 0.0;
    for (std::size_t j = 0; j < cones.size(); ++j) {
      rd[j] = cones[j].c - zs[j] - aty[j];
      rd_norm2 += rd[j].squaredNorm();
    }
    double rdl_max = 0.0;
    for (Index r = 0; r < p; ++r) {
      rdl[r] = rows[static_cast<std::size_t>(r)].rhs - zl[r] - atyl[r];
      rdl_max = std::max(rdl_max, std::abs(rdl[r]) / (1.0 + std::abs(rows[static_cast<std::size_t>(r)].rhs)));
    }
    const Vec rp = b - apply_a(xs, xl);

    double compl_sum = xl.dot(zl);
    double pobj = 0.0;
    for (std::size_t j = 0; j < cones.size(); ++j) {
      compl_sum += dot(xs[j], zs[j]);
      pobj += dot(cones[j].c, xs[j]);
    }
    for (Index r = 0; r < p; ++r) pobj += rows[static_cast<std::size_t>(r)].rhs * xl[r];
    const double dobj = b.dot(y);
    const double mu = compl_sum / static_cast<double>(n_total);
    sol.mu_history.push_back(mu);

    const double pinf = rp.norm() / (1.0 + b_norm);
    const double dinf = std::max(std::sqrt(rd_norm2) / (1.0 + cmat_norm), rdl_max);
    const double denom = 1.0 + std::abs(pobj) + std::abs(dobj);
    const double gap = compl_sum / denom;

    const double merit = std::max({gap, pinf, dinf});
    if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(mu)) {
      if (!have_relaxed) sol.status = Status::NumericalLimit;
      break;
    }
    auto record = [&](Status st) {
      sol.x = y;
      sol.gap = gap;
      sol.primal_objective = sdp.c.dot(y);
      sol.dual_objective = -pobj;
      sol.primal_infeasibility = dinf;
      sol.dual_infeasibility = pinf;
      sol.status = st;
      sol.dual_blocks = xs;
    };
    if (iter == 0) record(Status::NumericalLimit);
    if (gap <= opts.tol_gap && pinf <= opts.tol_feas && dinf <= opts.tol_feas) {
      record(Status::Optimal);
      break;
    }
    // Near the optimum the Schur system loses accuracy and the multiplier
    // residual can drift upward; keep the best such iterate and stop once
    // nothing improves.
    if (gap <= kRelaxedGap * opts.tol_gap && dinf <= opts.tol_feas && pinf <= kRelaxedFeas * opts.tol_feas &&
        (!have_relaxed || merit < best_merit)) {
      record(Status::Optimal);
      have_relaxed = true;
    }
    if (merit < best_merit * 0.9) {
      best_merit = merit;
      since_best = 0;
    } else if (++since_best >= 5 && have_relaxed) {
      break;
    }
    // Primal ray X with A(X) ~ 0 and <C, X> < 0 certifies that the LMI
    // system is infeasible.
    if (pobj < 0.0) {
      const double ray = (b - rp).norm() / -pobj;
      if (-pobj > 1e8 * (1.0 + b_norm) && ray < 1e-8 && dinf > opts.tol_feas) {
        record(Status::Infeasible);
        break;
      }
    }
    if (dobj > 0.0 && dobj > 1e8 * (1.0 + cmat_norm) && pinf > opts.tol_feas &&
        dinf <= opts.tol_feas) {
      record(Status::Unbounded);
      break;
    }
    if (iter == opts.max_iter) {
      if (!have_relaxed) record(Status::NumericalLimit);
      break;
    }

    // Factorizations.
    bool ok = true;
    for (std::size_t j = 0; j < cones.size() && ok; ++j) {
      xchol[j].compute(xs[j]);
      zchol[j].compute(zs[j]);
      if (xchol[j].info() != Eigen::Success || zchol[j].info() != Eigen::Success) ok = false;
      else zinv[j] = zchol[j].solve(Mat::Identity(cones[j].dim, cones[j].dim));
    }
    if (!ok) {
      if (!have_relaxed) sol.status = Status::NumericalLimit;
      break;
    }

    // Schur complement M_ik = sum_j tr(A_ij X_j A_kj Z_j^-1) + linear part.
    Mat schur = Mat::Zero(m, m);
    for (std::size_t j = 0; j < cones.size(); ++j) {
      const Cone& k = cones[j];
      const Mat& xj = xs[j];
      const Mat& zj = zinv[j];
      Mat w(k.dim, k.dim);
      for (std::size_t a = 0; a < k.a.size(); ++a) {
        w.setZero();
        for (const lmi::Entry& e : k.a[a].entries)
          w.noalias() += e.value * xj.col(e.row) * zj.row(e.col);
        const Index ka = k.a[a].var;
        for (std::size_t bb = a; bb < k.a.size(); ++bb) {
          double s = 0.0;
          for (const lmi::Entry& e : k.a[bb].entries) s += e.value * w(e.col, e.row);
          const Index kb = k.a[bb].var;
          schur(kb, ka) += s;
          if (kb != ka) schur(ka, kb) += s;
        }
      }
    }
    const Vec dl = xl.cwiseQuotient(zl);
    for (Index r = 0; r < p; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      schur(row.var, row.var) += row.coef * row.coef * dl[r];
    }
    Eigen::LLT<Mat> schur_llt(schur);
    if (schur_llt.info() != Eigen::Success) {
      // escalating diagonal shift; the refinement step in direction()
      // still solves against the unshifted matrix
      const Mat raw = schur;
      const double dmax = std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
      for (double rel = 1e-13; rel <= 1e-6 && schur_llt.info() != Eigen::Success; rel *= 100.0) {
        schur = raw;
        schur.diagonal().array() += rel * dmax;
        schur_llt.compute(schur);
      }
      if (schur_llt.info() != Eigen::Success) {
        if (!have_relaxed) sol.status = Status::NumericalLimit;
        break;
      }
      schur = raw;
    }

    // Direction for a given complementarity target, expressed as
    // kmat_j = R_c Z^-1 and klin = r_c / z.
    std::vector<Mat> dxs(cones.size()), dzs(cones.size());
    Vec dy, dxl, dzl;
    auto direction = [&](const std::vector<Mat>& kmat, const Vec& klin) {
      std::vector<Mat> h(cones.size());
      for (std::size_t j = 0; j < cones.size(); ++j) h[j] = kmat[j] - xs[j] * rd[j] * zinv[j];
      const Vec hl = klin - xl.cwiseProduct(rdl).cwiseQuotient(zl);
      const Vec rhs = rp - apply_a(h, hl);
      dy = schur_llt.solve(rhs);
      dy += schur_llt.solve(rhs - schur * dy);
      std::vector<Mat> atdy;
      Vec atdyl;
      apply_at(dy, atdy, atdyl);
      for (std::size_t j = 0; j < cones.size(); ++j) {
        dzs[j] = rd[j] - atdy[j];
        Mat dx = kmat[j] - xs[j] * dzs[j] * zinv[j];
        dxs[j] = 0.5 * (dx + dx.transpose());
      }
      dzl = rdl - atdyl;
      dxl = klin - xl.cwiseProduct(dzl).cwiseQuotient(zl);
    };
    auto step_lengths = [&](double frac, double& ap, double& ad) {
      ap = inf;
      ad = inf;
      for (std::size_t j = 0; j < cones.size(); ++j) {
        ap = std::min(ap, detail::max_step(xchol[j], dxs[j]));
        ad = std::min(ad, detail::max_step(zchol[j], dzs[j]));
      }
      for (Index r = 0; r < p; ++r) {
        if (dxl[r] < 0.0) ap = std::min(ap, -xl[r] / dxl[r]);
        if (dzl[r] < 0.0) ad = std::min(ad, -zl[r] / dzl[r]);
      }
      ap = std::min(1.0, frac * ap);
      ad = std::min(1.0, frac * ad);
    };

    // Predictor.
    std::vector<Mat> kmat(cones.size());
    for (std::size_t j = 0; j < cones.size(); ++j) kmat[j] = -xs[j];
    Vec klin = -xl;
    direction(kmat, klin);
    double ap = 0.0, ad = 0.0;
    step_lengths(1.0, ap, ad);
    double mu_aff = 0.0;
    for (std::size_t j = 0; j < cones.size(); ++j)
      mu_aff += dot(xs[j] + ap * dxs[j], zs[j] + ad * dzs[j]);
    mu_aff += (xl + ap * dxl).dot(zl + ad * dzl);
    mu_aff /= static_cast<double>(n_total);
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    for (std::size_t j = 0; j < cones.size(); ++j)
      kmat[j] = sigma * mu * zinv[j] - xs[j] - dxs[j] * dzs[j] * zinv[j];
    klin = (sigma * mu - dxl.cwiseProduct(dzl).array()).matrix().cwiseQuotient(zl) - xl;
    direction(kmat, klin);
    step_lengths(opts.step_fraction, ap, ad);

    if (!dy.allFinite()) {
      if (!have_relaxed) sol.status = Status::NumericalLimit;
      break;
    }
    for (std::size_t j = 0; j < cones.size(); ++j) {
      xs[j] += ap * dxs[j];
      zs[j] += ad * dzs[j];
    }
    xl += ap * dxl;
    zl += ad * dzl;
    y += ad * dy;

    stall = (ap < 1e-10 && ad < 1e-10) ? stall + 1 : 0;
    if (stall >= 5) {
      if (!have_relaxed) sol.status = Status::NumericalLimit;
      break;
    }
  }
  return sol;
}

struct MarginResult {
  double t = std::numeric_limits<double>::infinity();
  Vec x;
  Status status = Status::NumericalLimit;
  int iterations = 0;
};

/// Cap applied to feasibility margins that are unbounded below.
inline constexpr double kMarginCap = -1e6;

/// min t s.t. F_j(x) <= t I for all blocks (objective and margins of the
/// input are ignored). t < 0 iff the strict system is feasible.
inline MarginResult feasibility_margin(const lmi::StandardSdp& sdp, const SolverOptions& opts = {}) {
  lmi::StandardSdp aug = sdp;
  const Index t = sdp.m;
  aug.m = sdp.m + 1;
  aug.c = Vec::Zero(aug.m);
  aug.c[t] = 1.0;
  for (lmi::SdpBlock& b : aug.blocks) {
    b.margin = 0.0;
    lmi::BlockCoef bc{t, {}};
    for (Index i = 0; i < b.dim; ++i) bc.entries.push_back({i, i, -1.0});
    b.coefs.push_back(std::move(bc));
  }
  aug.lower_bounds.emplace_back(t, kMarginCap);
  SolverOptions o = opts;
  o.var_bound = std::max(o.var_bound, 10.0 * std::abs(kMarginCap));
  const SdpSolution s = solve(aug, o);
  MarginResult r;
  r.iterations = s.iterations;
  r.status = s.status;
  r.x = s.x.head(sdp.m);
  if (s.status == Status::Optimal) {
    r.t = s.x[t];
    if (r.t <= kMarginCap * (1.0 - 1e-6)) {
      r.t = kMarginCap;
      r.status = Status::Unbounded;
    }
  }
  return r;
}

}  // namespace dmi::sdp
