#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace dmi;
namespace ts = dmi::test_support;
using ts::m11;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidArgument;
}

ClosedLoop scalar_loop() { return ts::siso(m11(-1), m11(1), m11(1), 0.0); }

ClosedLoop resonant(double z) {
  Mat A(2, 2), B(2, 1), C(1, 2);
  A << 0, 1, -1, -2 * z;
  B << 0, 1;
  C << 1, 0;
  return ts::siso(A, B, C, 0.0);
}

// Dilated L2 matrix at numeric (X1, G, gamma), built directly from the
// selectors: base + He(Q' G P).
Mat dilated_matrix(const ClosedLoop& cl, const Mat& X1, const Mat& G, double gamma, double eps) {
  const Index n = cl.order(), q = cl.Bcl.cols(), p = cl.Ccl.rows();
  const Index N = 2 * n + q + p;
  Mat base = Mat::Zero(N, N);
  base.block(0, 0, n, n) = X1;
  base.block(0, n, n, q) = cl.Bcl;
  base.block(n, 0, q, n) = cl.Bcl.transpose();
  base.block(0, n + q + p, n, n) = -X1;
  base.block(n + q + p, 0, n, n) = -X1;
  base.block(n, n, q, q) = -gamma * Mat::Identity(q, q);
  base.block(n, n + q, q, p) = cl.Dcl.transpose();
  base.block(n + q, n, p, q) = cl.Dcl;
  base.block(n + q, n + q, p, p) = -gamma * Mat::Identity(p, p);
  const synth::DilationSelectors s = synth::build_selectors(cl, eps);
  const Mat h = s.Q.transpose() * G * s.P;
  return base + h + h.transpose();
}

Mat bounded_real_matrix(const ClosedLoop& cl, const Mat& X, double gamma) {
  const Index n = cl.order(), q = cl.Bcl.cols(), p = cl.Ccl.rows();
  Mat m(n + q + p, n + q + p);
  m << cl.Acl * X + X * cl.Acl.transpose(), cl.Bcl, X * cl.Ccl.transpose(), cl.Bcl.transpose(),
      -gamma * Mat::Identity(q, q), cl.Dcl.transpose(), cl.Ccl * X, cl.Dcl, -gamma * Mat::Identity(p, p);
  return m;
}

// Margin of the dilated L2 inequality at fixed gamma and eps.
double dilated_margin(const ClosedLoop& cl, double gamma, double eps) {
  lmi::LmiProblem p;
  const auto X1 = p.symmetric(cl.order(), "X1");
  const auto G = p.general(cl.order(), cl.order(), "G");
  p.add_lmi(synth::dilated_l2_expr(cl, lmi::MatExpr::var(X1), lmi::MatExpr::var(G),
                                   lmi::MatExpr(Mat(gamma * Mat::Identity(cl.Bcl.cols(), cl.Bcl.cols()))),
                                   lmi::MatExpr(Mat(gamma * Mat::Identity(cl.Ccl.rows(), cl.Ccl.rows()))), eps));
  p.add_positive(X1);
  return sdp::feasibility_margin(lmi::compile(p)).t;
}

Mat published_sf_conventional_gain() {
  Mat K(1, 4);
  K << -1.7970, -0.7094, -2.2916, -2.1091;
  return K;
}

}  // namespace

// ---------------------------------------------------------------- selectors

TEST(Selectors, ScalarExamples) {
  const synth::DilationSelectors s = synth::build_selectors(scalar_loop(), 0.5);
  ASSERT_EQ(s.P.cols(), 4);
  EXPECT_DOUBLE_EQ(s.P(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.P(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(s.P(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(s.P(0, 3), -1.0);
  EXPECT_DOUBLE_EQ(s.Q(0, 0), -1.5);
  EXPECT_DOUBLE_EQ(s.NP(3, 0), 1.0);  // 1 / (2 eps)

  const synth::DilationSelectors t = synth::build_selectors(scalar_loop(), 0.1);
  EXPECT_DOUBLE_EQ(t.NP(3, 0), 5.0);
}

TEST(Selectors, NullspaceIdentitiesRandom) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> e(0.01, 0.99);
  for (int k = 0; k < 30; ++k) {
    const ClosedLoop cl = ts::random_hurwitz(dim(rng), dim(rng), dim(rng), rng, true);
    const synth::DilationSelectors s = synth::build_selectors(cl, e(rng));
    EXPECT_LE((s.P * s.NP).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((s.Q * s.NQ).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(s.NP.cols(), s.NP.rows() - cl.order());
  }
}

TEST(Selectors, Errors) {
  EXPECT_EQ(code_of([] { synth::build_selectors(scalar_loop(), 0.0); }), ErrorCode::InvalidArgument);
  ClosedLoop bad = scalar_loop();
  bad.Bcl = Mat::Ones(2, 1);
  EXPECT_EQ(code_of([&] { synth::build_selectors(bad, 0.1); }), ErrorCode::DimensionMismatch);
}

TEST(Selectors, ProjectionMatchesBoundedReal) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 5; ++k) {
    const ClosedLoop cl = ts::random_hurwitz(3, 2, 2, rng, true);
    const double eps = 0.05;
    const synth::DilatedBoundedRealResult r = synth::dilated_bounded_real_gamma(cl, eps);
    const Mat M = dilated_matrix(cl, r.X1, r.G, r.gamma, eps);
    const synth::DilationSelectors s = synth::build_selectors(cl, eps);
    const Mat proj = s.NQ.transpose() * M * s.NQ;
    const Mat brl = bounded_real_matrix(cl, r.X1, r.gamma);
    EXPECT_LE((proj - brl).cwiseAbs().maxCoeff(), 1e-9 * (1.0 + brl.norm()));
    EXPECT_LT(la::max_eig(la::symmetrize(proj)), 0.0);
  }
}

// ------------------------------------------------- bounded real and dilation

TEST(BoundedReal, Examples) {
  EXPECT_NEAR(synth::bounded_real_gamma(scalar_loop()).gamma, 1.0, 1e-6);
  ClosedLoop d{-Mat::Identity(2, 2), Mat::Zero(2, 1), Mat::Zero(1, 2), m11(0.7)};
  EXPECT_NEAR(synth::bounded_real_gamma(d).gamma, 0.7, 1e-6);
  const ClosedLoop unstable = ts::siso(m11(1), m11(1), m11(1), 0.0);
  EXPECT_EQ(code_of([&] { synth::bounded_real_gamma(unstable); }), ErrorCode::Unstable);
}

TEST(DilatedBoundedReal, ScalarSmallEpsilon) {
  const double g = synth::dilated_bounded_real_gamma(scalar_loop(), 0.01).gamma;
  EXPECT_GE(g, 1.0 - 1e-6);
  EXPECT_LE(g, 1.05);
}

TEST(DilatedBoundedReal, NonIncreasingAsEpsilonShrinks) {
  double prev = std::numeric_limits<double>::infinity();
  for (double e : {0.4, 0.2, 0.1, 0.05}) {
    const double g = synth::dilated_bounded_real_gamma(scalar_loop(), e).gamma;
    EXPECT_LE(g, prev * (1.0 + 1e-6)) << e;
    EXPECT_GE(g, 1.0 - 1e-6);
    prev = g;
  }
}

TEST(DilatedBoundedReal, InfeasibleForEpsilonAtLeastOne) {
  std::mt19937_64 rng(3);
  std::vector<ClosedLoop> loops{scalar_loop(), resonant(0.1)};
  for (int k = 0; k < 4; ++k) loops.push_back(ts::random_hurwitz(3, 1, 1, rng));
  for (const ClosedLoop& cl : loops) {
    for (double e : {1.0, 1.5}) {
      EXPECT_EQ(code_of([&] { synth::dilated_bounded_real_gamma(cl, e); }), ErrorCode::InfeasibleAtEpsilon);
    }
  }
}

TEST(DilatedBoundedReal, EquivalenceOnRandomSystems) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int k = 0; k < 8; ++k) {
    const ClosedLoop cl = ts::random_hurwitz(dim(rng), dim(rng), dim(rng), rng, k % 2 == 0);
    const double br = synth::bounded_real_gamma(cl).gamma;
    double best = std::numeric_limits<double>::infinity();
    for (double e : {0.2, 0.1, 0.05, 0.02, 0.01}) {
      try {
        const double g = synth::dilated_bounded_real_gamma(cl, e).gamma;
        EXPECT_GE(g, br * (1.0 - 1e-5));
        best = std::min(best, g);
      } catch (const Error&) {
      }
    }
    EXPECT_LE(std::abs(best - br), 5e-3 * br) << k;
    EXPECT_LE(std::abs(br - analysis::hinf_norm(cl)), 1e-4 * br) << k;
  }
}

TEST(DilatedBoundedReal, FeasibilityPersistsWhenEpsilonHalves) {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> dim(1, 3);
  std::uniform_real_distribution<double> e(0.05, 0.6);
  int tested = 0;
  for (int k = 0; k < 20; ++k) {
    const ClosedLoop cl = ts::random_hurwitz(dim(rng), dim(rng), dim(rng), rng);
    const double eps = e(rng);
    double gamma;
    try {
      gamma = 1.01 * synth::dilated_bounded_real_gamma(cl, eps).gamma;
    } catch (const Error&) {
      continue;
    }
    ASSERT_LT(dilated_margin(cl, gamma, eps), 0.0);
    EXPECT_LT(dilated_margin(cl, gamma, eps / 2), 0.0) << k;
    ++tested;
  }
  EXPECT_GE(tested, 15);
}

// ----------------------------------------------------------------- closed loops

TEST(CloseLoop, StateFeedback) {
  Plant p = plants::state_feedback_example();
  const ClosedLoop z = close_loop_sf(p, {Mat::Zero(1, 4)});
  EXPECT_EQ(z.Acl, p.A);
  EXPECT_EQ(z.Ccl, p.C1);
  const ClosedLoop k = close_loop_sf(p, {published_sf_conventional_gain()});
  EXPECT_LT(analysis::spectral_abscissa(k.Acl), 0.0);
  EXPECT_EQ(code_of([&] { close_loop_sf(p, {Mat::Zero(1, 3)}); }), ErrorCode::DimensionMismatch);

  Plant s;
  s.A = m11(0);
  s.B1 = m11(1);
  s.B2 = m11(1);
  s.C1 = m11(1);
  s.D11 = m11(0);
  s.D12 = m11(0);
  EXPECT_DOUBLE_EQ(close_loop_sf(s, {m11(-1)}).Acl(0, 0), -1.0);
}

TEST(CloseLoop, OutputFeedback) {
  Plant s;
  s.A = m11(-1);
  s.B1 = s.B2 = s.C1 = s.C2 = m11(1);
  s.D11 = s.D12 = s.D21 = m11(0);
  const ClosedLoop cl = close_loop_of(s, {m11(-1), m11(0), m11(0)});
  Mat expect = -Mat::Identity(2, 2);
  EXPECT_EQ(cl.Acl, expect);
  EXPECT_DOUBLE_EQ(cl.Bcl(1, 0), 0.0);

  const Plant of = plants::output_feedback_example();
  const ClosedLoop z = close_loop_of(of, {Mat::Zero(4, 4), Mat::Zero(4, 2), Mat::Zero(1, 4)});
  EXPECT_EQ(z.Acl.topLeftCorner(4, 4), of.A);
  EXPECT_TRUE(z.Acl.bottomRightCorner(4, 4).isZero());
  EXPECT_EQ(code_of([&] { close_loop_of(of, {Mat::Zero(3, 3), Mat::Zero(3, 2), Mat::Zero(1, 3)}); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { close_loop_of(plants::state_feedback_example(), {}); }), ErrorCode::DimensionMismatch);
}

// -------------------------------------------------------------------- analysis

TEST(Analysis, SpectralAbscissa) {
  EXPECT_DOUBLE_EQ(analysis::spectral_abscissa(-Mat::Identity(3, 3)), -1.0);
  Mat r(2, 2);
  r << 0, 1, -1, 0;
  EXPECT_NEAR(analysis::spectral_abscissa(r), 0.0, 1e-12);
  Mat bad = Mat::Zero(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_EQ(code_of([&] { analysis::spectral_abscissa(bad); }), ErrorCode::NonFinite);
}

TEST(Analysis, HinfOracles) {
  EXPECT_NEAR(analysis::hinf_norm(scalar_loop()), 1.0, 1e-8);
  Mat d(2, 2);
  d << 2, 0, 0, 1;
  EXPECT_NEAR(analysis::hinf_norm({-Mat::Identity(2, 2), Mat::Zero(2, 2), Mat::Zero(2, 2), d}), 2.0, 1e-8);
  const double z = 0.1;
  EXPECT_NEAR(analysis::hinf_norm(resonant(z)), 1.0 / (2 * z * std::sqrt(1 - z * z)), 1e-4);
  EXPECT_EQ(code_of([] { analysis::hinf_norm(ts::siso(m11(0.5), m11(1), m11(1), 0)); }), ErrorCode::Unstable);
}

TEST(Analysis, HinfAgreesWithBoundedReal) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int k = 0; k < 20; ++k) {
    const ClosedLoop cl = ts::random_hurwitz(dim(rng), dim(rng), dim(rng), rng, k % 3 == 0);
    const double h = analysis::hinf_norm(cl);
    EXPECT_NEAR(synth::bounded_real_gamma(cl).gamma, h, 1e-4 * h) << k;
  }
}

TEST(Analysis, HinfSimilarityInvariant) {
  std::mt19937_64 rng(29);
  int tested = 0;
  while (tested < 10) {
    const ClosedLoop cl = ts::random_hurwitz(3, 2, 2, rng);
    const Mat T = ts::randn(3, 3, rng) + 2.0 * Mat::Identity(3, 3);
    if (la::condition(T) > 100.0) continue;
    const Mat Ti = la::inverse(T);
    const ClosedLoop t{Ti * cl.Acl * T, Ti * cl.Bcl, cl.Ccl * T, cl.Dcl};
    const double h = analysis::hinf_norm(cl);
    EXPECT_NEAR(analysis::hinf_norm(t), h, 1e-6 * h);
    ++tested;
  }
}

TEST(Analysis, VerifyInvariant) {
  const ClosedLoop a{-Mat::Identity(2, 2), Mat::Zero(2, 1), Mat::Zero(1, 2), m11(0)};
  EXPECT_TRUE(analysis::verify_invariant(a, Mat::Identity(2, 2), 1.0));
  const ClosedLoop u{Mat::Identity(2, 2), Mat::Zero(2, 1), Mat::Zero(1, 2), m11(0)};
  EXPECT_FALSE(analysis::verify_invariant(u, Mat::Identity(2, 2), 0.5));
  EXPECT_EQ(code_of([&] { analysis::verify_invariant(a, -Mat::Identity(2, 2), 1.0); }),
            ErrorCode::NotPositiveDefinite);
}

TEST(Analysis, PeakControl) {
  Mat k(1, 2);
  k << 1, 0;
  EXPECT_DOUBLE_EQ(analysis::peak_control(k, Mat::Identity(2, 2), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(analysis::peak_control(m11(3), m11(4), 2.0), 12.0);
  EXPECT_EQ(code_of([&] { analysis::peak_control(k, m11(1), 1.0); }), ErrorCode::DimensionMismatch);
}

TEST(Analysis, PeakControlMatchesConstraintInequality) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  int tested = 0;
  for (int k = 0; k < 50; ++k) {
    const Mat K = ts::randn(2, 3, rng);
    const Mat L = ts::randn(3, 3, rng);
    const Mat X2 = L * L.transpose() + 0.1 * Mat::Identity(3, 3);
    const double w = u(rng), ulim = u(rng) * 3.0;
    const double peak = analysis::peak_control(K, X2, w);
    if (std::abs(peak - ulim) < 1e-6 * ulim) continue;
    // [X2  X2 K'; K X2  (u/w)^2 I] >= 0
    Mat m(5, 5);
    m << X2, X2 * K.transpose(), K * X2, (ulim * ulim) / (w * w) * Mat::Identity(2, 2);
    const bool lmi_ok = la::min_eig(la::symmetrize(m)) >= 0.0;
    EXPECT_EQ(lmi_ok, peak <= ulim) << k;
    ++tested;
  }
  EXPECT_GE(tested, 45);
}

TEST(Analysis, SaturationCertificate) {
  const Plant p = plants::state_feedback_example();
  const Mat K = synth::synth_sf_conventional(p, 0.3).K.K;
  const ClosedLoop cl = close_loop_sf(p, {K});
  const analysis::SaturationCertificate c = analysis::saturation_certificate(cl, K, p.w_max, p.u_lim);
  EXPECT_TRUE(la::is_positive_definite(c.Q));
  EXPECT_LE(analysis::peak_control(K, c.Q, p.w_max), p.u_lim * (1.0 + 1e-6));
  EXPECT_LE(la::max_eig(analysis::invariant_matrix(cl, c.Q, c.alpha)), 1e-6 * c.Q.norm());

  EXPECT_EQ(code_of([&] { analysis::saturation_certificate(cl, K, p.w_max, 1e-6); }), ErrorCode::NoCertificate);

  const ClosedLoop quiet{-Mat::Identity(2, 2), Mat::Zero(2, 1), Mat::Zero(1, 2), m11(0)};
  Mat k(1, 2);
  k << 1, 1;
  const analysis::SaturationCertificate q = analysis::saturation_certificate(quiet, k, 1.0, 1.0);
  EXPECT_LE(analysis::peak_control(k, q.Q, 1.0), 1.0);
}

TEST(Analysis, Simulation) {
  const ClosedLoop cl = scalar_loop();
  const analysis::SimResult zero = analysis::simulate(cl, m11(1), [](double) { return Vec::Zero(1); }, 0.01, 5.0);
  EXPECT_EQ(zero.max_u, 0.0);
  EXPECT_EQ(zero.l2_ratio, 0.0);

  // unit step of w_max through 1/(s+1): z settles at w_max; gain C reads z
  const double w = 2.0;
  const analysis::SimResult step =
      analysis::simulate(cl, m11(1), [w](double) { return Vec::Constant(1, w); }, 0.01, 30.0);
  EXPECT_NEAR(step.max_u, w, 1e-9);

  const ClosedLoop unstable = ts::siso(m11(1), m11(1), m11(1), 0);
  EXPECT_EQ(code_of([&] {
              analysis::simulate(unstable, m11(1), [](double) { return Vec::Ones(1); }, 0.01, 100.0);
            }),
            ErrorCode::UnstableIntegration);
  EXPECT_EQ(code_of([&] { analysis::simulate(cl, m11(1), [](double) { return Vec::Ones(1); }, 0.0, 1.0); }),
            ErrorCode::InvalidArgument);
}

TEST(Analysis, SimulatedRatioBelowHinf) {
  std::mt19937_64 rng(37);
  for (int k = 0; k < 10; ++k) {
    const ClosedLoop cl = ts::random_hurwitz(3, 1, 1, rng, true);
    const double h = analysis::hinf_norm(cl);
    const analysis::Disturbance w = analysis::bang_bang(1, 1.0, 2.0, 40.0, rng);
    const analysis::SimResult s =
        analysis::simulate(cl, Mat::Zero(1, 3), w, analysis::default_step(cl), 40.0);
    EXPECT_LE(s.l2_ratio, h * (1.0 + 1e-3)) << k;
  }
}

TEST(Analysis, BangBangStaysOnTheBound) {
  std::mt19937_64 rng(41);
  const analysis::Disturbance w = analysis::bang_bang(3, 5.0, 1.0, 20.0, rng);
  for (double t = 0.0; t < 20.0; t += 0.37) EXPECT_NEAR(w(t).norm(), 5.0, 1e-12);
}

// ---------------------------------------------------------------------- search

TEST(Search, GoldenBowl) {
  synth::GoldenOptions o;
  o.tol = 1e-3;
  o.max_iter = 40;
  o.log_scale = false;
  const synth::SearchResult r =
      synth::golden_search([](double e) { return std::optional<double>((e - 0.08) * (e - 0.08) + 0.83); }, 0.001,
                           0.5, o);
  EXPECT_NEAR(r.x, 0.08, 1e-3);
  EXPECT_NEAR(r.value, 0.83, 1e-6);
}

TEST(Search, GoldenDefaultBudget) {
  const synth::SearchResult r =
      synth::golden_search([](double e) { return std::optional<double>((e - 0.08) * (e - 0.08) + 0.83); }, 0.001,
                           0.5);
  EXPECT_LE(r.evaluations, 12);
  EXPECT_NEAR(r.x, 0.08, 0.01);
}

TEST(Search, GoldenInfeasible) {
  EXPECT_EQ(code_of([] { synth::golden_search([](double) { return std::optional<double>(); }, 0.001, 0.5); }),
            ErrorCode::AllInfeasible);
  EXPECT_EQ(code_of([] { synth::golden_search([](double) { return std::optional<double>(1.0); }, 0.5, 0.1); }),
            ErrorCode::InvalidArgument);
}

TEST(Search, GoldenMovesTowardFeasibleLowEnd) {
  // infeasible above 0.02
  const synth::SearchResult r = synth::golden_search(
      [](double e) { return e < 0.02 ? std::optional<double>(1.0 + e) : std::nullopt; }, 0.001, 0.5);
  EXPECT_LT(r.x, 0.02);
}

TEST(Search, Alpha) {
  synth::AlphaSearchOptions o;
  o.grid = {1e-3, 1e3, 13};
  const synth::SearchResult r =
      synth::alpha_search([](double a) { return std::optional<double>(std::abs(std::log(a)) + 1.0); }, o);
  EXPECT_NEAR(r.x, 1.0, 1e-9);
  EXPECT_NEAR(r.value, 1.0, 1e-9);

  o.grid = {2.5, 2.5, 1};
  const synth::SearchResult one =
      synth::alpha_search([](double a) { return std::optional<double>(a); }, o);
  EXPECT_DOUBLE_EQ(one.x, 2.5);
  EXPECT_EQ(code_of([] { synth::alpha_search([](double) { return std::optional<double>(); }); }),
            ErrorCode::AllInfeasible);
}

TEST(Search, AlphaExtraPoints) {
  // a narrow well between grid points, reached only through the extra seed
  auto f = [](double a) {
    return std::abs(a - 0.37) < 0.01 ? std::optional<double>(1.0) : std::optional<double>(2.0);
  };
  synth::AlphaSearchOptions o;
  o.refine_evals = 0;
  EXPECT_DOUBLE_EQ(synth::alpha_search(f, o).value, 2.0);
  o.extra = {0.37};
  EXPECT_DOUBLE_EQ(synth::alpha_search(f, o).value, 1.0);
}

// ------------------------------------------------------------ state feedback

TEST(StateFeedback, ConventionalIsSound) {
  const Plant p = plants::state_feedback_example();
  const auto r = synth::synth_sf_conventional(p, 0.3);
  EXPECT_TRUE(la::is_positive_definite(r.cert.Q));
  EXPECT_LE((r.K.K * r.cert.Q - r.cert.Y).norm(), 1e-8 * (1.0 + r.cert.Y.norm()));
  const ClosedLoop cl = close_loop_sf(p, r.K);
  EXPECT_LE(analysis::hinf_norm(cl), r.cert.gamma * (1.0 + 1e-4));
  EXPECT_TRUE(analysis::verify_invariant(cl, r.cert.Q, 0.3));
  EXPECT_LE(analysis::peak_control(r.K.K, r.cert.Q, p.w_max), p.u_lim * (1.0 + 1e-6));
}

TEST(StateFeedback, DilatedIsSound) {
  const Plant p = plants::state_feedback_example();
  const auto r = synth::synth_sf_dilated(p, 0.3, synth::Epsilons::common(0.0802));
  EXPECT_TRUE(la::is_positive_definite(r.cert.X1));
  EXPECT_TRUE(la::is_positive_definite(r.cert.X2));
  EXPECT_LE((r.K.K * r.cert.G - r.cert.Y).norm(), 1e-8 * (1.0 + r.cert.Y.norm()));
  const ClosedLoop cl = close_loop_sf(p, r.K);
  EXPECT_LE(analysis::hinf_norm(cl), r.cert.gamma * (1.0 + 1e-4));
  EXPECT_TRUE(analysis::verify_invariant(cl, r.cert.X2, 0.3));
  EXPECT_LE(analysis::peak_control(r.K.K, r.cert.X2, p.w_max), p.u_lim * (1.0 + 1e-6));
  // solver output sits on the margin of the numeric inequalities
  const double res = synth::sf_dilated_residual(p, r.cert);
  EXPECT_LT(res, 0.0);
  EXPECT_GT(res, -1e-3);
  synth::SfDilatedCert worse = r.cert;
  worse.gamma *= 0.9;
  EXPECT_GT(synth::sf_dilated_residual(p, worse), 0.0);
}

TEST(StateFeedback, ConventionalEmbedsAtSmallEpsilon) {
  const Plant p = plants::state_feedback_example();
  const auto c = synth::synth_sf_conventional(p, 0.3);
  const auto e = synth::embed_sf_conventional(p, c);
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(e->cert.gamma, c.cert.gamma);
  EXPECT_EQ(e->K.K, c.K.K);
  EXPECT_LT(synth::sf_dilated_residual(p, e->cert), 0.0);
  EXPECT_LE(e->cert.eps.e1, 1e-3);
  // the construction needs eps below some threshold
  synth::SfDilatedCert big = e->cert;
  big.eps = synth::Epsilons::common(0.5);
  EXPECT_GT(synth::sf_dilated_residual(p, big), 0.0);
  EXPECT_FALSE(synth::embed_sf_conventional(p, c, 1.0, 0.5).has_value());
}

TEST(StateFeedback, Errors) {
  const Plant p = plants::state_feedback_example();
  EXPECT_EQ(code_of([&] { synth::synth_sf_conventional(p, 0.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { synth::synth_sf_dilated(p, 1.0, {0.1, -0.1, 0.1}); }), ErrorCode::InvalidArgument);
  Plant bad = p;
  bad.D12 = Mat::Zero(3, 1);
  EXPECT_EQ(code_of([&] { synth::synth_sf_conventional(bad, 1.0); }), ErrorCode::DimensionMismatch);
}

// G = G' = X1 = X2 = Q turns the dilated
// inequalities into the conventional ones as eps -> 0.
TEST(StateFeedback, SymmetricSlackRecoversConventional) {
  using lmi::MatExpr;
  const Plant p = plants::state_feedback_example();
  const double alpha = 0.3, e = 1e-4;
  const Index n = p.n(), q = p.q(), m = p.m(), pp = p.p();
  lmi::LmiProblem prob;
  const auto Qv = prob.symmetric(n, "Q");
  const auto Yv = prob.general(m, n, "Y");
  const auto g = prob.scalar("gamma");
  const MatExpr G = MatExpr::var(Qv), Y = MatExpr::var(Yv);
  const MatExpr pi = p.A * G + p.B2 * Y - 0.5 * G;
  const MatExpr cg = p.C1 * G + p.D12 * Y;
  lmi::SymBlocks l2({n, q, pp, n});
  l2.set(0, 0, G + lmi::he(pi));
  l2.set(0, 1, p.B1);
  l2.set(0, 2, cg.transpose());
  l2.set(0, 3, -2.0 * e * pi);
  l2.set(1, 1, -MatExpr::scaled_identity(g, q));
  l2.set(1, 2, Mat(p.D11.transpose()));
  l2.set(2, 2, -MatExpr::scaled_identity(g, pp));
  l2.set(2, 3, -2.0 * e * cg);
  l2.set(3, 3, -4.0 * e * G);
  prob.add_lmi(l2.build());
  lmi::SymBlocks inv({n, q, n});
  inv.set(0, 0, G + lmi::he(pi) + alpha * G);
  inv.set(0, 1, p.B1);
  inv.set(0, 2, -2.0 * e * (pi + 0.5 * alpha * G));
  inv.set(1, 1, MatExpr(Mat(-alpha * Mat::Identity(q, q))));
  inv.set(2, 2, -4.0 * e * G);
  prob.add_lmi(inv.build());
  lmi::SymBlocks con({n, m, n});
  con.set(0, 0, -G);
  con.set(0, 1, -Y.transpose());
  con.set(0, 2, 2.0 * e * G);
  con.set(1, 1, MatExpr(Mat(-p.constraint_ratio() * Mat::Identity(m, m))));
  con.set(1, 2, 2.0 * e * Y);
  con.set(2, 2, -4.0 * e * G);
  prob.add_lmi(con.build());
  prob.add_positive(Qv);
  prob.minimize(g);
  const lmi::StandardSdp s = lmi::compile(prob);
  const sdp::SdpSolution sol = sdp::solve(s);
  ASSERT_EQ(sol.status, sdp::Status::Optimal);
  const double restricted = lmi::unpack(s, sol.x).at(g.id)(0, 0);
  const double conventional = synth::synth_sf_conventional(p, alpha).cert.gamma;
  EXPECT_NEAR(restricted, conventional, 0.01 * conventional);
  // the unrestricted dilated program can only do better
  EXPECT_LE(synth::synth_sf_dilated(p, alpha, synth::Epsilons::common(e)).cert.gamma, restricted * (1.0 + 1e-6));
}

TEST(StateFeedback, NoDisturbancePath) {
  Plant p = plants::state_feedback_example();
  p.B1.setZero();
  p.D11 = Mat::Zero(2, 1);
  p.D11(0, 0) = 0.3;
  const auto r = synth::synth_sf_conventional(p, 1.0);
  EXPECT_NEAR(r.cert.gamma, 0.3, 1e-4);
}

// ----------------------------------------------------------- output feedback

TEST(OutputFeedback, ConventionalReconstruction) {
  const Plant p = plants::output_feedback_example();
  const auto r = synth::synth_of_conventional(p, 1.0);
  EXPECT_TRUE(la::is_positive_definite(r.cert.X));
  EXPECT_TRUE(la::is_positive_definite(r.cert.Y));
  EXPECT_LE((r.cert.S - (r.cert.X - la::inverse(r.cert.Y))).norm(), 1e-8 * r.cert.X.norm());
  const ClosedLoop cl = close_loop_of(p, r.controller);
  EXPECT_LT(analysis::spectral_abscissa(cl.Acl), 0.0);
  EXPECT_LE(analysis::hinf_norm(cl), r.cert.gamma * (1.0 + 1e-4));
  // the Lyapunov matrix [X S; S S] certifies the reconstructed loop
  EXPECT_LT(la::max_eig(bounded_real_matrix(cl, r.cert.closed_loop_q(), r.cert.gamma * (1.0 + 1e-6))), 1e-7);
}

TEST(OutputFeedback, DilatedReconstruction) {
  const Plant p = plants::output_feedback_example();
  const auto r = synth::synth_of_dilated(p, 1.0, synth::Epsilons::common(0.0231));
  const auto& c = r.cert;
  EXPECT_LE((c.M1 - c.M1.transpose()).norm(), 0.0);
  EXPECT_LE((c.M2 - c.M2.transpose()).norm(), 0.0);
  const Mat rhs = c.V - c.R.transpose() * c.Y;
  EXPECT_LE((c.G21.transpose() * c.H21 - rhs).norm(), 1e-8 * rhs.norm());
  const ClosedLoop cl = close_loop_of(p, r.controller);
  EXPECT_LE(analysis::hinf_norm(cl), c.gamma * (1.0 + 1e-4));
  EXPECT_TRUE(la::is_positive_definite(c.X2));
  EXPECT_TRUE(analysis::verify_invariant(cl, c.X2, c.alpha, -1e-6 * c.X2.norm()));
}

TEST(OutputFeedback, Errors) {
  EXPECT_EQ(code_of([] { synth::synth_of_conventional(plants::state_feedback_example(), 1.0); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] {
              synth::multiobjective(plants::state_feedback_example(), synth::Feedback::Output,
                                    synth::Method::Conventional, synth::EpsMode::Common);
            }),
            ErrorCode::DimensionMismatch);
}

TEST(OutputFeedback, FullStateMeasurementMatchesStateFeedback) {
  Plant p = plants::state_feedback_example();
  p.C2 = Mat::Identity(4, 4);
  p.D21 = Mat::Zero(4, 1);
  synth::MultiOptions o;
  o.verify = false;
  const double of = synth::multiobjective(p, synth::Feedback::Output, synth::Method::Conventional,
                                          synth::EpsMode::Common, o)
                        .gamma;
  const double sf = synth::multiobjective(p, synth::Feedback::State, synth::Method::Conventional,
                                          synth::EpsMode::Common, o)
                        .gamma;
  EXPECT_NEAR(of, sf, 0.05 * sf);
}

// -------------------------------------------------------------- orchestration

TEST(Multiobjective, DominanceAndVerificationOnRandomPlant) {
  std::mt19937_64 rng(43);
  synth::MultiOptions o;
  o.verify_opts.simulations = 10;
  int tested = 0;
  for (int k = 0; k < 6 && tested < 2; ++k) {
    const Plant p = ts::random_plant2(rng);
    synth::SynthesisReport con;
    try {
      con = synth::multiobjective(p, synth::Feedback::State, synth::Method::Conventional, synth::EpsMode::Common,
                                  o);
    } catch (const Error&) {
      continue;
    }
    const synth::SynthesisReport dil =
        synth::multiobjective(p, synth::Feedback::State, synth::Method::Dilated, synth::EpsMode::Common, o);
    EXPECT_LE(dil.gamma, con.gamma * (1.0 + 1e-6));
    ASSERT_TRUE(dil.verification.has_value());
    EXPECT_TRUE(analysis::passed(*dil.verification));
    ASSERT_TRUE(dil.eps.has_value());
    EXPECT_LE(dil.eps_evaluations, 12);
    EXPECT_FALSE(dil.trace.empty());
    ++tested;
  }
  EXPECT_EQ(tested, 2);
}

TEST(Multiobjective, FixedEpsilon) {
  synth::MultiOptions o;
  o.eps = 0.0802;
  o.verify = false;
  const synth::SynthesisReport r = synth::multiobjective(plants::state_feedback_example(), synth::Feedback::State,
                                                         synth::Method::Dilated, synth::EpsMode::Common, o);
  ASSERT_TRUE(r.eps.has_value());
  EXPECT_DOUBLE_EQ(r.eps->e1, 0.0802);
  EXPECT_DOUBLE_EQ(r.eps->e2, 0.0802);
  EXPECT_EQ(r.eps_evaluations, 1);
}
