#pragma once

// Dense linear algebra for the small matrices that appear in LMI synthesis.
// Storage is Eigen; the symmetric eigensolver is a cyclic Jacobi iteration.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmi/error.hpp"

namespace dmi {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct SymEig {
  Vec eigenvalues;  // ascending
  Mat eigenvectors;  // column k pairs with eigenvalues[k]
};

namespace la {

inline void require_square(const Mat& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NonSquare,
                std::string(what) + " is " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()));
  }
}

inline void require_finite(const Mat& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
  }
}

inline Mat symmetrize(const Mat& s) { return 0.5 * (s + s.transpose()); }

inline Mat eye(Index n) { return Mat::Identity(n, n); }
inline Mat zeros(Index r, Index c) { return Mat::Zero(r, c); }

/// Block-diagonal concatenation.
inline Mat blkdiag(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. The input is
/// symmetrized first; the result satisfies V diag(lambda) V^T = (S + S^T)/2.
inline SymEig sym_eig(const Mat& s_in) {
  require_square(s_in, "sym_eig input");
  require_finite(s_in, "sym_eig input");
  const Index n = s_in.rows();
  Mat a = symmetrize(s_in);
  Mat v = Mat::Identity(n, n);

  const double scale = a.norm();
  if (n > 1 && scale > 0.0) {
    for (int sweep = 0; sweep < 100; ++sweep) {
      double off = 0.0;
      for (Index p = 0; p < n; ++p)
        for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
      if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;

      for (Index p = 0; p < n - 1; ++p) {
        for (Index q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (apq == 0.0) continue;
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double sn = t * c;
          for (Index k = 0; k < n; ++k) {
            const double akp = a(k, p);
            const double akq = a(k, q);
            a(k, p) = c * akp - sn * akq;
            a(k, q) = sn * akp + c * akq;
          }
          for (Index k = 0; k < n; ++k) {
            const double apk = a(p, k);
            const double aqk = a(q, k);
            a(p, k) = c * apk - sn * aqk;
            a(q, k) = sn * apk + c * aqk;
          }
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          for (Index k = 0; k < n; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - sn * vkq;
            v(k, q) = sn * vkp + c * vkq;
          }
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index i, Index j) { return a(i, i) < a(j, j); });
  SymEig out{Vec(n), Mat(n, n)};
  for (Index k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.eigenvectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

inline double max_eig(const Mat& s) {
  const SymEig e = sym_eig(s);
  return e.eigenvalues.size() == 0 ? -std::numeric_limits<double>::infinity()
                                   : e.eigenvalues[e.eigenvalues.size() - 1];
}

inline double min_eig(const Mat& s) {
  const SymEig e = sym_eig(s);
  return e.eigenvalues.size() == 0 ? std::numeric_limits<double>::infinity()
                                   : e.eigenvalues[0];
}

/// Lower-triangular Cholesky factor. Throws NotPositiveDefinite when a pivot
/// is not strictly positive.
inline Mat cholesky(const Mat& s_in) {
  require_square(s_in, "cholesky input");
  require_finite(s_in, "cholesky input");
  const Mat s = symmetrize(s_in);
  const Index n = s.rows();
  Mat l = Mat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = s(j, j);
    for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "pivot " + std::to_string(j) + " is " + std::to_string(d));
    }
    l(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i) {
      double x = s(i, j);
      for (Index k = 0; k < j; ++k) x -= l(i, k) * l(j, k);
      l(i, j) = x / l(j, j);
    }
  }
  return l;
}

inline bool is_positive_definite(const Mat& s) {
  try {
    (void)cholesky(s);
    return true;
  } catch (const Error&) {
    return false;
  }
}

/// Condition threshold above which solve_linear reports Singular.
inline constexpr double kSingularCondition = 1e13;

/// Solves A X = B with partial-pivot LU. Singular when the reciprocal
/// condition estimate falls below 1/kSingularCondition.
inline Mat solve_linear(const Mat& a, const Mat& b) {
  require_square(a, "solve_linear lhs");
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "solve_linear: A has " +
                                                  std::to_string(a.rows()) +
                                                  " rows, B has " +
                                                  std::to_string(b.rows()));
  }
  require_finite(a, "solve_linear lhs");
  require_finite(b, "solve_linear rhs");
  if (a.rows() == 0) return b;
  const Eigen::PartialPivLU<Mat> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond * kSingularCondition > 1.0)) {
    throw Error(ErrorCode::Singular,
                "condition estimate " + std::to_string(1.0 / rcond));
  }
  return lu.solve(b);
}

inline Mat inverse(const Mat& a) { return solve_linear(a, eye(a.rows())); }

/// Condition number in the 2-norm.
inline double condition(const Mat& a) {
  const Eigen::JacobiSVD<Mat> svd(a);
  const Vec& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  return sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                 : std::numeric_limits<double>::infinity();
}

inline double norm2(const Mat& a) {
  if (a.size() == 0) return 0.0;
  const Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()[0];
}

/// Diagonal similarity scaling d (powers of two) such that diag(d)^-1 A diag(d)
/// has balanced row/column norms. Parlett-Reinsch iteration.
inline Vec balance(const Mat& a_in) {
  require_square(a_in, "balance input");
  const Index n = a_in.rows();
  Mat a = a_in;
  Vec d = Vec::Ones(n);
  constexpr double radix = 2.0;
  bool converged = false;
  for (int iter = 0; iter < 200 && !converged; ++iter) {
    converged = true;
    for (Index i = 0; i < n; ++i) {
      double c = 0.0;
      double r = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        d[i] *= f;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
  return d;
}

/// Eigenvalues of a general real matrix (balanced real Schur via Eigen).
inline Eigen::VectorXcd eigenvalues(const Mat& a) {
  require_square(a, "eigenvalues input");
  require_finite(a, "eigenvalues input");
  if (a.rows() == 0) return Eigen::VectorXcd(0);
  const Vec d = balance(a);
  const Mat b = d.cwiseInverse().asDiagonal() * a * d.asDiagonal();
  const Eigen::EigenSolver<Mat> es(b, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalLimit, "general eigensolver did not converge");
  }
  return es.eigenvalues();
}

}  // namespace la
}  // namespace dmi
