#pragma once

// Block-LMI modeling layer. Affine matrix expressions over matrix-valued
// decision variables, and a compiler to the scalar standard form
//   F_j(x) = F_j0 + sum_i x_i F_ji  <=  -delta_j I.

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dmi/densela.hpp"

namespace dmi::lmi {

enum class VarKind { Symmetric, General, Scalar };

struct VarRef {
  int id = -1;
  VarKind kind = VarKind::Scalar;
  Index rows = 1;
  Index cols = 1;
  std::string name;

  /// Number of scalar decision variables this matrix variable contributes.
  [[nodiscard]] Index scalar_count() const {
    switch (kind) {
      case VarKind::Symmetric: return rows * (rows + 1) / 2;
      case VarKind::General: return rows * cols;
      case VarKind::Scalar: return 1;
    }
    return 0;
  }
};

/// Values of matrix variables, keyed by VarRef::id. Scalars are 1x1.
using Assignment = std::map<int, Mat>;

/// left * V * right, or left * V^T * right when transposed. A scalar
/// variable x stands for x * I_p with p = left.cols() = right.rows().
struct Term {
  Mat left;
  VarRef var;
  bool transposed = false;
  Mat right;
};

class MatExpr {
 public:
  MatExpr() = default;

  explicit MatExpr(Mat constant)
      : rows_(constant.rows()), cols_(constant.cols()), constant_(std::move(constant)) {}

  static MatExpr zeros(Index r, Index c) { return MatExpr(Mat::Zero(r, c)); }

  static MatExpr var(const VarRef& v) {
    if (v.kind == VarKind::Scalar) return scaled_identity(v, 1);
    MatExpr e = zeros(v.rows, v.cols);
    e.terms_.push_back({Mat::Identity(v.rows, v.rows), v, false, Mat::Identity(v.cols, v.cols)});
    return e;
  }

  /// x * I_k for a scalar variable x.
  static MatExpr scaled_identity(const VarRef& scalar, Index k) {
    if (scalar.kind != VarKind::Scalar) {
      throw Error(ErrorCode::InvalidArgument, "scaled_identity needs a scalar variable");
    }
    MatExpr e = zeros(k, k);
    e.terms_.push_back({Mat::Identity(k, k), scalar, false, Mat::Identity(k, k)});
    return e;
  }

  [[nodiscard]] Index rows() const { return rows_; }
  [[nodiscard]] Index cols() const { return cols_; }
  [[nodiscard]] const Mat& constant() const { return constant_; }
  [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }

  [[nodiscard]] MatExpr transpose() const {
    MatExpr out(constant_.transpose());
    out.terms_.reserve(terms_.size());
    for (const Term& t : terms_) {
      const bool flip = t.var.kind == VarKind::General ? !t.transposed : false;
      out.terms_.push_back({t.right.transpose(), t.var, flip, t.left.transpose()});
    }
    return out;
  }

  MatExpr& operator+=(const MatExpr& other) {
    check_same_shape(other, "+");
    constant_ += other.constant_;
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    return *this;
  }

  MatExpr& operator-=(const MatExpr& other) { return *this += -other; }

  MatExpr operator-() const { return -1.0 * *this; }

  friend MatExpr operator+(MatExpr a, const MatExpr& b) { return a += b; }
  friend MatExpr operator-(MatExpr a, const MatExpr& b) { return a -= b; }
  friend MatExpr operator+(MatExpr a, const Mat& b) { return a += MatExpr(b); }
  friend MatExpr operator+(const Mat& a, MatExpr b) { return b += MatExpr(a); }
  friend MatExpr operator-(MatExpr a, const Mat& b) { return a -= MatExpr(b); }
  friend MatExpr operator-(const Mat& a, const MatExpr& b) { return MatExpr(a) - b; }

  friend MatExpr operator*(double s, MatExpr e) {
    e.constant_ *= s;
    for (Term& t : e.terms_) t.left *= s;
    return e;
  }
  friend MatExpr operator*(const MatExpr& e, double s) { return s * e; }

  friend MatExpr operator*(const Mat& m, const MatExpr& e) {
    if (m.cols() != e.rows_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "left factor has " + std::to_string(m.cols()) + " cols, expression has " +
                      std::to_string(e.rows_) + " rows");
    }
    MatExpr out(m * e.constant_);
    out.terms_.reserve(e.terms_.size());
    for (const Term& t : e.terms_) out.terms_.push_back({m * t.left, t.var, t.transposed, t.right});
    return out;
  }

  friend MatExpr operator*(const MatExpr& e, const Mat& m) {
    if (m.rows() != e.cols_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expression has " + std::to_string(e.cols_) + " cols, right factor has " +
                      std::to_string(m.rows()) + " rows");
    }
    MatExpr out(e.constant_ * m);
    out.terms_.reserve(e.terms_.size());
    for (const Term& t : e.terms_) out.terms_.push_back({t.left, t.var, t.transposed, t.right * m});
    return out;
  }

  /// Places this expression at (row_off, col_off) inside a zero matrix of the
  /// given size.
  [[nodiscard]] MatExpr embed(Index total_rows, Index total_cols, Index row_off,
                              Index col_off) const {
    if (row_off + rows_ > total_rows || col_off + cols_ > total_cols) {
      throw Error(ErrorCode::DimensionMismatch, "embedded block exceeds target");
    }
    Mat el = Mat::Zero(total_rows, rows_);
    el.block(row_off, 0, rows_, rows_).setIdentity();
    Mat er = Mat::Zero(cols_, total_cols);
    er.block(0, col_off, cols_, cols_).setIdentity();
    return el * (*this) * er;
  }

 private:
  void check_same_shape(const MatExpr& other, const char* op) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
      throw Error(ErrorCode::DimensionMismatch,
                  std::string("operator") + op + ": " + std::to_string(rows_) + "x" +
                      std::to_string(cols_) + " vs " + std::to_string(other.rows_) + "x" +
                      std::to_string(other.cols_));
    }
  }

  Index rows_ = 0;
  Index cols_ = 0;
  Mat constant_ = Mat(0, 0);
  std::vector<Term> terms_;
};

inline MatExpr operator*(const Mat& m, const VarRef& v) { return m * MatExpr::var(v); }
inline MatExpr operator*(const VarRef& v, const Mat& m) { return MatExpr::var(v) * m; }

/// A + A^T.
inline MatExpr he(const MatExpr& e) {
  if (e.rows() != e.cols()) {
    throw Error(ErrorCode::NonSquare, "he() of a " + std::to_string(e.rows()) + "x" +
                                          std::to_string(e.cols()) + " expression");
  }
  return e + e.transpose();
}

inline Mat variable_value(const Assignment& a, const VarRef& v) {
  const auto it = a.find(v.id);
  if (it == a.end()) {
    throw Error(ErrorCode::MissingVariable, "no value for variable '" + v.name + "'");
  }
  if (it->second.rows() != v.rows || it->second.cols() != v.cols) {
    throw Error(ErrorCode::DimensionMismatch, "value for '" + v.name + "' is " +
                                                  std::to_string(it->second.rows()) + "x" +
                                                  std::to_string(it->second.cols()));
  }
  return it->second;
}

inline Mat eval(const MatExpr& e, const Assignment& a) {
  Mat out = e.constant();
  for (const Term& t : e.terms()) {
    const Mat v = variable_value(a, t.var);
    if (t.var.kind == VarKind::Scalar) {
      out.noalias() += v(0, 0) * (t.left * t.right);
    } else if (t.transposed) {
      out.noalias() += t.left * v.transpose() * t.right;
    } else {
      out.noalias() += t.left * v * t.right;
    }
  }
  return out;
}

/// Square block matrix assembled from its upper triangle; blocks below the
/// diagonal are transposes, unset blocks are zero.
class SymBlocks {
 public:
  explicit SymBlocks(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
    offsets_.push_back(0);
    for (Index s : sizes_) offsets_.push_back(offsets_.back() + s);
    blocks_.resize(sizes_.size() * sizes_.size());
  }

  void set(std::size_t i, std::size_t j, const MatExpr& e) {
    if (i > j) {
      set(j, i, e.transpose());
      return;
    }
    if (e.rows() != sizes_[i] || e.cols() != sizes_[j]) {
      throw Error(ErrorCode::DimensionMismatch,
                  "block (" + std::to_string(i) + "," + std::to_string(j) + ") is " +
                      std::to_string(e.rows()) + "x" + std::to_string(e.cols()) +
                      ", expected " + std::to_string(sizes_[i]) + "x" +
                      std::to_string(sizes_[j]));
    }
    blocks_[i * sizes_.size() + j] = e;
    set_[i * sizes_.size() + j] = true;
  }
  void set(std::size_t i, std::size_t j, const Mat& m) { set(i, j, MatExpr(m)); }

  [[nodiscard]] MatExpr build() const {
    const Index total = offsets_.back();
    MatExpr out = MatExpr::zeros(total, total);
    const std::size_t k = sizes_.size();
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i; j < k; ++j) {
        if (!set_.count(i * k + j)) continue;
        const MatExpr& b = blocks_[i * k + j];
        if (i == j) {
          out += b.embed(total, total, offsets_[i], offsets_[i]);
        } else {
          out += b.embed(total, total, offsets_[i], offsets_[j]);
          out += b.transpose().embed(total, total, offsets_[j], offsets_[i]);
        }
      }
    }
    return out;
  }

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  std::vector<MatExpr> blocks_;
  std::map<std::size_t, bool> set_;
};

struct Constraint {
  MatExpr expr;  // required: expr < 0
  std::string label;
};

class LmiProblem {
 public:
  VarRef symmetric(Index n, std::string name) {
    return add({next_id(), VarKind::Symmetric, n, n, std::move(name)});
  }
  VarRef general(Index rows, Index cols, std::string name) {
    return add({next_id(), VarKind::General, rows, cols, std::move(name)});
  }
  VarRef scalar(std::string name) { return add({next_id(), VarKind::Scalar, 1, 1, std::move(name)}); }

  /// expr < 0 (strict; realized with a margin at compile time).
  void add_lmi(MatExpr expr, std::string label = {}) {
    if (expr.rows() != expr.cols()) {
      throw Error(ErrorCode::NonSquare, "constraint '" + label + "' is not square");
    }
    constraints_.push_back({std::move(expr), std::move(label)});
  }

  /// v > 0.
  void add_positive(const VarRef& v, std::string label = {}) {
    if (v.kind == VarKind::General) {
      throw Error(ErrorCode::InvalidArgument, "positivity needs a symmetric or scalar variable");
    }
    add_lmi(-MatExpr::var(v), label.empty() ? v.name + " > 0" : std::move(label));
  }

  /// Adds <weight, v> to the minimized objective.
  void minimize(const VarRef& v, Mat weight) { objective_.emplace_back(v, std::move(weight)); }
  void minimize(const VarRef& scalar) { minimize(scalar, Mat::Ones(1, 1)); }

  [[nodiscard]] const std::vector<VarRef>& variables() const { return vars_; }
  [[nodiscard]] const std::vector<Constraint>& constraints() const { return constraints_; }
  [[nodiscard]] const std::vector<std::pair<VarRef, Mat>>& objective() const { return objective_; }

 private:
  int next_id() const { return static_cast<int>(vars_.size()); }
  VarRef add(VarRef v) {
    vars_.push_back(v);
    return v;
  }

  std::vector<VarRef> vars_;
  std::vector<Constraint> constraints_;
  std::vector<std::pair<VarRef, Mat>> objective_;
};

struct Entry {
  Index row;
  Index col;
  double value;
};

/// Coefficient of one scalar decision variable inside one block, stored as
/// the full (both triangles) list of nonzeros.
struct BlockCoef {
  Index var;
  std::vector<Entry> entries;
};

struct SdpBlock {
  Index dim = 0;
  Mat constant;
  std::vector<BlockCoef> coefs;  // sorted by var
  double margin = 0.0;
  std::string label;
};

struct VarLayout {
  VarRef var;
  Index offset;  // first scalar index
};

struct StandardSdp {
  Index m = 0;
  Vec c;
  std::vector<SdpBlock> blocks;
  std::vector<VarLayout> layout;
  /// Optional per-variable lower bounds x_i >= value.
  std::vector<std::pair<Index, double>> lower_bounds;

  [[nodiscard]] Mat coefficient(std::size_t block, Index var) const {
    const SdpBlock& b = blocks[block];
    Mat out = Mat::Zero(b.dim, b.dim);
    for (const BlockCoef& bc : b.coefs) {
      if (bc.var != var) continue;
      for (const Entry& e : bc.entries) out(e.row, e.col) += e.value;
    }
    return out;
  }

  /// F_j(x) without the strictness margin.
  [[nodiscard]] Mat evaluate(std::size_t block, const Vec& x) const {
    const SdpBlock& b = blocks[block];
    Mat out = b.constant;
    for (const BlockCoef& bc : b.coefs) {
      const double xi = x[bc.var];
      for (const Entry& e : bc.entries) out(e.row, e.col) += xi * e.value;
    }
    return out;
  }

  [[nodiscard]] Index offset_of(const VarRef& v) const {
    for (const VarLayout& l : layout)
      if (l.var.id == v.id) return l.offset;
    throw Error(ErrorCode::UnboundVariable, "variable '" + v.name + "' not in layout");
  }
};

namespace detail {

inline const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

/// Calls f(scalar_index_within_var, basis_matrix_as_(k,l,weight) list).
template <typename F>
void for_each_basis(const VarRef& v, F&& f) {
  Index idx = 0;
  switch (v.kind) {
    case VarKind::Scalar:
      f(idx, 0, 0, 1.0, -1, -1, 0.0);
      return;
    case VarKind::General:
      for (Index r = 0; r < v.rows; ++r)
        for (Index c = 0; c < v.cols; ++c) f(idx++, r, c, 1.0, -1, -1, 0.0);
      return;
    case VarKind::Symmetric:
      for (Index r = 0; r < v.rows; ++r) {
        f(idx++, r, r, 1.0, -1, -1, 0.0);
        for (Index c = r + 1; c < v.rows; ++c) f(idx++, r, c, kInvSqrt2, c, r, kInvSqrt2);
      }
      return;
  }
}

}  // namespace detail

inline double default_margin(const Mat& constant) {
  const double inf_norm = constant.size() == 0 ? 0.0 : constant.cwiseAbs().rowwise().sum().maxCoeff();
  return 1e-7 * (1.0 + inf_norm);
}

/// Packs a matrix assignment into the scalar vector (svec for symmetric
/// variables, off-diagonals scaled by sqrt(2)).
inline Vec pack(const StandardSdp& sdp, const Assignment& a) {
  Vec x = Vec::Zero(sdp.m);
  for (const VarLayout& l : sdp.layout) {
    const Mat v = variable_value(a, l.var);
    detail::for_each_basis(l.var, [&](Index k, Index r, Index c, double, Index, Index, double) {
      if (l.var.kind == VarKind::Symmetric && r != c) {
        x[l.offset + k] = std::sqrt(2.0) * 0.5 * (v(r, c) + v(c, r));
      } else {
        x[l.offset + k] = v(r, c);
      }
    });
  }
  return x;
}

inline Assignment unpack(const StandardSdp& sdp, const Vec& x) {
  Assignment a;
  for (const VarLayout& l : sdp.layout) {
    Mat v = Mat::Zero(l.var.rows, l.var.cols);
    detail::for_each_basis(l.var, [&](Index k, Index r, Index c, double w, Index r2, Index c2,
                                      double w2) {
      v(r, c) += w * x[l.offset + k];
      if (r2 >= 0) v(r2, c2) += w2 * x[l.offset + k];
    });
    a[l.var.id] = v;
  }
  return a;
}

inline StandardSdp compile(const LmiProblem& p) {
  StandardSdp sdp;
  std::map<int, Index> offset;
  for (const VarRef& v : p.variables()) {
    offset[v.id] = sdp.m;
    sdp.layout.push_back({v, sdp.m});
    sdp.m += v.scalar_count();
  }
  auto check_bound = [&](const VarRef& v) {
    const auto it = offset.find(v.id);
    if (it == offset.end()) {
      throw Error(ErrorCode::UnboundVariable, "variable '" + v.name + "' is not declared");
    }
    const VarRef& decl = p.variables()[static_cast<std::size_t>(v.id)];
    if (decl.kind != v.kind || decl.rows != v.rows || decl.cols != v.cols) {
      throw Error(ErrorCode::DimensionMismatch, "variable '" + v.name + "' shape differs from declaration");
    }
    return it->second;
  };

  sdp.c = Vec::Zero(sdp.m);
  for (const auto& [v, w] : p.objective()) {
    const Index off = check_bound(v);
    if (v.kind == VarKind::Scalar) {
      if (w.size() != 1) throw Error(ErrorCode::DimensionMismatch, "scalar objective weight");
    } else if (w.rows() != v.rows || w.cols() != v.cols) {
      throw Error(ErrorCode::DimensionMismatch, "objective weight for '" + v.name + "'");
    }
    detail::for_each_basis(v, [&](Index k, Index r, Index c, double wt, Index r2, Index c2,
                                  double wt2) {
      double coef = wt * w(r, c);
      if (r2 >= 0) coef += wt2 * w(r2, c2);
      sdp.c[off + k] += coef;
    });
  }

  for (const Constraint& con : p.constraints()) {
    const Index d = con.expr.rows();
    SdpBlock blk;
    blk.dim = d;
    blk.label = con.label;
    blk.constant = la::symmetrize(con.expr.constant());
    blk.margin = default_margin(blk.constant);

    std::map<Index, Mat> dense;
    for (const Term& t : con.expr.terms()) {
      const Index off = check_bound(t.var);
      if (t.var.kind == VarKind::Scalar) {
        Mat& acc = dense.try_emplace(off, Mat::Zero(d, d)).first->second;
        acc.noalias() += t.left * t.right;
        continue;
      }
      detail::for_each_basis(t.var, [&](Index k, Index r, Index c, double w, Index r2, Index c2,
                                        double w2) {
        Mat& acc = dense.try_emplace(off + k, Mat::Zero(d, d)).first->second;
        const Index rr = t.transposed ? c : r;
        const Index cc = t.transposed ? r : c;
        acc.noalias() += w * t.left.col(rr) * t.right.row(cc);
        if (r2 >= 0) acc.noalias() += w2 * t.left.col(r2) * t.right.row(c2);
      });
    }
    for (auto& [var, coef] : dense) {
      const Mat sym = la::symmetrize(coef);
      BlockCoef bc{var, {}};
      for (Index j = 0; j < d; ++j)
        for (Index i = 0; i < d; ++i)
          if (sym(i, j) != 0.0) bc.entries.push_back({i, j, sym(i, j)});
      if (!bc.entries.empty()) blk.coefs.push_back(std::move(bc));
    }
    sdp.blocks.push_back(std::move(blk));
  }
  return sdp;
}

}  // namespace dmi::lmi
