#include "rissense/convex_subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rissense {

LinearExpr::LinearExpr(BlockId block, ComplexMatrix coeff) {
  terms_.push_back({block, std::move(coeff)});
}

LinearExpr& LinearExpr::operator+=(const LinearExpr& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  return *this;
}

LinearExpr& LinearExpr::operator*=(double factor) {
  for (Term& t : terms_) {
    t.coeff *= factor;
  }
  return *this;
}

std::string to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::Optimal:
      return "optimal";
    case SolverStatus::Infeasible:
      return "infeasible";
    case SolverStatus::IterationCap:
      return "iteration-cap";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Problem construction

BlockId ConvexSubproblem::add_block(std::string name, int dim, RealVector scale) {
  if (dim < 1) {
    throw ConstructionError("block '" + name + "' must have positive dimension");
  }
  if (scale.size() == 0) {
    scale = RealVector::Ones(dim);
  }
  if (scale.size() != dim || !(scale.minCoeff() > 0.0) || !scale.allFinite()) {
    throw ConstructionError("block '" + name + "': scale must be positive with one entry per row");
  }
  blocks_.push_back({std::move(name), dim, std::move(scale)});
  return BlockId{static_cast<int>(blocks_.size()) - 1};
}

void ConvexSubproblem::check_block(BlockId b) const {
  if (b.index < 0 || b.index >= block_count()) {
    throw ConstructionError("reference to an undeclared block");
  }
}

int ConvexSubproblem::block_dim(BlockId b) const {
  check_block(b);
  return blocks_[static_cast<std::size_t>(b.index)].dim;
}

const std::string& ConvexSubproblem::block_name(BlockId b) const {
  check_block(b);
  return blocks_[static_cast<std::size_t>(b.index)].name;
}

LinearExpr ConvexSubproblem::trace(BlockId b, const ComplexMatrix& coeff) const {
  LinearExpr e(b, coeff);
  check_expr(e);
  return e;
}

LinearExpr ConvexSubproblem::trace(BlockId b) const {
  const int d = block_dim(b);
  return LinearExpr(b, ComplexMatrix::Identity(d, d));
}

LinearExpr ConvexSubproblem::entry_real(BlockId b, int i, int j) const {
  const int d = block_dim(b);
  if (i < 0 || j < 0 || i >= d || j >= d) {
    throw ConstructionError("entry index outside block '" + block_name(b) + "'");
  }
  ComplexMatrix c = ComplexMatrix::Zero(d, d);
  c(i, j) += 0.5;
  c(j, i) += 0.5;
  return LinearExpr(b, c);
}

LinearExpr ConvexSubproblem::entry_imag(BlockId b, int i, int j) const {
  const int d = block_dim(b);
  if (i < 0 || j < 0 || i >= d || j >= d) {
    throw ConstructionError("entry index outside block '" + block_name(b) + "'");
  }
  ComplexMatrix c = ComplexMatrix::Zero(d, d);
  if (i != j) {
    c(i, j) = cplx(0.0, 0.5);
    c(j, i) = cplx(0.0, -0.5);
  }
  return LinearExpr(b, c);
}

void ConvexSubproblem::check_expr(const LinearExpr& expr) const {
  for (const auto& t : expr.terms()) {
    const int d = block_dim(t.block);
    if (t.coeff.rows() != d || t.coeff.cols() != d) {
      throw ConstructionError("coefficient shape does not match block '" + block_name(t.block) +
                              "'");
    }
    if (!t.coeff.allFinite() || !is_hermitian(t.coeff)) {
      throw ConstructionError("coefficient for block '" + block_name(t.block) +
                              "' must be finite and Hermitian");
    }
  }
}

void ConvexSubproblem::add_equality(const LinearExpr& expr, double rhs) {
  check_expr(expr);
  equalities_.push_back({expr, rhs});
}

void ConvexSubproblem::add_less_equal(const LinearExpr& expr, double rhs) {
  check_expr(expr);
  inequalities_.push_back({expr, rhs});
}

void ConvexSubproblem::add_greater_equal(const LinearExpr& expr, double rhs) {
  add_less_equal(-1.0 * expr, -rhs);
}

void ConvexSubproblem::add_objective(const LinearExpr& expr) {
  check_expr(expr);
  objective_ += expr;
}

void ConvexSubproblem::add_concave_quadratic(double weight, std::vector<MapTerm> terms) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw ConstructionError("concave quadratic weight must be finite and nonnegative");
  }
  if (terms.empty()) {
    throw ConstructionError("concave quadratic needs at least one term");
  }
  const Eigen::Index rows = terms.front().left.rows();
  const Eigen::Index cols = terms.front().right.cols();
  for (const MapTerm& t : terms) {
    const int d = block_dim(t.block);
    if (t.left.cols() != d || t.right.rows() != d || t.left.rows() != rows ||
        t.right.cols() != cols) {
      throw ConstructionError("quadratic map shape does not match block '" +
                              block_name(t.block) + "'");
    }
    if (!t.left.allFinite() || !t.right.allFinite()) {
      throw ConstructionError("quadratic map entries must be finite");
    }
  }
  quadratics_.push_back({weight, std::move(terms)});
}

namespace {

double linear_value(const LinearExpr& e, const std::vector<ComplexMatrix>& x) {
  double v = 0.0;
  for (const auto& t : e.terms()) {
    v += (t.coeff.adjoint().cwiseProduct(x[static_cast<std::size_t>(t.block.index)].transpose()))
             .sum()
             .real();
  }
  return v;
}

double coefficient_norm(const LinearExpr& e) {
  double s = 0.0;
  for (const auto& t : e.terms()) {
    s += t.coeff.squaredNorm();
  }
  return std::sqrt(s);
}

}  // namespace

double ConvexSubproblem::evaluate_objective(const std::vector<ComplexMatrix>& x) const {
  double v = objective_constant_ + linear_value(objective_, x);
  for (const Quadratic& q : quadratics_) {
    ComplexMatrix out = ComplexMatrix::Zero(q.terms.front().left.rows(),
                                            q.terms.front().right.cols());
    for (const MapTerm& t : q.terms) {
      out += t.left * x[static_cast<std::size_t>(t.block.index)] * t.right;
    }
    v -= 0.5 * q.weight * out.squaredNorm();
  }
  return v;
}

double ConvexSubproblem::max_row_violation(const std::vector<ComplexMatrix>& x) const {
  double worst = 0.0;
  for (const Row& r : equalities_) {
    const double norm = std::max(coefficient_norm(r.expr), 1e-300);
    worst = std::max(worst, std::abs(linear_value(r.expr, x) - r.rhs) / norm /
                                std::max(1.0, std::abs(r.rhs) / norm));
  }
  for (const Row& r : inequalities_) {
    const double norm = std::max(coefficient_norm(r.expr), 1e-300);
    worst = std::max(worst, (linear_value(r.expr, x) - r.rhs) / norm /
                                std::max(1.0, std::abs(r.rhs) / norm));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Solver

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = std::numbers::sqrt2;

// Isometric real coordinates of a Hermitian matrix: diagonal first, then
// (sqrt2 Re, sqrt2 Im) of each strictly upper entry in row-major order.
void herm_to_vec(const ComplexMatrix& m, double* out) {
  const Eigen::Index d = m.rows();
  for (Eigen::Index i = 0; i < d; ++i) {
    out[i] = m(i, i).real();
  }
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const cplx a = 0.5 * (m(i, j) + std::conj(m(j, i)));
      out[k++] = kSqrt2 * a.real();
      out[k++] = kSqrt2 * a.imag();
    }
  }
}

ComplexMatrix vec_to_herm(const double* in, int d) {
  ComplexMatrix m(d, d);
  for (int i = 0; i < d; ++i) {
    m(i, i) = in[i];
  }
  int k = d;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const cplx a(in[k] / kSqrt2, in[k + 1] / kSqrt2);
      k += 2;
      m(i, j) = a;
      m(j, i) = std::conj(a);
    }
  }
  return m;
}

struct Cone {
  int offset = 0;
  int dim = 0;
};

// min 1/2 x'Px + q'x  s.t.  lo <= A x <= hi,  x restricted to a product of PSD cones.
struct Standardized {
  int n = 0;
  Eigen::MatrixXd a;
  RealVector lo;
  RealVector hi;
  Eigen::MatrixXd p;
  RealVector q;
  std::vector<Cone> cones;
};

// Projects onto the product of PSD cones. Consecutive ADMM iterates are close, so each
// cone is diagonalized in the eigenbasis found at the previous call, where the Jacobi
// sweeps start from a nearly diagonal matrix.
class ConeProjector {
 public:
  explicit ConeProjector(const std::vector<Cone>& cones) : cones_(cones), bases_(cones.size()) {}

  void operator()(double* v) {
    for (std::size_t k = 0; k < cones_.size(); ++k) {
      const Cone& c = cones_[k];
      if (c.dim == 1) {
        v[c.offset] = std::max(v[c.offset], 0.0);
        continue;
      }
      ComplexMatrix& basis = bases_[k];
      if (basis.rows() != c.dim || ++uses_ % kRefresh == 0) {
        basis = ComplexMatrix::Identity(c.dim, c.dim);
      }
      const ComplexMatrix m = vec_to_herm(v + c.offset, c.dim);
      ComplexMatrix rotated = basis.adjoint() * m * basis;
      rotated = 0.5 * (rotated + rotated.adjoint()).eval();
      const HermitianEigen eig = hermitian_eig(rotated);
      basis = basis * eig.vectors;
      if (eig.values.minCoeff() >= 0.0) {
        continue;
      }
      const RealVector clipped = eig.values.cwiseMax(0.0);
      const ComplexMatrix proj = basis * clipped.cast<cplx>().asDiagonal() * basis.adjoint();
      herm_to_vec(proj, v + c.offset);
    }
  }

 private:
  // Periodic reset bounds the drift of the accumulated unitary basis.
  static constexpr long kRefresh = 500;
  const std::vector<Cone>& cones_;
  std::vector<ComplexMatrix> bases_;
  long uses_ = 0;
};

double row_violation(const Standardized& s, const RealVector& point) {
  const RealVector ax = s.a * point;
  double worst = 0.0;
  for (Eigen::Index r = 0; r < ax.size(); ++r) {
    const double scale = std::max({1.0, std::isfinite(s.lo[r]) ? std::abs(s.lo[r]) : 0.0,
                                   std::isfinite(s.hi[r]) ? std::abs(s.hi[r]) : 0.0});
    worst = std::max({worst, (s.lo[r] - ax[r]) / scale, (ax[r] - s.hi[r]) / scale});
  }
  return worst;
}

struct AdmmResult {
  RealVector point;  // x with cone coordinates taken from the projected copy
  SolverState state;
  int iterations = 0;
  bool converged = false;
  double violation = 0.0;
};

class Admm {
 public:
  Admm(const Standardized& s, double tol) : s_(s), tol_(tol) {
    m_ = static_cast<int>(s.a.rows());
    equality_.resize(m_);
    for (int r = 0; r < m_; ++r) {
      equality_[r] = s.lo[r] == s.hi[r];
    }
  }

  AdmmResult run(int max_iter, const SolverState* warm) {
    const int n = s_.n;
    RealVector x = RealVector::Zero(n);
    RealVector z = RealVector::Zero(m_ + n);
    RealVector y = RealVector::Zero(m_ + n);
    double rho = 0.1;
    if (warm != nullptr && warm->x.size() == n && warm->z.size() == m_ + n &&
        warm->y.size() == m_ + n && warm->rho > 0.0) {
      x = warm->x;
      z = warm->z;
      y = warm->y;
      rho = warm->rho;
    }
    factor(rho);

    constexpr double sigma = 1e-6;
    constexpr double alpha = 1.6;
    AdmmResult out;
    RealVector rhs(n);
    RealVector xt(n);
    RealVector zhat(m_ + n);
    RealVector zprev(m_ + n);
    int since_update = 0;
    ConeProjector project(s_.cones);

    for (int it = 1; it <= max_iter; ++it) {
      rhs = sigma * x - s_.q;
      if (m_ > 0) {
        rhs += s_.a.transpose() *
               (rho_rows_.cwiseProduct(z.head(m_)) - y.head(m_));
      }
      rhs += rho * z.tail(n) - y.tail(n);
      xt = llt_.solve(rhs);

      zhat.head(m_) = s_.a * xt;
      zhat.tail(n) = xt;
      x = alpha * xt + (1.0 - alpha) * x;
      zhat = alpha * zhat + (1.0 - alpha) * z;

      zprev = z;
      for (int r = 0; r < m_; ++r) {
        z[r] = std::clamp(zhat[r] + y[r] / rho_rows_[r], s_.lo[r], s_.hi[r]);
      }
      z.tail(n) = zhat.tail(n) + y.tail(n) / rho;
      project(z.data() + m_);
      for (int r = 0; r < m_; ++r) {
        y[r] += rho_rows_[r] * (zhat[r] - z[r]);
      }
      y.tail(n) += rho * (zhat.tail(n) - z.tail(n));

      // Residuals.
      RealVector ax(m_ + n);
      ax.head(m_) = s_.a * x;
      ax.tail(n) = x;
      const double prim = (ax - z).lpNorm<Eigen::Infinity>();
      const RealVector px = s_.p * x;
      RealVector aty = y.tail(n);
      if (m_ > 0) {
        aty += s_.a.transpose() * y.head(m_);
      }
      const double dual = (px + s_.q + aty).lpNorm<Eigen::Infinity>();
      const double prim_scale =
          std::max(ax.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>());
      const double dual_scale = std::max({px.lpNorm<Eigen::Infinity>(),
                                          aty.lpNorm<Eigen::Infinity>(),
                                          s_.q.lpNorm<Eigen::Infinity>()});
      out.iterations = it;

      if (prim <= tol_ * (1.0 + prim_scale) && dual <= tol_ * (1.0 + dual_scale)) {
        RealVector point = z.tail(n);
        const double viol = row_violation(s_, point);
        if (viol <= tol_) {
          out.point = std::move(point);
          out.converged = true;
          out.violation = viol;
          break;
        }
      }

      if (++since_update >= 25) {
        since_update = 0;
        const double rel_prim = prim / std::max(prim_scale, 1e-300);
        const double rel_dual = dual / std::max(dual_scale, 1e-300);
        const double ratio = std::sqrt(rel_prim / std::max(rel_dual, 1e-300));
        if (ratio > 5.0 || ratio < 0.2) {
          const double next = std::clamp(rho * ratio, 1e-6, 1e6);
          if (next != rho) {
            rho = next;
            factor(rho);
          }
        }
      }
    }
    if (!out.converged) {
      out.point = z.tail(n);
      out.violation = row_violation(s_, out.point);
    }
    out.state = {x, z, y, rho};
    return out;
  }

 private:
  void factor(double rho) {
    const int n = s_.n;
    rho_rows_.resize(m_);
    for (int r = 0; r < m_; ++r) {
      rho_rows_[r] = equality_[r] ? 1e3 * rho : rho;
    }
    Eigen::MatrixXd k = s_.p;
    k.diagonal().array() += 1e-6 + rho;
    if (m_ > 0) {
      k.noalias() += s_.a.transpose() * rho_rows_.asDiagonal() * s_.a;
    }
    llt_.compute(k);
    (void)n;
  }

  const Standardized& s_;
  double tol_;
  int m_ = 0;
  std::vector<bool> equality_;
  RealVector rho_rows_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct Layout {
  std::vector<int> offsets;
  int n = 0;
};

Layout make_layout(const ConvexSubproblem& prob) {
  Layout l;
  for (const auto& b : prob.blocks()) {
    l.offsets.push_back(l.n);
    l.n += b.dim * b.dim;
  }
  return l;
}

// Row vector of a linear expression in the scaled coordinates.
RealVector expr_row(const ConvexSubproblem& prob, const Layout& layout, const LinearExpr& e) {
  RealVector row = RealVector::Zero(layout.n);
  for (const auto& t : e.terms()) {
    const auto& blk = prob.blocks()[static_cast<std::size_t>(t.block.index)];
    const ComplexMatrix scaled =
        blk.scale.cast<cplx>().asDiagonal() * t.coeff * blk.scale.cast<cplx>().asDiagonal();
    RealVector v(blk.dim * blk.dim);
    herm_to_vec(scaled, v.data());
    row.segment(layout.offsets[static_cast<std::size_t>(t.block.index)], v.size()) += v;
  }
  return row;
}

// Jacobian of the real/imag parts of sum_t L_t X R_t with respect to the scaled coordinates.
Eigen::MatrixXd quadratic_jacobian(const ConvexSubproblem& prob, const Layout& layout,
                                   const ConvexSubproblem::Quadratic& q) {
  const Eigen::Index rows = q.terms.front().left.rows();
  const Eigen::Index cols = q.terms.front().right.cols();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * rows * cols, layout.n);
  auto put = [&](int col, const ComplexMatrix& out) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index k = 2 * (c * rows + r);
        jac(k, col) += out(r, c).real();
        jac(k + 1, col) += out(r, c).imag();
      }
    }
  };
  for (const MapTerm& t : q.terms) {
    const auto& blk = prob.blocks()[static_cast<std::size_t>(t.block.index)];
    const int d = blk.dim;
    const int base = layout.offsets[static_cast<std::size_t>(t.block.index)];
    const ComplexMatrix ls = t.left * blk.scale.cast<cplx>().asDiagonal();
    const ComplexMatrix rs = blk.scale.cast<cplx>().asDiagonal() * t.right;
    for (int i = 0; i < d; ++i) {
      put(base + i, ls.col(i) * rs.row(i));
    }
    int k = d;
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        const ComplexMatrix ij = ls.col(i) * rs.row(j);
        const ComplexMatrix ji = ls.col(j) * rs.row(i);
        put(base + k, (ij + ji) / kSqrt2);
        put(base + k + 1, cplx(0.0, 1.0) * (ij - ji) / kSqrt2);
        k += 2;
      }
    }
  }
  return jac;
}

std::vector<ComplexMatrix> unpack(const ConvexSubproblem& prob, const Layout& layout,
                                  const RealVector& point) {
  std::vector<ComplexMatrix> out;
  for (std::size_t b = 0; b < prob.blocks().size(); ++b) {
    const auto& blk = prob.blocks()[b];
    const ComplexMatrix scaled = vec_to_herm(point.data() + layout.offsets[b], blk.dim);
    out.push_back(blk.scale.cast<cplx>().asDiagonal() * scaled *
                  blk.scale.cast<cplx>().asDiagonal());
  }
  return out;
}

Standardized standardize(const ConvexSubproblem& prob, const Layout& layout) {
  Standardized s;
  s.n = layout.n;
  const int m = static_cast<int>(prob.equalities().size() + prob.inequalities().size());
  s.a = Eigen::MatrixXd::Zero(m, s.n);
  s.lo.resize(m);
  s.hi.resize(m);
  int r = 0;
  auto add_row = [&](const ConvexSubproblem::Row& row, bool equality) {
    RealVector a = expr_row(prob, layout, row.expr);
    double norm = a.norm();
    if (!(norm > 0.0)) {
      norm = 1.0;
    }
    s.a.row(r) = a / norm;
    s.hi[r] = row.rhs / norm;
    s.lo[r] = equality ? row.rhs / norm : -kInf;
    ++r;
  };
  for (const auto& row : prob.equalities()) {
    add_row(row, true);
  }
  for (const auto& row : prob.inequalities()) {
    add_row(row, false);
  }

  s.q = -expr_row(prob, layout, prob.objective());
  s.p = Eigen::MatrixXd::Zero(s.n, s.n);
  for (const auto& quad : prob.quadratics()) {
    const Eigen::MatrixXd jac = quadratic_jacobian(prob, layout, quad);
    s.p.noalias() += quad.weight * jac.transpose() * jac;
  }
  const double scale = std::max(s.q.lpNorm<Eigen::Infinity>(), s.p.cwiseAbs().maxCoeff());
  if (scale > 0.0) {
    s.q /= scale;
    s.p /= scale;
  }
  for (std::size_t b = 0; b < prob.blocks().size(); ++b) {
    s.cones.push_back({layout.offsets[b], prob.blocks()[b].dim});
  }
  return s;
}

// Minimize the largest row violation t >= 0 over the same cones.
double phase_one(const Standardized& s, double tol, int max_iter) {
  Standardized f;
  f.n = s.n + 1;
  const int tau = s.n;
  std::vector<std::pair<RealVector, double>> rows;
  for (Eigen::Index r = 0; r < s.a.rows(); ++r) {
    RealVector a = RealVector::Zero(f.n);
    a.head(s.n) = s.a.row(r).transpose();
    if (std::isfinite(s.hi[r])) {
      RealVector up = a;
      up[tau] = -1.0;
      rows.emplace_back(up, s.hi[r]);
    }
    if (std::isfinite(s.lo[r])) {
      RealVector down = -a;
      down[tau] = -1.0;
      rows.emplace_back(down, -s.lo[r]);
    }
  }
  const int m = static_cast<int>(rows.size());
  f.a.resize(m, f.n);
  f.lo = RealVector::Constant(m, -kInf);
  f.hi.resize(m);
  for (int r = 0; r < m; ++r) {
    const double norm = rows[static_cast<std::size_t>(r)].first.norm();
    f.a.row(r) = rows[static_cast<std::size_t>(r)].first.transpose() / norm;
    f.hi[r] = rows[static_cast<std::size_t>(r)].second / norm;
  }
  f.p = Eigen::MatrixXd::Zero(f.n, f.n);
  f.q = RealVector::Zero(f.n);
  f.q[tau] = 1.0;
  f.cones = s.cones;
  f.cones.push_back({tau, 1});

  Admm admm(f, tol);
  const AdmmResult res = admm.run(max_iter, nullptr);
  return res.point[tau];
}

}  // namespace

SubproblemSolution solve_concave_subproblem(const ConvexSubproblem& problem,
                                            const SolverSettings& settings) {
  if (problem.block_count() == 0) {
    throw ConstructionError("subproblem has no variables");
  }
  const Layout layout = make_layout(problem);
  const Standardized std_form = standardize(problem, layout);

  Admm admm(std_form, settings.tol);
  AdmmResult res = admm.run(settings.max_iter, settings.warm_start);

  SubproblemSolution sol;
  sol.blocks = unpack(problem, layout, res.point);
  sol.state = std::move(res.state);
  sol.report.iterations = res.iterations;
  sol.report.objective = problem.evaluate_objective(sol.blocks);
  sol.report.max_violation = res.violation;
  if (res.converged) {
    sol.report.status = SolverStatus::Optimal;
  } else {
    const double worst = phase_one(std_form, settings.tol, settings.max_iter);
    sol.report.status =
        worst > 10.0 * settings.tol ? SolverStatus::Infeasible : SolverStatus::IterationCap;
  }
  return sol;
}

}  // namespace rissense
