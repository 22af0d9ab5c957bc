#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rissense/mathcore.hpp"

namespace rissense {

/// Malformed subproblem: unknown block, wrong coefficient shape, non-Hermitian data.
class ConstructionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BlockId {
  int index = -1;
};

/// Real linear functional sum_k Tr(C_k X_k) over Hermitian blocks, with Hermitian C_k.
class LinearExpr {
 public:
  struct Term {
    BlockId block;
    ComplexMatrix coeff;
  };

  LinearExpr() = default;
  LinearExpr(BlockId block, ComplexMatrix coeff);

  LinearExpr& operator+=(const LinearExpr& other);
  LinearExpr& operator*=(double factor);
  friend LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
  friend LinearExpr operator-(LinearExpr a, LinearExpr b) { return a += (b *= -1.0); }
  friend LinearExpr operator*(double f, LinearExpr a) { return a *= f; }

  [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }

 private:
  std::vector<Term> terms_;
};

/// One summand left * X * right of a linear matrix map applied to a block.
struct MapTerm {
  BlockId block;
  ComplexMatrix left;
  ComplexMatrix right;
};

/// Concave maximization over Hermitian positive-semidefinite blocks:
///
///   maximize   sum_k Tr(C_k X_k) - sum_q (w_q / 2) || sum_t L_t X R_t ||_F^2 + const
///   subject to linear equalities / inequalities in the blocks, every X_k PSD.
///
/// Each block may carry a diagonal scale s (X_ij ~ s_i s_j) that the solver
/// uses to work in well-conditioned coordinates; it does not change the problem.
class ConvexSubproblem {
 public:
  BlockId add_block(std::string name, int dim, RealVector scale = {});

  [[nodiscard]] int block_count() const { return static_cast<int>(blocks_.size()); }
  [[nodiscard]] int block_dim(BlockId b) const;
  [[nodiscard]] const std::string& block_name(BlockId b) const;

  /// Tr(coeff * X_b).
  [[nodiscard]] LinearExpr trace(BlockId b, const ComplexMatrix& coeff) const;
  /// Tr(X_b).
  [[nodiscard]] LinearExpr trace(BlockId b) const;
  /// Re and Im of the (i, j) entry of X_b.
  [[nodiscard]] LinearExpr entry_real(BlockId b, int i, int j) const;
  [[nodiscard]] LinearExpr entry_imag(BlockId b, int i, int j) const;

  void add_equality(const LinearExpr& expr, double rhs);
  void add_less_equal(const LinearExpr& expr, double rhs);
  void add_greater_equal(const LinearExpr& expr, double rhs);

  void add_objective(const LinearExpr& expr);
  void add_objective_constant(double value) { objective_constant_ += value; }
  /// Adds -(weight/2) * || sum_t left_t X right_t ||_F^2 to the objective (weight >= 0).
  void add_concave_quadratic(double weight, std::vector<MapTerm> terms);

  struct Block {
    std::string name;
    int dim = 0;
    RealVector scale;
  };
  struct Row {
    LinearExpr expr;
    double rhs = 0.0;
  };
  struct Quadratic {
    double weight = 0.0;
    std::vector<MapTerm> terms;
  };

  [[nodiscard]] const std::vector<Block>& blocks() const { return blocks_; }
  [[nodiscard]] const std::vector<Row>& equalities() const { return equalities_; }
  [[nodiscard]] const std::vector<Row>& inequalities() const { return inequalities_; }
  [[nodiscard]] const LinearExpr& objective() const { return objective_; }
  [[nodiscard]] const std::vector<Quadratic>& quadratics() const { return quadratics_; }
  [[nodiscard]] double objective_constant() const { return objective_constant_; }

  /// Objective value at a given point (one matrix per block).
  [[nodiscard]] double evaluate_objective(const std::vector<ComplexMatrix>& x) const;
  /// Largest violation of the linear rows at a point, each row normalized by its coefficient norm.
  [[nodiscard]] double max_row_violation(const std::vector<ComplexMatrix>& x) const;

 private:
  void check_expr(const LinearExpr& expr) const;
  void check_block(BlockId b) const;

  std::vector<Block> blocks_;
  std::vector<Row> equalities_;
  std::vector<Row> inequalities_;
  LinearExpr objective_;
  std::vector<Quadratic> quadratics_;
  double objective_constant_ = 0.0;
};

enum class SolverStatus { Optimal, Infeasible, IterationCap };

std::string to_string(SolverStatus status);

struct SolverReport {
  SolverStatus status = SolverStatus::IterationCap;
  double objective = 0.0;
  double max_violation = 0.0;  // normalized linear rows and negative eigenvalues
  int iterations = 0;
};

/// Internal iterate, reusable as a warm start for a problem with the same layout.
struct SolverState {
  RealVector x;
  RealVector z;
  RealVector y;
  double rho = 0.0;
};

struct SolverSettings {
  double tol = 1e-6;
  int max_iter = 10000;
  const SolverState* warm_start = nullptr;
};

struct SubproblemSolution {
  std::vector<ComplexMatrix> blocks;
  SolverReport report;
  SolverState state;
};

/// Operator-splitting solver for ConvexSubproblem. On the iteration cap, a
/// phase-one problem (minimize the largest row violation) decides between
/// "infeasible" and "iteration-cap".
SubproblemSolution solve_concave_subproblem(const ConvexSubproblem& problem,
                                            const SolverSettings& settings = {});

}  // namespace rissense
