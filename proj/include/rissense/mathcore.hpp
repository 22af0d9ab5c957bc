#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace rissense {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Raised when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Received power, stored in watts. dBm only exists at I/O boundaries.
class PowerValue {
 public:
  constexpr PowerValue() = default;

  static PowerValue watts(double w);
  static PowerValue dbm(double dbm);

  [[nodiscard]] double in_watts() const { return watts_; }
  [[nodiscard]] double in_dbm() const;

  friend bool operator==(const PowerValue&, const PowerValue&) = default;

 private:
  explicit PowerValue(double w) : watts_(w) {}
  double watts_ = 0.0;
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);
double db_to_linear(double db);

/// Gaussian tail probability Q(x) = P(Z > x), Z ~ N(0,1).
double q_function(double x);

/// Inverse of q_function on (0,1): returns x with Q(x) = p.
double q_inverse(double p);

/// Hermitian check with an entrywise tolerance scaled by the largest entry magnitude.
bool is_hermitian(const ComplexMatrix& a, double rel_tol = 1e-12);

struct HermitianEigen {
  RealVector values;     // ascending
  ComplexMatrix vectors; // column k pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
HermitianEigen hermitian_eig(const ComplexMatrix& a);

/// Frobenius-nearest positive-semidefinite matrix (eigenvalue clipping).
ComplexMatrix project_psd(const ComplexMatrix& a);

/// Largest eigenvalue and a unit eigenvector for it.
std::pair<double, ComplexVector> dominant_eigenpair(const ComplexMatrix& a);

/// Wraps an angle into [0, 2*pi).
double wrap_phase(double angle);

/// arg() with the convention arg(0) = 0.
double safe_arg(cplx z);

}  // namespace rissense
