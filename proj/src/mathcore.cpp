#include "rissense/mathcore.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

namespace rissense {

PowerValue PowerValue::watts(double w) {
  if (!(w >= 0.0) || !std::isfinite(w)) {
    throw DomainError("power must be a finite nonnegative number of watts");
  }
  return PowerValue(w);
}

PowerValue PowerValue::dbm(double dbm) { return watts(dbm_to_watts(dbm)); }

double PowerValue::in_dbm() const { return watts_to_dbm(watts_); }

double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts * 1e3); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double q_function(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("q_function: argument must be finite");
  }
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

namespace {

// Acklam's rational approximation of the standard normal quantile.
double normal_quantile_guess(double p) {
  constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
  constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
  constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  auto tail = [&](double q) {
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  };

  if (p < p_low) {
    return tail(std::sqrt(-2.0 * std::log(p)));
  }
  if (p > 1.0 - p_low) {
    return -tail(std::sqrt(-2.0 * std::log1p(-p)));
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

double q_inverse(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("q_inverse: probability must lie in (0,1)");
  }
  double x = -normal_quantile_guess(p);

  // Safeguarded Newton on Q(x) - p; Q is strictly decreasing.
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 60; ++it) {
    const double f = q_function(x) - p;
    if (f > 0.0) {
      lo = std::max(lo, x);
    } else {
      hi = std::min(hi, x);
    }
    if (std::abs(f) <= 1e-16 * std::max(p, 1e-300) || hi - lo < 1e-15) {
      break;
    }
    const double pdf = normal_pdf(x);
    double next = pdf > 0.0 ? x + f / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - x) < 1e-15 * std::max(1.0, std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

bool is_hermitian(const ComplexMatrix& a, double rel_tol) {
  if (a.rows() != a.cols()) {
    return false;
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i; j < a.cols(); ++j) {
      if (std::abs(a(i, j) - std::conj(a(j, i))) >= rel_tol * scale) {
        return false;
      }
    }
  }
  return true;
}

HermitianEigen hermitian_eig(const ComplexMatrix& input) {
  if (!is_hermitian(input)) {
    throw DomainError("hermitian_eig: matrix is not Hermitian");
  }
  const Eigen::Index n = input.rows();
  ComplexMatrix a = 0.5 * (input + input.adjoint());
  ComplexMatrix v = ComplexMatrix::Identity(n, n);

  const double total = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        s += std::norm(a(i, j));
      }
    }
    return std::sqrt(2.0 * s);
  };

  constexpr int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= 1e-15 * total) {
      break;
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag <= 1e-300 || mag <= 1e-18 * total) {
          continue;
        }
        const cplx phase = a(p, q) / mag;
        const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // G = [[c, s*phase], [-s*conj(phase), c]] on (p,q); A <- G^H A G, V <- V G.
        const cplx gpq = s * phase;
        const cplx gqp = -s * std::conj(phase);
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx akp = a(k, p);
          const cplx akq = a(k, q);
          a(k, p) = akp * c + akq * gqp;
          a(k, q) = akp * gpq + akq * c;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx apk = a(p, k);
          const cplx aqk = a(q, k);
          a(p, k) = c * apk + std::conj(gqp) * aqk;
          a(q, k) = std::conj(gpq) * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = vkp * c + vkq * gqp;
          v(k, q) = vkp * gpq + vkq * c;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return a(i, i).real() < a(j, j).real(); });

  HermitianEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]).real();
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

ComplexMatrix project_psd(const ComplexMatrix& a) {
  const HermitianEigen eig = hermitian_eig(a);
  const RealVector clipped = eig.values.cwiseMax(0.0);
  ComplexMatrix out = eig.vectors * clipped.cast<cplx>().asDiagonal() * eig.vectors.adjoint();
  return 0.5 * (out + out.adjoint());
}

std::pair<double, ComplexVector> dominant_eigenpair(const ComplexMatrix& a) {
  const HermitianEigen eig = hermitian_eig(a);
  const Eigen::Index last = eig.values.size() - 1;
  return {eig.values[last], eig.vectors.col(last)};
}

double wrap_phase(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(angle, two_pi);
  if (r < 0.0) {
    r += two_pi;
  }
  if (r >= two_pi) {
    r = 0.0;
  }
  return r;
}

double safe_arg(cplx z) { return z == cplx(0.0, 0.0) ? 0.0 : std::arg(z); }

}  // namespace rissense
