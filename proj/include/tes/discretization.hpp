#ifndef TES_DISCRETIZATION_HPP
#define TES_DISCRETIZATION_HPP

// Exact zero-order-hold discretization of xdot = A x + B u over one step,
// with A and B frozen at the start of the step.

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "tes/errors.hpp"

namespace tes {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

// Pade approximants of degree 3..13 with their backward-error thresholds
// on ||A||_1 for double precision (Higham, SIAM J. Matrix Anal. 2005).
inline constexpr std::array<double, 4> kPadeTheta = {
    1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
    2.097847961257068e0};
inline constexpr double kPadeTheta13 = 5.371920351148152e0;

template <typename Scalar>
void pade_low(const DenseMatrix<Scalar> &a, int degree, DenseMatrix<Scalar> &u,
              DenseMatrix<Scalar> &v) {
  static constexpr double b3[] = {120, 60, 12, 1};
  static constexpr double b5[] = {30240, 15120, 3360, 420, 30, 1};
  static constexpr double b7[] = {17297280, 8648640, 1995840, 277200,
                                  25200,    1512,    56,      1};
  static constexpr double b9[] = {17643225600., 8821612800., 2075673600.,
                                  302702400.,   30270240.,   2162160.,
                                  110880.,      3960.,       90.,
                                  1.};
  const double *b = degree == 3 ? b3 : degree == 5 ? b5 : degree == 7 ? b7 : b9;
  const auto n = a.rows();
  const DenseMatrix<Scalar> a2 = a * a;
  DenseMatrix<Scalar> power = DenseMatrix<Scalar>::Identity(n, n);
  DenseMatrix<Scalar> odd = Scalar(b[1]) * power;
  v = Scalar(b[0]) * power;
  for (int k = 2; k <= degree; k += 2) {
    power = power * a2;
    v += Scalar(b[k]) * power;
    odd += Scalar(b[k + 1]) * power;
  }
  u = a * odd;
}

template <typename Scalar>
void pade13(const DenseMatrix<Scalar> &a, DenseMatrix<Scalar> &u,
            DenseMatrix<Scalar> &v) {
  static constexpr double b[] = {64764752532480000., 32382376266240000.,
                                 7771770303897600.,  1187353796428800.,
                                 129060195264000.,   10559470521600.,
                                 670442572800.,      33522128640.,
                                 1323241920.,        40840800.,
                                 960960.,            16380.,
                                 182.,               1.};
  const auto n = a.rows();
  const DenseMatrix<Scalar> id = DenseMatrix<Scalar>::Identity(n, n);
  const DenseMatrix<Scalar> a2 = a * a;
  const DenseMatrix<Scalar> a4 = a2 * a2;
  const DenseMatrix<Scalar> a6 = a4 * a2;
  DenseMatrix<Scalar> inner =
      a6 * (Scalar(b[13]) * a6 + Scalar(b[11]) * a4 + Scalar(b[9]) * a2);
  inner += Scalar(b[7]) * a6 + Scalar(b[5]) * a4 + Scalar(b[3]) * a2 +
           Scalar(b[1]) * id;
  u = a * inner;
  v = a6 * (Scalar(b[12]) * a6 + Scalar(b[10]) * a4 + Scalar(b[8]) * a2);
  v += Scalar(b[6]) * a6 + Scalar(b[4]) * a4 + Scalar(b[2]) * a2 +
       Scalar(b[0]) * id;
}

} // namespace detail

/// e^A by scaling and squaring with a Pade approximant of degree 3, 5, 7, 9
/// or 13 chosen from the 1-norm of A.
template <typename Derived>
DenseMatrix<typename Derived::Scalar>
matrix_exponential(const Eigen::MatrixBase<Derived> &a_in) {
  using Scalar = typename Derived::Scalar;
  if (a_in.rows() != a_in.cols())
    throw InvalidInput("matrix_exponential: matrix is not square");
  if (!a_in.allFinite())
    throw InvalidInput("matrix_exponential: non-finite entry");
  DenseMatrix<Scalar> a = a_in;
  const auto n = a.rows();
  if (n == 0)
    return a;
  const double norm1 = double(a.cwiseAbs().colwise().sum().maxCoeff());

  DenseMatrix<Scalar> u, v;
  int squarings = 0;
  bool done = false;
  for (std::size_t k = 0; k < detail::kPadeTheta.size(); ++k) {
    if (norm1 <= detail::kPadeTheta[k]) {
      detail::pade_low(a, int(2 * k + 3), u, v);
      done = true;
      break;
    }
  }
  if (!done) {
    if (norm1 > detail::kPadeTheta13)
      squarings = int(std::ceil(std::log2(norm1 / detail::kPadeTheta13)));
    a /= Scalar(std::ldexp(1.0, squarings));
    detail::pade13(a, u, v);
  }
  DenseMatrix<Scalar> r = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s)
    r = r * r;
  return r;
}

/// e^{A dt}.
template <typename Derived>
DenseMatrix<typename Derived::Scalar>
matrix_exponential(const Eigen::MatrixBase<Derived> &a,
                   typename Derived::Scalar dt) {
  if (!std::isfinite(double(dt)))
    throw InvalidInput("matrix_exponential: non-finite step");
  return matrix_exponential((a * dt).eval());
}

template <typename Scalar = double> struct DiscreteStep {
  DenseMatrix<Scalar> phi;   ///< e^{A dt}
  DenseVector<Scalar> gamma; ///< integral_0^dt e^{A s} B ds
  Scalar dt{};
};

/// Phi and Gamma from the exponential of the augmented block
/// [[A, B], [0, 0]] dt. Valid for singular A.
template <typename DerivedA, typename DerivedB>
DiscreteStep<typename DerivedA::Scalar>
discretize(const Eigen::MatrixBase<DerivedA> &a,
           const Eigen::MatrixBase<DerivedB> &b,
           typename DerivedA::Scalar dt) {
  using Scalar = typename DerivedA::Scalar;
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || b.cols() != 1)
    throw InvalidInput("discretize: A must be n x n and B n x 1");
  if (!(dt > 0) || !std::isfinite(double(dt)))
    throw InvalidInput("discretize: step must be positive and finite");
  if (!a.allFinite() || !b.allFinite())
    throw InvalidInput("discretize: non-finite system matrix");

  DenseMatrix<Scalar> aug = DenseMatrix<Scalar>::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a * dt;
  aug.topRightCorner(n, 1) = b * dt;
  const DenseMatrix<Scalar> e = matrix_exponential(aug);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, 1), dt};
}

} // namespace tes

#endif // TES_DISCRETIZATION_HPP
