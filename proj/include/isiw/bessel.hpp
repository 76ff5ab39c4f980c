#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace isiw {

namespace detail {

// Taylor coefficients c_1..c_26 of 1/Gamma(z) about z = 0.
inline constexpr double kRecipGammaTaylor[] = {
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
};

/// Temme's auxiliary gamma quantities for |mu| <= 1/2:
///   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
///   gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
/// evaluated from the Taylor series so that gam1 has no cancellation at mu -> 0.
template <typename Scalar>
void temme_gammas(Scalar mu, Scalar &gam1, Scalar &gam2, Scalar &gampl,
                  Scalar &gammi) {
  constexpr int count = sizeof(kRecipGammaTaylor) / sizeof(double);
  const Scalar mu2 = mu * mu;
  Scalar odd = 0;
  Scalar even = 0;
  // c_k with k odd enter with mu^{k-1}; k even with mu^{k-2} (negated in gam1).
  for (int k = count; k >= 1; --k) {
    const Scalar c = Scalar(kRecipGammaTaylor[k - 1]);
    if (k % 2 == 1)
      odd = odd * mu2 + c;
    else
      even = even * mu2 + c;
  }
  gam1 = -even;
  gam2 = odd;
  gampl = gam2 - mu * gam1; // 1/Gamma(1+mu)
  gammi = gam2 + mu * gam1; // 1/Gamma(1-mu)
}

} // namespace detail

/// Exponentially scaled modified Bessel function of the second kind,
/// exp(x) * K_nu(x), for real order nu and x > 0.
///
/// Orders are reduced to mu = nu - round(nu) in [-1/2, 1/2]. K_mu and
/// K_{mu+1} come from Temme's series for x < 2 and from Steed's evaluation
/// of Temme's continued fraction for x >= 2; higher orders follow by the
/// (stable) forward recurrence.
template <typename Scalar> Scalar bessel_k_scaled(Scalar nu, Scalar x) {
  using std::abs;
  using std::cosh;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sinh;
  using std::sqrt;

  if (!(x > 0))
    throw std::domain_error("bessel_k: argument must be positive");
  if (!std::isfinite(static_cast<double>(nu)))
    throw std::domain_error("bessel_k: order must be finite");

  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  constexpr int max_iter = 10000;
  const Scalar pi = std::numbers::pi_v<Scalar>;

  nu = abs(nu);
  const int nl = static_cast<int>(nu + Scalar(0.5));
  const Scalar mu = nu - nl;
  const Scalar mu2 = mu * mu;
  const Scalar xi = 1 / x;
  const Scalar xi2 = 2 * xi;

  Scalar k_mu;
  Scalar k_mu1;
  if (x < 2) {
    const Scalar x2 = x / 2;
    const Scalar pimu = pi * mu;
    const Scalar fact = abs(pimu) < eps ? Scalar(1) : pimu / sin(pimu);
    Scalar d = -log(x2);
    Scalar e = mu * d;
    const Scalar fact2 = abs(e) < eps ? Scalar(1) : sinh(e) / e;
    Scalar gam1, gam2, gampl, gammi;
    detail::temme_gammas(mu, gam1, gam2, gampl, gammi);
    Scalar ff = fact * (gam1 * cosh(e) + gam2 * fact2 * d);
    Scalar sum = ff;
    e = exp(e);
    Scalar p = Scalar(0.5) * e / gampl;
    Scalar q = Scalar(0.5) / (e * gammi);
    Scalar c = 1;
    d = x2 * x2;
    Scalar sum1 = p;
    int i = 1;
    for (; i <= max_iter; ++i) {
      ff = (i * ff + p + q) / (i * i - mu2);
      c *= d / i;
      p /= i - mu;
      q /= i + mu;
      const Scalar del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (abs(del) < abs(sum) * eps)
        break;
    }
    if (i > max_iter)
      throw std::runtime_error("bessel_k: series failed to converge");
    const Scalar scale = exp(x);
    k_mu = sum * scale;
    k_mu1 = sum1 * xi2 * scale;
  } else {
    Scalar b = 2 * (1 + x);
    Scalar d = 1 / b;
    Scalar h = d;
    Scalar delh = d;
    Scalar q1 = 0;
    Scalar q2 = 1;
    const Scalar a1 = Scalar(0.25) - mu2;
    Scalar q = a1;
    Scalar c = a1;
    Scalar a = -a1;
    Scalar s = 1 + q * delh;
    int i = 2;
    for (; i <= max_iter; ++i) {
      a -= 2 * (i - 1);
      c = -a * c / i;
      const Scalar qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2;
      d = 1 / (b + a * d);
      delh = (b * d - 1) * delh;
      h += delh;
      const Scalar dels = q * delh;
      s += dels;
      if (abs(dels / s) < eps)
        break;
    }
    if (i > max_iter)
      throw std::runtime_error("bessel_k: continued fraction failed to converge");
    h *= a1;
    k_mu = sqrt(pi / (2 * x)) / s;
    k_mu1 = k_mu * (mu + x + Scalar(0.5) - h) * xi;
  }

  for (int i = 1; i <= nl; ++i) {
    const Scalar next = (mu + i) * xi2 * k_mu1 + k_mu;
    k_mu = k_mu1;
    k_mu1 = next;
  }
  return k_mu;
}

/// Modified Bessel function of the second kind K_nu(x), x > 0.
template <typename Scalar> Scalar bessel_k(Scalar nu, Scalar x) {
  using std::exp;
  return bessel_k_scaled(nu, x) * exp(-x);
}

} // namespace isiw
