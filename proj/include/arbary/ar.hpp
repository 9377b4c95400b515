#pragma once

#include <cmath>
#include <complex>
#include <random>

#include "arbary/common.hpp"
#include "arbary/spectral.hpp"

namespace arbary {

/// All-pole model A(z) = 1 + sum_p a_p z^{-p} driven by white noise of
/// variance sigma2. Stability (all |kappa_p| < 1) is checked by the
/// operations that require it, not stored.
template <typename Scalar>
struct ArModel {
  VectorX<Scalar> a;
  Scalar sigma2 = Scalar(1);

  Index order() const { return a.size(); }
};

/// Levinson step-up: reflection coefficients -> monic AR coefficients.
/// Stage rule: a_m^{(m)} = kappa_m, a_i^{(m)} = a_i^{(m-1)} + kappa_m a_{m-i}^{(m-1)}.
template <typename Scalar>
VectorX<Scalar> parcor_to_ar(const VectorX<Scalar>& kappa) {
  const Index p = kappa.size();
  for (Index m = 0; m < p; ++m)
    if (!(std::abs(kappa[m]) < Scalar(1)))
      throw InstabilityError("parcor_to_ar: |kappa| >= 1", int(m + 1));
  VectorX<Scalar> a(p);
  for (Index m = 1; m <= p; ++m) {
    VectorX<Scalar> prev = a.head(m - 1);
    a[m - 1] = kappa[m - 1];
    for (Index i = 1; i < m; ++i)
      a[i - 1] = prev[i - 1] + kappa[m - 1] * prev[m - i - 1];
  }
  return a;
}

/// Step-down recursion, the inverse of parcor_to_ar. Throws with the
/// offending stage when the polynomial is unstable.
template <typename Scalar>
VectorX<Scalar> ar_to_parcor(const VectorX<Scalar>& a) {
  const Index p = a.size();
  VectorX<Scalar> kappa(p);
  VectorX<Scalar> work = a;
  for (Index m = p; m >= 1; --m) {
    const Scalar k = work[m - 1];
    if (!(std::abs(k) < Scalar(1)))
      throw InstabilityError("ar_to_parcor: |kappa| >= 1", int(m));
    kappa[m - 1] = k;
    const Scalar denom = Scalar(1) - k * k;
    VectorX<Scalar> prev(m - 1);
    for (Index i = 1; i < m; ++i)
      prev[i - 1] = (work[i - 1] - k * work[m - i - 1]) / denom;
    work = prev;
  }
  return kappa;
}

/// 1/|A(e^{jw})|^2 sampled on the grid.
template <typename Scalar>
VectorX<Scalar> all_pole_shape(const VectorX<Scalar>& a, const FrequencyGrid<Scalar>& grid) {
  VectorX<Scalar> shape(grid.n_bins);
  for (Index n = 0; n < grid.n_bins; ++n) {
    const std::complex<Scalar> z(std::cos(-grid.points[n]), std::sin(-grid.points[n]));
    std::complex<Scalar> acc(1, 0), zp(1, 0);
    for (Index p = 0; p < a.size(); ++p) {
      zp *= z;
      acc += a[p] * zp;
    }
    shape[n] = Scalar(1) / std::norm(acc);
  }
  return shape;
}

template <typename Scalar>
Psd<Scalar> ar_to_psd(const ArModel<Scalar>& model, const FrequencyGrid<Scalar>& grid) {
  ar_to_parcor(model.a);  // stability gate
  if (!(model.sigma2 > Scalar(0)))
    throw InvalidArgument("ar_to_psd: sigma2 must be positive");
  Psd<Scalar> psd;
  psd.grid = grid;
  psd.mass = model.sigma2 * all_pole_shape(model.a, grid);
  psd.normalized = std::abs(psd.mass.sum() - Scalar(1)) <= Scalar(1e-12);
  return psd;
}

/// tanh-parametrized stable model. theta = [theta_0, theta_1..theta_P];
/// kappa = tanh(theta_{1:P}). theta_0 is nominally the gain but sigma2 is
/// always recomputed so the returned PSD mass sums to target_mass.
template <typename Scalar>
struct ThetaModel {
  ArModel<Scalar> model;
  Psd<Scalar> psd;
};

template <typename Scalar>
ThetaModel<Scalar> theta_to_model(const VectorX<Scalar>& theta, Scalar target_mass,
                                  const FrequencyGrid<Scalar>& grid) {
  if (theta.size() < 1) throw InvalidArgument("theta_to_model: theta needs >= 1 entry");
  if (!theta.allFinite()) throw InvalidArgument("theta_to_model: theta must be finite");
  if (!(target_mass > Scalar(0)))
    throw InvalidArgument("theta_to_model: target_mass must be positive");
  const Index p = theta.size() - 1;
  const VectorX<Scalar> kappa = theta.tail(p).array().tanh();
  ThetaModel<Scalar> out;
  out.model.a = parcor_to_ar(kappa);
  const VectorX<Scalar> shape = all_pole_shape(out.model.a, grid);
  out.model.sigma2 = target_mass / shape.sum();
  out.psd.grid = grid;
  out.psd.mass = out.model.sigma2 * shape;
  out.psd.normalized = std::abs(target_mass - Scalar(1)) <= Scalar(1e-12);
  return out;
}

/// Levinson-Durbin solve of the order-P Yule-Walker system on
/// autocovariances r(0..P). Returns the AR coefficients and the final
/// prediction error variance as sigma2.
template <typename Scalar>
ArModel<Scalar> yule_walker(const VectorX<Scalar>& r, Index order) {
  if (r.size() < order + 1)
    throw InvalidArgument("yule_walker: need r(0..P)");
  if (!(r[0] > Scalar(0)))
    throw DegenerateInput("yule_walker: r(0) must be positive");
  ArModel<Scalar> model;
  model.a.resize(order);
  Scalar err = r[0];
  for (Index m = 1; m <= order; ++m) {
    Scalar acc = r[m];
    for (Index i = 1; i < m; ++i) acc += model.a[i - 1] * r[m - i];
    const Scalar k = -acc / err;
    if (std::abs(k) >= Scalar(1) - Scalar(1e-10))
      throw DegenerateInput("yule_walker: reflection coefficient at +/-1, system singular");
    VectorX<Scalar> prev = model.a.head(m - 1);
    model.a[m - 1] = k;
    for (Index i = 1; i < m; ++i)
      model.a[i - 1] = prev[i - 1] + k * prev[m - i - 1];
    err *= Scalar(1) - k * k;
  }
  model.sigma2 = err;
  return model;
}

/// Burg's method: minimizes forward+backward prediction error per stage.
/// Reflection magnitudes are clamped to 1 - 1e-8 so the result always
/// passes the strict stability check.
template <typename Scalar>
ArModel<Scalar> burg_estimate(const VectorX<Scalar>& signal, Index order) {
  const Index n = signal.size();
  if (n <= order)
    throw InvalidArgument("burg_estimate: signal shorter than order + 1");
  constexpr Scalar kClamp = Scalar(1) - Scalar(1e-8);
  VectorX<Scalar> f = signal, b = signal;
  ArModel<Scalar> model;
  model.a.resize(order);
  Scalar err = signal.squaredNorm() / Scalar(n);
  for (Index m = 1; m <= order; ++m) {
    Scalar num = Scalar(0), den = Scalar(0);
    for (Index t = m; t < n; ++t) {
      num += f[t] * b[t - 1];
      den += f[t] * f[t] + b[t - 1] * b[t - 1];
    }
    Scalar k = den > Scalar(0) ? Scalar(-2) * num / den : Scalar(0);
    k = std::clamp(k, -kClamp, kClamp);
    VectorX<Scalar> prev = model.a.head(m - 1);
    model.a[m - 1] = k;
    for (Index i = 1; i < m; ++i)
      model.a[i - 1] = prev[i - 1] + k * prev[m - i - 1];
    for (Index t = n - 1; t >= m; --t) {
      const Scalar fprev = f[t], bprev = b[t - 1];
      f[t] = fprev + k * bprev;
      b[t] = bprev + k * fprev;
    }
    err *= Scalar(1) - k * k;
  }
  model.sigma2 = std::max(err, std::numeric_limits<Scalar>::min());
  return model;
}

/// r(k) = sum_n mass_n cos(k w_n): the mass vector read as a discrete
/// distribution over grid frequencies.
template <typename Scalar>
VectorX<Scalar> acov_from_psd(const Psd<Scalar>& psd, Index max_lag) {
  const Index n = psd.grid.n_bins;
  if (2 * max_lag >= n)
    throw InvalidArgument("acov_from_psd: max_lag must be < n_bins/2");
  if (!(psd.mass.sum() > Scalar(0)))
    throw DegenerateInput("acov_from_psd: total mass must be positive");
  VectorX<Scalar> r(max_lag + 1);
  for (Index k = 0; k <= max_lag; ++k) {
    Scalar acc = Scalar(0);
    for (Index i = 0; i < n; ++i) acc += psd.mass[i] * std::cos(Scalar(k) * psd.grid.points[i]);
    r[k] = acc;
  }
  return r;
}

/// Seeded AR simulation x(t) = -sum_p a_p x(t-p) + e(t), e ~ N(0, sigma2),
/// with a 10*P burn-in discarded.
template <typename Scalar>
VectorX<Scalar> simulate_ar(const ArModel<Scalar>& model, Index n_samples,
                            std::uint64_t seed) {
  ar_to_parcor(model.a);  // stability gate
  if (n_samples <= 0) throw InvalidArgument("simulate_ar: n_samples must be positive");
  const Index p = model.order();
  const Index burn = 10 * p;
  std::mt19937_64 gen(seed);
  std::normal_distribution<Scalar> noise(Scalar(0), std::sqrt(model.sigma2));
  VectorX<Scalar> x(burn + n_samples);
  for (Index t = 0; t < x.size(); ++t) {
    Scalar v = noise(gen);
    for (Index i = 1; i <= std::min(p, t); ++i) v -= model.a[i - 1] * x[t - i];
    x[t] = v;
  }
  return x.tail(n_samples);
}

}  // namespace arbary
