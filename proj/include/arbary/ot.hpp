#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "arbary/common.hpp"
#include "arbary/spectral.hpp"

namespace arbary {

template <typename Scalar>
struct SinkhornConfig {
  Scalar epsilon = Scalar(0.07);
  Index max_iters = 10000;
  Scalar tol = Scalar(1e-9);  // L1 violation of the q-marginal after an f-update
};

/// Gibbs kernel kept in log domain: log_kernel = -C/epsilon. Entries of
/// exp(-C/eps) underflow double range for small eps, so the exponentiated
/// matrix is never materialized by the solver.
template <typename Scalar>
struct GibbsKernel {
  MatrixX<Scalar> log_kernel;
  Scalar epsilon = Scalar(0);
};

template <typename Scalar>
struct DualPotentials {
  VectorX<Scalar> f;
  VectorX<Scalar> g;
};

template <typename Scalar>
struct TransportPlan {
  MatrixX<Scalar> matrix;
};

template <typename Scalar>
struct EntropicResult {
  Scalar cost = Scalar(0);  // primal value of the entropic objective at the plan
  DualPotentials<Scalar> potentials;
  Index iterations = 0;
  Scalar marginal_violation = Scalar(0);
};

template <typename Scalar>
GibbsKernel<Scalar> gibbs_kernel(const GroundCost<Scalar>& cost, Scalar epsilon) {
  if (!(epsilon > Scalar(0)))
    throw InvalidArgument("gibbs_kernel: epsilon must be positive");
  return GibbsKernel<Scalar>{(-cost.matrix / epsilon).eval(), epsilon};
}

namespace detail {

/// out_i = log sum_l exp(log_kernel(i,l) + shift_l), max-stabilized.
/// log_kernel is symmetric, so columns are used for contiguous access and
/// the same routine serves both row and column updates.
template <typename Scalar>
void lse_sym_shifted(const MatrixX<Scalar>& log_kernel, const VectorX<Scalar>& shift,
                     VectorX<Scalar>& out, VectorX<Scalar>& buf) {
  const Index n = log_kernel.rows();
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < n; ++i) {
    buf = log_kernel.col(i) + shift;
    const Scalar m = buf.maxCoeff();
    out[i] = (m == kNegInf) ? kNegInf : m + std::log((buf.array() - m).exp().sum());
  }
}

template <typename Scalar>
VectorX<Scalar> safe_log(const VectorX<Scalar>& v) {
  return v.array().log().matrix();
}

/// Primal entropic objective at the plan exp(phi_i + psi_l + log_kernel):
/// each term collapses to eps * plan * (phi_i + psi_l - 1), with empty
/// (-inf) entries contributing zero.
template <typename Scalar>
Scalar primal_cost(const MatrixX<Scalar>& log_kernel, Scalar epsilon,
                   const VectorX<Scalar>& phi, const VectorX<Scalar>& psi) {
  const Index n = log_kernel.rows();
  Scalar acc = Scalar(0);
  constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();
  for (Index l = 0; l < n; ++l) {
    for (Index i = 0; i < n; ++i) {
      const Scalar lp = phi[i] + psi[l] + log_kernel(i, l);
      if (lp > kNegInf) acc += std::exp(lp) * (phi[i] + psi[l] - Scalar(1));
    }
  }
  return epsilon * acc;
}

template <typename Scalar>
void check_normalized(const Psd<Scalar>& psd, const char* who) {
  if (std::abs(psd.mass.sum() - Scalar(1)) > Scalar(1e-9))
    throw InvalidArgument(std::string(who) + ": input PSD must be normalized");
}

}  // namespace detail

/// Log-domain Sinkhorn between two normalized PSDs. Alternates
///   phi <- log p - LSE(log_kernel + psi),  psi <- log q - LSE(log_kernel + phi)
/// (phi = f/eps, psi = g/eps) and stops when the L1 violation of the
/// q-marginal, measured right after the phi-update, drops below tol.
/// `warm`, when non-null, carries scaled potentials in and out.
template <typename Scalar>
EntropicResult<Scalar> sinkhorn_kernel(const Psd<Scalar>& p, const Psd<Scalar>& q,
                                       const GibbsKernel<Scalar>& kernel,
                                       const SinkhornConfig<Scalar>& config,
                                       DualPotentials<Scalar>* warm = nullptr) {
  detail::check_normalized(p, "sinkhorn");
  detail::check_normalized(q, "sinkhorn");
  const Index n = kernel.log_kernel.rows();
  if (p.grid.n_bins != n || q.grid.n_bins != n)
    throw InvalidArgument("sinkhorn: PSD grid does not match kernel");
  const Scalar eps = kernel.epsilon;

  const VectorX<Scalar> log_p = detail::safe_log(p.mass);
  const VectorX<Scalar> log_q = detail::safe_log(q.mass);
  VectorX<Scalar> phi = VectorX<Scalar>::Zero(n);
  VectorX<Scalar> psi = VectorX<Scalar>::Zero(n);
  if (warm && warm->f.size() == n && warm->g.size() == n) {
    phi = warm->f / eps;
    psi = warm->g / eps;
  }

  VectorX<Scalar> lse(n), buf(n);
  Scalar violation = std::numeric_limits<Scalar>::infinity();
  Index it = 0;
  bool converged = false;
  while (it < config.max_iters) {
    ++it;
    detail::lse_sym_shifted(kernel.log_kernel, psi, lse, buf);
    phi = log_p - lse;  // p-marginal now exact
    detail::lse_sym_shifted(kernel.log_kernel, phi, lse, buf);
    violation = ((lse + psi).array().exp() - q.mass.array()).abs().sum();
    if (violation <= config.tol) {
      converged = true;
      break;
    }
    psi = log_q - lse;
  }
  if (!converged)
    throw ConvergenceFailure("sinkhorn: marginal violation " + std::to_string(violation) +
                                 " after " + std::to_string(it) + " iterations",
                             double(violation));

  EntropicResult<Scalar> result;
  result.cost = detail::primal_cost(kernel.log_kernel, eps, phi, psi);
  result.potentials.f = eps * phi;
  result.potentials.g = eps * psi;
  result.iterations = it;
  result.marginal_violation = violation;
  if (warm) *warm = result.potentials;
  return result;
}

template <typename Scalar>
EntropicResult<Scalar> sinkhorn(const Psd<Scalar>& p, const Psd<Scalar>& q,
                                const GroundCost<Scalar>& cost,
                                const SinkhornConfig<Scalar>& config) {
  if (!(p.grid == cost.grid) || !(q.grid == cost.grid))
    throw InvalidArgument("sinkhorn: PSD grid does not match cost");
  return sinkhorn_kernel(p, q, gibbs_kernel(cost, config.epsilon), config);
}

/// Materialize the coupling diag(u) K diag(v); intended for small N.
template <typename Scalar>
TransportPlan<Scalar> recover_plan(const EntropicResult<Scalar>& result,
                                   const GibbsKernel<Scalar>& kernel) {
  const VectorX<Scalar> phi = result.potentials.f / kernel.epsilon;
  const VectorX<Scalar> psi = result.potentials.g / kernel.epsilon;
  TransportPlan<Scalar> plan;
  plan.matrix = ((kernel.log_kernel.colwise() + phi).rowwise() + psi.transpose())
                    .array()
                    .exp()
                    .matrix();
  return plan;
}

/// Zero-sum representative of the gradient of the entropic cost with
/// respect to the first marginal.
template <typename Scalar>
VectorX<Scalar> marginal_gradient(const EntropicResult<Scalar>& result) {
  const VectorX<Scalar>& f = result.potentials.f;
  return f.array() - f.mean();
}

template <typename Scalar>
struct BarycenterObjective {
  Scalar value = Scalar(0);
  VectorX<Scalar> gradient;  // (1/K) sum of centered potentials, zero-sum
};

/// Average entropic cost from `center` to every member of `set`, with its
/// gradient in the center marginal. `bank`, when non-null, holds per-k warm
/// potentials (resized on first use).
template <typename Scalar>
BarycenterObjective<Scalar> barycenter_objective_kernel(
    const Psd<Scalar>& center, const std::vector<Psd<Scalar>>& set,
    const GibbsKernel<Scalar>& kernel, const SinkhornConfig<Scalar>& config,
    std::vector<DualPotentials<Scalar>>* bank = nullptr) {
  if (set.empty()) throw InvalidArgument("barycenter_objective: empty set");
  if (bank && bank->size() != set.size()) bank->resize(set.size());
  BarycenterObjective<Scalar> out;
  out.gradient = VectorX<Scalar>::Zero(center.grid.n_bins);
  for (std::size_t k = 0; k < set.size(); ++k) {
    EntropicResult<Scalar> res;
    try {
      res = sinkhorn_kernel(center, set[k], kernel, config, bank ? &(*bank)[k] : nullptr);
    } catch (const ConvergenceFailure& e) {
      throw ConvergenceFailure("barycenter_objective: target " + std::to_string(k) + ": " +
                                   e.what(),
                               e.violation());
    }
    out.value += res.cost;
    out.gradient += marginal_gradient(res);
  }
  const Scalar k_inv = Scalar(1) / Scalar(set.size());
  out.value *= k_inv;
  out.gradient *= k_inv;
  return out;
}

template <typename Scalar>
BarycenterObjective<Scalar> barycenter_objective(const Psd<Scalar>& center,
                                                 const std::vector<Psd<Scalar>>& set,
                                                 const GroundCost<Scalar>& cost,
                                                 const SinkhornConfig<Scalar>& config) {
  return barycenter_objective_kernel(center, set, gibbs_kernel(cost, config.epsilon), config);
}

/// Nonparametric entropic barycenter via iterative Bregman projections with
/// the geometric-mean shared-marginal update. Stops when every coupling's
/// row marginal agrees with the shared marginal within tol/2 in L1 (hence
/// pairwise within tol) while column marginals are exact by construction.
template <typename Scalar>
Psd<Scalar> free_barycenter(const std::vector<Psd<Scalar>>& set, const GroundCost<Scalar>& cost,
                            const SinkhornConfig<Scalar>& config) {
  if (set.empty()) throw InvalidArgument("free_barycenter: empty set");
  const Index n = cost.grid.n_bins;
  const std::size_t k_count = set.size();
  std::vector<VectorX<Scalar>> log_q(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    detail::check_normalized(set[k], "free_barycenter");
    if (!(set[k].grid == cost.grid))
      throw InvalidArgument("free_barycenter: PSD grid does not match cost");
    log_q[k] = detail::safe_log(set[k].mass);
  }
  const GibbsKernel<Scalar> kernel = gibbs_kernel(cost, config.epsilon);

  std::vector<VectorX<Scalar>> phi(k_count, VectorX<Scalar>::Zero(n));
  std::vector<VectorX<Scalar>> psi(k_count, VectorX<Scalar>::Zero(n));
  std::vector<VectorX<Scalar>> log_row(k_count, VectorX<Scalar>::Zero(n));
  VectorX<Scalar> lse(n), buf(n), log_bc(n);
  Scalar worst = std::numeric_limits<Scalar>::infinity();
  for (Index it = 0; it < config.max_iters; ++it) {
    // Column projections: each coupling matches its target marginal.
    for (std::size_t k = 0; k < k_count; ++k) {
      detail::lse_sym_shifted(kernel.log_kernel, phi[k], lse, buf);
      psi[k] = log_q[k] - lse;
    }
    // Row marginals and their geometric mean.
    log_bc.setZero();
    for (std::size_t k = 0; k < k_count; ++k) {
      detail::lse_sym_shifted(kernel.log_kernel, psi[k], lse, buf);
      log_row[k] = phi[k] + lse;
      log_bc += log_row[k];
    }
    log_bc /= Scalar(k_count);
    worst = Scalar(0);
    for (std::size_t k = 0; k < k_count; ++k)
      worst = std::max(worst,
                       (log_row[k].array().exp() - log_bc.array().exp()).abs().sum());
    if (worst <= config.tol / Scalar(2)) {
      Psd<Scalar> bc;
      bc.grid = cost.grid;
      bc.mass = log_bc.array().exp();
      return normalize(bc);
    }
    // Row projections onto the shared marginal.
    for (std::size_t k = 0; k < k_count; ++k) phi[k] += log_bc - log_row[k];
  }
  throw ConvergenceFailure("free_barycenter: worst marginal disagreement " +
                               std::to_string(worst),
                           double(worst));
}

/// Independent desk-scale oracle for the entropic cost: exact cyclic
/// minimization over 2x2 transport cycles of the coupling polytope,
/// starting from the independent coupling p q^T. Shares no code with the
/// Sinkhorn path. Stops when the largest cycle derivative
/// |dC + eps log(ad/bc)| falls below 1e-10.
template <typename Scalar>
Scalar brute_force_entropic(const Psd<Scalar>& p, const Psd<Scalar>& q,
                            const GroundCost<Scalar>& cost, Scalar epsilon) {
  const Index n = cost.grid.n_bins;
  if (n > 8) throw InvalidArgument("brute_force_entropic: oracle limited to N <= 8");
  if (!(epsilon > Scalar(0)))
    throw InvalidArgument("brute_force_entropic: epsilon must be positive");
  detail::check_normalized(p, "brute_force_entropic");
  detail::check_normalized(q, "brute_force_entropic");
  const MatrixX<Scalar>& c = cost.matrix;
  MatrixX<Scalar> plan = p.mass * q.mass.transpose();

  constexpr Scalar kStationary = Scalar(1e-10);
  const Index max_sweeps = 200000;
  Scalar worst = std::numeric_limits<Scalar>::infinity();
  for (Index sweep = 0; sweep < max_sweeps && worst > kStationary; ++sweep) {
    worst = Scalar(0);
    for (Index i = 0; i < n; ++i) {
      for (Index i2 = i + 1; i2 < n; ++i2) {
        for (Index j = 0; j < n; ++j) {
          for (Index j2 = j + 1; j2 < n; ++j2) {
            // Move t along the cycle: +t at (i,j),(i2,j2), -t at (i,j2),(i2,j).
            const Scalar a = plan(i, j), b = plan(i2, j2);
            const Scalar cc = plan(i, j2), d = plan(i2, j);
            const Scalar lo = -std::min(a, b), hi = std::min(cc, d);
            if (hi - lo <= Scalar(0)) continue;
            const Scalar dcost = c(i, j) + c(i2, j2) - c(i, j2) - c(i2, j);
            const Scalar margin =
                Scalar(1e-16) * (hi - lo) + std::numeric_limits<Scalar>::denorm_min();
            // h(t) = dcost/eps + log((a+t)(b+t)) - log((c-t)(d-t)), increasing.
            const auto h = [&](Scalar t) {
              return dcost / epsilon + std::log(a + t) + std::log(b + t) -
                     std::log(cc - t) - std::log(d - t);
            };
            const Scalar h0 = h(Scalar(0));
            if (a > Scalar(0) && b > Scalar(0) && cc > Scalar(0) && d > Scalar(0))
              worst = std::max(worst, std::abs(h0) * epsilon);
            if (std::abs(h0) * epsilon <= kStationary / Scalar(4)) continue;
            // Bracket the root between 0 and the blocking endpoint.
            Scalar tlo, thi;
            if (std::isfinite(h0) && h0 > Scalar(0)) {
              tlo = lo + margin;
              thi = Scalar(0);
              if (!(h(tlo) < Scalar(0))) {  // root crowded against the endpoint
                plan(i, j) = a + tlo;
                plan(i2, j2) = b + tlo;
                plan(i, j2) = cc - tlo;
                plan(i2, j) = d - tlo;
                continue;
              }
            } else {
              tlo = Scalar(0);
              thi = hi - margin;
              if (!(h(thi) > Scalar(0))) {
                plan(i, j) = a + thi;
                plan(i2, j2) = b + thi;
                plan(i, j2) = cc - thi;
                plan(i2, j) = d - thi;
                continue;
              }
            }
            // Safeguarded Newton on h.
            Scalar t = (tlo + thi) / Scalar(2);
            for (int iter = 0; iter < 200; ++iter) {
              const Scalar ht = h(t);
              if (std::abs(ht) <= Scalar(1e-13)) break;
              if (ht > Scalar(0))
                thi = t;
              else
                tlo = t;
              const Scalar slope = Scalar(1) / (a + t) + Scalar(1) / (b + t) +
                                   Scalar(1) / (cc - t) + Scalar(1) / (d - t);
              Scalar t_next = t - ht / slope;
              if (!(t_next > tlo && t_next < thi)) t_next = (tlo + thi) / Scalar(2);
              if (thi - tlo <= Scalar(4) * std::numeric_limits<Scalar>::epsilon() *
                                   (std::abs(t) + Scalar(1e-30)))
                break;
              t = t_next;
            }
            plan(i, j) = a + t;
            plan(i2, j2) = b + t;
            plan(i, j2) = cc - t;
            plan(i2, j) = d - t;
          }
        }
      }
    }
  }
  if (worst > kStationary)
    throw ConvergenceFailure("brute_force_entropic: stationarity " + std::to_string(worst),
                             double(worst));

  Scalar value = Scalar(0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const Scalar m = plan(i, j);
      if (m > Scalar(0)) value += m * (c(i, j) + epsilon * (std::log(m) - Scalar(1)));
    }
  return value;
}

}  // namespace arbary
