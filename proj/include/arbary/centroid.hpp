#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "arbary/ar.hpp"
#include "arbary/common.hpp"
#include "arbary/ot.hpp"
#include "arbary/spectral.hpp"

namespace arbary {

template <typename Scalar>
struct OptimizerConfig {
  Index model_order = 10;
  SinkhornConfig<Scalar> sinkhorn;
  Index max_outer_iters = 500;
  Scalar armijo_c1 = Scalar(1e-4);
  Scalar armijo_shrink = Scalar(0.5);
  Scalar step_init = Scalar(1);
  Scalar grad_tol = Scalar(1e-6);
  Scalar jacobian_fd_step = Scalar(1e-6);
};

enum class InitKind { YuleWalker, PerturbedYuleWalker, ParcorRandom, GaussianTheta, WarmStart };

struct InitStrategy {
  InitKind kind = InitKind::YuleWalker;
  double scale = 0.0;
  std::uint64_t seed = 0;
};

inline const char* init_kind_name(InitKind kind) {
  switch (kind) {
    case InitKind::YuleWalker: return "yule_walker";
    case InitKind::PerturbedYuleWalker: return "perturbed_yule_walker";
    case InitKind::ParcorRandom: return "parcor_random";
    case InitKind::GaussianTheta: return "gaussian_theta";
    case InitKind::WarmStart: return "warm_start";
  }
  return "unknown";
}

template <typename Scalar>
struct TracePoint {
  Index iter = 0;
  Scalar objective = Scalar(0);
  Scalar grad_norm = Scalar(0);
  Scalar step = Scalar(0);
};

template <typename Scalar>
struct FitResult {
  VectorX<Scalar> theta;
  ArModel<Scalar> model;
  Psd<Scalar> psd;
  Scalar objective = Scalar(0);
  std::vector<TracePoint<Scalar>> trace;
  InitStrategy init;
  bool stalled = false;
  Index stability_checks = 0;  // iterates that passed the step-down gate
};

template <typename Scalar>
struct MultiStartReport {
  std::vector<FitResult<Scalar>> runs;
  std::vector<std::string> failures;
  Index best = 0;
  Scalar free_barycenter_objective = Scalar(0);
  Scalar suboptimality_gap = Scalar(0);
};

/// Default multi-start portfolio; counts and scales are artifact defaults,
/// seeds fan out from root_seed.
struct MultiStartPlan {
  Index n_perturbed_yw = 3;
  double perturbed_scale = 0.2;
  Index n_parcor = 3;
  double parcor_scale = 0.7;
  Index n_gaussian = 3;
  double gaussian_scale = 0.5;
  bool include_yw = true;
  std::uint64_t root_seed = 1;

  std::vector<InitStrategy> build() const {
    std::vector<InitStrategy> out;
    std::uint64_t stream = 0;
    if (include_yw) out.push_back({InitKind::YuleWalker, 0.0, 0});
    for (Index i = 0; i < n_perturbed_yw; ++i)
      out.push_back({InitKind::PerturbedYuleWalker, perturbed_scale, mix_seed(root_seed, stream++)});
    for (Index i = 0; i < n_parcor; ++i)
      out.push_back({InitKind::ParcorRandom, parcor_scale, mix_seed(root_seed, stream++)});
    for (Index i = 0; i < n_gaussian; ++i)
      out.push_back({InitKind::GaussianTheta, gaussian_scale, mix_seed(root_seed, stream++)});
    return out;
  }
};

/// Yule-Walker theta from an already-computed barycenter PSD: inverse-DFT
/// autocovariances, Levinson-Durbin solve, step-down to kappa, arctanh.
template <typename Scalar>
VectorX<Scalar> yw_theta_from_psd(const Psd<Scalar>& barycenter, Index order) {
  const VectorX<Scalar> r = acov_from_psd(barycenter, order);
  const ArModel<Scalar> model = yule_walker(r, order);
  VectorX<Scalar> kappa = ar_to_parcor(model.a);
  constexpr Scalar kClamp = Scalar(1) - Scalar(1e-6);
  VectorX<Scalar> theta = VectorX<Scalar>::Zero(order + 1);
  for (Index p = 0; p < order; ++p)
    theta[p + 1] = std::atanh(std::clamp(kappa[p], -kClamp, kClamp));
  return theta;
}

template <typename Scalar>
VectorX<Scalar> yw_initialize(const std::vector<Psd<Scalar>>& set, Index order,
                              const GroundCost<Scalar>& cost,
                              const SinkhornConfig<Scalar>& config) {
  return yw_theta_from_psd(free_barycenter(set, cost, config), order);
}

template <typename Scalar>
struct ThetaObjective {
  Scalar value = Scalar(0);
  VectorX<Scalar> gradient;       // over theta, entry 0 always zero
  VectorX<Scalar> center_gradient;  // h-tilde: gradient in the PSD marginal
  ThetaModel<Scalar> point;
};

/// J(theta) and its chain-rule gradient J^T h-tilde. The PSD Jacobian is
/// taken by central differences through tanh -> Levinson -> PSD -> mass
/// scaling; h-tilde is frozen at the converged Sinkhorn potentials.
template <typename Scalar>
ThetaObjective<Scalar> objective_and_gradient_kernel(
    const VectorX<Scalar>& theta, const std::vector<Psd<Scalar>>& set,
    const FrequencyGrid<Scalar>& grid, const GibbsKernel<Scalar>& kernel,
    const OptimizerConfig<Scalar>& config,
    std::vector<DualPotentials<Scalar>>* bank = nullptr) {
  ThetaObjective<Scalar> out;
  out.point = theta_to_model(theta, Scalar(1), grid);
  const auto obj =
      barycenter_objective_kernel(out.point.psd, set, kernel, config.sinkhorn, bank);
  out.value = obj.value;
  out.center_gradient = obj.gradient;
  const Index p = theta.size() - 1;
  out.gradient = VectorX<Scalar>::Zero(p + 1);
  const Scalar h = config.jacobian_fd_step;
  VectorX<Scalar> probe = theta;
  for (Index j = 1; j <= p; ++j) {
    probe[j] = theta[j] + h;
    const VectorX<Scalar> plus = theta_to_model(probe, Scalar(1), grid).psd.mass;
    probe[j] = theta[j] - h;
    const VectorX<Scalar> minus = theta_to_model(probe, Scalar(1), grid).psd.mass;
    probe[j] = theta[j];
    out.gradient[j] = ((plus - minus) / (Scalar(2) * h)).dot(obj.gradient);
  }
  return out;
}

template <typename Scalar>
ThetaObjective<Scalar> objective_and_gradient(const VectorX<Scalar>& theta,
                                              const std::vector<Psd<Scalar>>& set,
                                              const GroundCost<Scalar>& cost,
                                              const OptimizerConfig<Scalar>& config) {
  return objective_and_gradient_kernel(theta, set, cost.grid,
                                       gibbs_kernel(cost, config.sinkhorn.epsilon), config);
}

/// Gradient descent with Armijo backtracking in theta space. Every iterate
/// is a stable model by the tanh parametrization; the step-down check is
/// still run on each one and counted.
template <typename Scalar>
FitResult<Scalar> fit_kernel(const VectorX<Scalar>& theta0, const std::vector<Psd<Scalar>>& set,
                             const FrequencyGrid<Scalar>& grid, const GibbsKernel<Scalar>& kernel,
                             const OptimizerConfig<Scalar>& config,
                             const InitStrategy& init = {}) {
  FitResult<Scalar> result;
  result.init = init;
  std::vector<DualPotentials<Scalar>> bank;
  VectorX<Scalar> theta = theta0;
  ThetaObjective<Scalar> eval =
      objective_and_gradient_kernel(theta, set, grid, kernel, config, &bank);
  Scalar last_step = Scalar(0);
  for (Index iter = 0;; ++iter) {
    ar_to_parcor(eval.point.model.a);  // stability gate on every iterate
    ++result.stability_checks;
    const Scalar grad_norm = eval.gradient.norm();
    result.trace.push_back({iter, eval.value, grad_norm, last_step});
    if (grad_norm <= config.grad_tol || iter >= config.max_outer_iters) break;

    bool accepted = false;
    Scalar step = config.step_init;
    for (int backtrack = 0; backtrack < 50; ++backtrack) {
      const VectorX<Scalar> trial_theta = theta - step * eval.gradient;
      ThetaObjective<Scalar> trial =
          objective_and_gradient_kernel(trial_theta, set, grid, kernel, config, &bank);
      if (trial.value <= eval.value - config.armijo_c1 * step * grad_norm * grad_norm) {
        theta = trial_theta;
        eval = std::move(trial);
        last_step = step;
        accepted = true;
        break;
      }
      step *= config.armijo_shrink;
    }
    if (!accepted) {
      result.stalled = true;
      break;
    }
  }
  result.theta = theta;
  result.model = eval.point.model;
  result.psd = eval.point.psd;
  result.objective = eval.value;
  return result;
}

template <typename Scalar>
FitResult<Scalar> fit(const VectorX<Scalar>& theta0, const std::vector<Psd<Scalar>>& set,
                      const GroundCost<Scalar>& cost, const OptimizerConfig<Scalar>& config,
                      const InitStrategy& init = {}) {
  return fit_kernel(theta0, set, cost.grid, gibbs_kernel(cost, config.sinkhorn.epsilon),
                    config, init);
}

template <typename Scalar>
VectorX<Scalar> initial_theta(const InitStrategy& strategy, const VectorX<Scalar>& yw_theta,
                              Index order) {
  std::mt19937_64 gen(strategy.seed);
  VectorX<Scalar> theta = VectorX<Scalar>::Zero(order + 1);
  switch (strategy.kind) {
    case InitKind::YuleWalker:
    case InitKind::WarmStart:
      theta = yw_theta;
      break;
    case InitKind::PerturbedYuleWalker: {
      std::normal_distribution<Scalar> noise(Scalar(0), Scalar(strategy.scale));
      theta = yw_theta;
      for (Index p = 1; p <= order; ++p) theta[p] += noise(gen);
      break;
    }
    case InitKind::ParcorRandom: {
      std::uniform_real_distribution<Scalar> u(-Scalar(strategy.scale), Scalar(strategy.scale));
      for (Index p = 1; p <= order; ++p) theta[p] = std::atanh(u(gen));
      break;
    }
    case InitKind::GaussianTheta: {
      std::normal_distribution<Scalar> noise(Scalar(0), Scalar(strategy.scale));
      for (Index p = 1; p <= order; ++p) theta[p] = noise(gen);
      break;
    }
  }
  return theta;
}

namespace detail {

template <typename Scalar>
MultiStartReport<Scalar> multi_start_fit_impl(const std::vector<Psd<Scalar>>& set,
                                              const std::vector<InitStrategy>& strategies,
                                              const GroundCost<Scalar>& cost,
                                              const OptimizerConfig<Scalar>& config,
                                              const Psd<Scalar>& barycenter,
                                              Scalar free_objective) {
  if (strategies.empty()) throw InvalidArgument("multi_start_fit: no strategies");
  const GibbsKernel<Scalar> kernel = gibbs_kernel(cost, config.sinkhorn.epsilon);
  const Index order = config.model_order;
  std::optional<VectorX<Scalar>> yw_theta;
  MultiStartReport<Scalar> report;
  report.free_barycenter_objective = free_objective;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    const InitStrategy& strategy = strategies[s];
    try {
      const bool needs_yw = strategy.kind == InitKind::YuleWalker ||
                            strategy.kind == InitKind::PerturbedYuleWalker ||
                            strategy.kind == InitKind::WarmStart;
      if (needs_yw && !yw_theta) yw_theta = yw_theta_from_psd(barycenter, order);
      const VectorX<Scalar> theta0 =
          initial_theta(strategy, needs_yw ? *yw_theta : VectorX<Scalar>(), order);
      report.runs.push_back(fit_kernel(theta0, set, cost.grid, kernel, config, strategy));
    } catch (const std::exception& e) {
      report.failures.push_back(std::string(init_kind_name(strategy.kind)) + "[" +
                                std::to_string(s) + "]: " + e.what());
    }
  }
  if (report.runs.empty()) {
    std::string all = "multi_start_fit: every run failed:";
    for (const auto& f : report.failures) all += "\n  " + f;
    throw ConvergenceFailure(all, 0.0);
  }
  report.best = 0;
  for (std::size_t i = 1; i < report.runs.size(); ++i)
    if (report.runs[i].objective < report.runs[report.best].objective)
      report.best = Index(i);
  report.suboptimality_gap = report.runs[report.best].objective - free_objective;
  return report;
}

}  // namespace detail

template <typename Scalar>
MultiStartReport<Scalar> multi_start_fit(const std::vector<Psd<Scalar>>& set,
                                         const std::vector<InitStrategy>& strategies,
                                         const GroundCost<Scalar>& cost,
                                         const OptimizerConfig<Scalar>& config) {
  const Psd<Scalar> barycenter = free_barycenter(set, cost, config.sinkhorn);
  const Scalar free_objective =
      barycenter_objective(barycenter, set, cost, config.sinkhorn).value;
  return detail::multi_start_fit_impl(set, strategies, cost, config, barycenter,
                                      free_objective);
}

template <typename Scalar>
struct OrderSweepRow {
  Index order = 0;
  Scalar cost_otbc = Scalar(0);
  Scalar cost_ywinit = Scalar(0);
  Scalar cost_otp = Scalar(0);
};

/// Cost-versus-order data: the free-barycenter objective (constant), the
/// objective at the Yule-Walker point, and the best OT-P objective per
/// order. The previous order's best theta, zero-padded, is chained in as an
/// extra start so cost_otp is non-increasing in the order.
template <typename Scalar>
std::vector<OrderSweepRow<Scalar>> order_sweep(const std::vector<Psd<Scalar>>& set,
                                               const std::vector<Index>& orders,
                                               const GroundCost<Scalar>& cost,
                                               const OptimizerConfig<Scalar>& config,
                                               const MultiStartPlan& plan) {
  if (orders.empty()) throw InvalidArgument("order_sweep: no orders");
  const GibbsKernel<Scalar> kernel = gibbs_kernel(cost, config.sinkhorn.epsilon);
  const Psd<Scalar> barycenter = free_barycenter(set, cost, config.sinkhorn);
  const Scalar free_objective =
      barycenter_objective_kernel(barycenter, set, kernel, config.sinkhorn).value;

  std::vector<OrderSweepRow<Scalar>> rows;
  std::optional<VectorX<Scalar>> chained;
  for (const Index order : orders) {
    OptimizerConfig<Scalar> order_config = config;
    order_config.model_order = order;
    const VectorX<Scalar> yw_theta = yw_theta_from_psd(barycenter, order);
    const Scalar yw_value =
        objective_and_gradient_kernel(yw_theta, set, cost.grid, kernel, order_config).value;
    MultiStartPlan order_plan = plan;
    order_plan.root_seed = mix_seed(plan.root_seed, std::uint64_t(order));
    MultiStartReport<Scalar> report = detail::multi_start_fit_impl(
        set, order_plan.build(), cost, order_config, barycenter, free_objective);
    Scalar best = report.runs[report.best].objective;
    if (chained && chained->size() <= order + 1) {
      VectorX<Scalar> warm = VectorX<Scalar>::Zero(order + 1);
      warm.head(chained->size()) = *chained;
      const FitResult<Scalar> chained_run = fit_kernel(
          warm, set, cost.grid, kernel, order_config, {InitKind::WarmStart, 0.0, 0});
      if (chained_run.objective < best) {
        best = chained_run.objective;
        chained = chained_run.theta;
      } else {
        chained = report.runs[report.best].theta;
      }
    } else {
      chained = report.runs[report.best].theta;
    }
    rows.push_back({order, free_objective, yw_value, best});
  }
  return rows;
}

}  // namespace arbary
