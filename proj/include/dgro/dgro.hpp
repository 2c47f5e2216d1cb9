#pragma once

/**
 * The decoupled group-reward objective, its gradient estimators, and the
 * online training loop.
 *
 * Per-sample loss gradient (the quantity descended each step):
 *
 *   -(1/G) sum_i [ beta1 * (r_i - rbar) * grad log pi(y_i)
 *                  - beta2 * grad (log pi(y_i)/pi_old(y_i))^2 ]
 *
 * with the squared-log-ratio gradient expanded as 2 * log_ratio * grad log pi.
 * The exact counterpart replaces the group average with full-enumeration
 * expectations under the snapshot policy and serves as the unbiasedness
 * oracle for the estimator.
 *
 * The loop is online policy mirror descent: sample a prompt batch, roll out G
 * responses per prompt from the snapshot, score, step theta by plain SGD, and
 * refresh the snapshot. The snapshot refresh cadence is configurable through
 * updates_per_snapshot (default 1, one update per refresh); with the default
 * cadence the policy equals the snapshot at estimation time, so the log-ratio
 * penalty contributes exactly zero and is reported as such.
 */

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dgro/linalg.hpp"
#include "dgro/policy.hpp"
#include "dgro/reward.hpp"
#include "dgro/tasks.hpp"

namespace dgro {

struct DGROConfig {
  Scalar beta1 = 1.0;  // policy-gradient coefficient, must be > 0
  Scalar beta2 = 0.1;  // policy-distance coefficient, >= 0
  int G = 8;           // rollouts per prompt, >= 2
  Scalar lr = 0.5;
  int steps = 1000;
  int batch_prompts = 64;  // clamped to the train split size
  Scalar eta_cap = 5.0;    // |log ratio| monitor threshold
  int updates_per_snapshot = 1;
  bool clip_log_ratio = false;  // clamp the ratio term to +-eta_cap
  int eval_every = 50;
  std::string algo = "dgro";  // "dgro" or "grpo_lite"
  Scalar eps_std = 1e-4;      // grpo_lite std-normalization floor
  Scalar init_scale = 0.0;    // stddev of initial logit noise
};

/// Throws ConfigError on invalid settings (beta1 <= 0, G < 2, lr < 0, ...).
/// lr = 0 is allowed: it freezes theta, which several determinism checks use.
void validate_config(const DGROConfig& cfg);

/// One group's contribution to the loss gradient, with the two Theorem-style
/// components kept separate: grad = -pg_part + normaliser_part.
struct GroupGradient {
  Mat grad;
  Mat pg_part;          // (1/G) sum beta1 *(r_i - baseline) * grad log pi
  Mat normaliser_part;  // (1/G) sum 2 beta2 * log_ratio * grad log pi
  Scalar max_abs_log_ratio = 0.0;
};

/// Sample estimate of the loss gradient for one scored group. The baseline
/// defaults to the in-group mean; passing `baseline` overrides it (used by
/// the unbiasedness checks, which inject the exact mean). Throws NumericError
/// if a log-ratio is non-finite.
GroupGradient gradient_estimate(const policy::PolicyParams& params,
                                const policy::PolicyParams& old_params,
                                const policy::Group& group,
                                const DGROConfig& cfg,
                                std::optional<Scalar> baseline = {});

/// Exact expectations under the snapshot policy for one prompt.
struct ExactComponents {
  Mat pg;          // E[beta1 (r - rbar) grad log pi_theta]
  Mat normaliser;  // E[beta2 grad (log ratio)^2]
  Scalar r_bar = 0.0;
  Scalar variance = 0.0;
  Scalar eta = 0.0;  // max over the response space of |log ratio|

  Mat gradient() const { return -pg + normaliser; }
};

/// Full-enumeration expectation with an arbitrary reward function; rbar and
/// the variance come from the aggregated reward distribution, so a constant
/// reward yields exactly zero advantages.
ExactComponents exact_components(
    const policy::PolicyParams& params, const policy::PolicyParams& old_params,
    int prompt, const std::function<Scalar(const policy::Response&)>& reward_fn,
    Scalar beta1, Scalar beta2, std::int64_t cap = 1'000'000);

/// Exact loss gradient for one task instance (reward = verify then score).
Mat exact_gradient(const policy::PolicyParams& params,
                   const policy::PolicyParams& old_params,
                   const tasks::TaskInstance& task,
                   const reward::RewardSpec& spec, const DGROConfig& cfg,
                   std::int64_t cap = 1'000'000);

struct StepReport {
  int step = 0;
  Scalar grad_norm = 0.0;
  Scalar pg_norm = 0.0;
  Scalar normaliser_norm = 0.0;
  Scalar max_abs_log_ratio = 0.0;
  Scalar mean_reward = 0.0;
  Scalar entropy = 0.0;
  Scalar mean_response_length = 0.0;
};

struct EvalPoint {
  int step = 0;
  Scalar train = 0.0;
  Scalar holdout = 0.0;
  Scalar ood = 0.0;
};

struct TrainResult {
  std::vector<StepReport> reports;
  std::vector<EvalPoint> evals;
  policy::PolicyParams final_params;
  Scalar initial_reward_variance = 0.0;  // mean over train prompts
  int eta_flag_count = 0;                // steps with max |log ratio| > cap
  bool diverged = false;
  int divergence_step = -1;
};

/// Runs the training loop. Validation is greedy-decode exact match: the
/// primary accuracy is measured on the train prompts (tabular parameters do
/// not generalize across prompts); the disjoint holdout and OOD splits are
/// evaluated and reported alongside. When out_dir is nonempty, writes
/// metrics.csv, eval.csv, run.json, and checkpoint.bin there. On divergence
/// (non-finite theta) the run aborts with a diagnostic in run.json.
TrainResult train(const DGROConfig& cfg, const tasks::TaskSuite& suite,
                  const reward::RewardSpec& spec, std::uint64_t seed,
                  const std::filesystem::path& out_dir = {});

/// Fraction of the given prompts whose greedy decode earns (+1, +1, +1).
Scalar greedy_accuracy(const policy::PolicyParams& params,
                       const std::vector<tasks::TaskInstance>& prompts);

}  // namespace dgro
