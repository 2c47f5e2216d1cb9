#pragma once

/**
 * Rule-based composite rewards and exact reward-distribution statistics.
 *
 * A reward is the weighted sum c_f*r_f + c_corr*r_corr + c_com*r_com over the
 * verdict triple, so its range is [-(c_f+c_corr+c_com), +(c_f+c_corr+c_com)].
 * Three builtin schemes set that range to [-1,1], [-3,3], and [-5,5].
 */

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dgro/linalg.hpp"
#include "dgro/policy.hpp"
#include "dgro/tasks.hpp"

namespace dgro::reward {

struct RewardSpec {
  Scalar c_f = 1.0;
  Scalar c_corr = 1.75;
  Scalar c_com = 0.25;
  std::string scheme_name;

  /// Bound on |r|; also Theorem-style r_max input for the gradient bounds.
  Scalar r_max() const { return c_f + c_corr + c_com; }
};

/// Throws ConfigError unless weights are nonnegative with positive sum.
void validate_spec(const RewardSpec& spec);

Scalar score(const RewardSpec& spec, const tasks::VerdictTriple& verdict);

/// narrow -> (0.4, 0.5, 0.1); medium -> (1.0, 1.75, 0.25);
/// wide -> (2.0, 2.5, 0.5). Throws ConfigError on unknown names.
RewardSpec builtin_scheme(std::string_view name);

/// Finite reward distribution: support values with probabilities, plus the
/// derived statistics the soft-value analysis needs.
struct RewardDistribution {
  std::vector<std::pair<Scalar, Scalar>> support;  // (value, probability)
  Scalar r_bar = 0.0;
  Scalar variance = 0.0;
  Scalar m = 0.0;       // supremum of the support
  Scalar p_star = 0.0;  // probability mass at the supremum
  Scalar min_value = 0.0;

  Scalar range() const { return m - min_value; }
};

/// Aggregates raw (value, probability) pairs into a distribution. Values are
/// keyed after rounding to 12 decimals (composite weights are exact decimals)
/// and the moments are computed from the aggregated support; a single-point
/// support yields r_bar = m exactly and variance identically zero.
RewardDistribution make_distribution(
    std::vector<std::pair<Scalar, Scalar>> raw);

/// Exact pushforward of the snapshot policy through verify-then-score over
/// the full response space. Propagates CapacityError from enumeration.
RewardDistribution distribution_under_policy(
    const RewardSpec& spec, const tasks::TaskInstance& task,
    const policy::PolicySnapshot& snapshot, std::int64_t cap = 1'000'000);

/// Scores every response in the group and records the group mean.
void score_group(const RewardSpec& spec, const tasks::TaskInstance& task,
                 policy::Group& group);

}  // namespace dgro::reward
