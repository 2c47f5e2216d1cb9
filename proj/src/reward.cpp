#include "dgro/reward.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dgro/errors.hpp"

namespace dgro::reward {

void validate_spec(const RewardSpec& spec) {
  if (spec.c_f < 0.0 || spec.c_corr < 0.0 || spec.c_com < 0.0) {
    throw ConfigError("reward weights must be nonnegative");
  }
  if (!(spec.c_f + spec.c_corr + spec.c_com > 0.0)) {
    throw ConfigError("reward weights must have positive sum");
  }
}

Scalar score(const RewardSpec& spec, const tasks::VerdictTriple& verdict) {
  return spec.c_f * verdict.r_f + spec.c_corr * verdict.r_corr +
         spec.c_com * verdict.r_com;
}

RewardSpec builtin_scheme(std::string_view name) {
  RewardSpec spec;
  spec.scheme_name = std::string(name);
  if (name == "narrow") {
    spec.c_f = 0.4, spec.c_corr = 0.5, spec.c_com = 0.1;
  } else if (name == "medium") {
    spec.c_f = 1.0, spec.c_corr = 1.75, spec.c_com = 0.25;
  } else if (name == "wide") {
    spec.c_f = 2.0, spec.c_corr = 2.5, spec.c_com = 0.5;
  } else {
    throw ConfigError("unknown reward scheme: " + std::string(name));
  }
  return spec;
}

RewardDistribution make_distribution(
    std::vector<std::pair<Scalar, Scalar>> raw) {
  if (raw.empty()) throw InputError("empty reward distribution");
  // Aggregate equal values; key = value rounded to 12 decimals.
  std::map<long long, std::pair<Scalar, Scalar>> buckets;
  for (const auto& [value, prob] : raw) {
    if (!std::isfinite(value) || !std::isfinite(prob) || prob < 0.0) {
      throw InputError("reward distribution entries must be finite, prob >= 0");
    }
    const long long key = std::llround(value * 1e12);
    auto [it, inserted] = buckets.emplace(key, std::make_pair(value, prob));
    if (!inserted) it->second.second += prob;
  }
  RewardDistribution dist;
  dist.support.reserve(buckets.size());
  for (const auto& [key, entry] : buckets) {
    dist.support.emplace_back(entry.first, entry.second);
  }
  dist.m = dist.support.back().first;
  dist.min_value = dist.support.front().first;
  if (dist.support.size() == 1) {
    dist.r_bar = dist.m;
    dist.variance = 0.0;
    dist.p_star = dist.support.front().second;
    return dist;
  }
  Scalar mean = 0.0;
  for (const auto& [value, prob] : dist.support) mean += prob * value;
  Scalar var = 0.0;
  for (const auto& [value, prob] : dist.support) {
    const Scalar d = value - mean;
    var += prob * d * d;
  }
  dist.r_bar = mean;
  dist.variance = var;
  dist.p_star = dist.support.back().second;
  return dist;
}

RewardDistribution distribution_under_policy(
    const RewardSpec& spec, const tasks::TaskInstance& task,
    const policy::PolicySnapshot& snapshot, std::int64_t cap) {
  validate_spec(spec);
  std::vector<std::pair<Scalar, Scalar>> raw;
  policy::for_each_response_logprob(
      snapshot.params(), task.prompt_index, cap,
      [&](const policy::Response& response, Scalar logp) {
        raw.emplace_back(score(spec, verify(task, response)), std::exp(logp));
      });
  return make_distribution(std::move(raw));
}

void score_group(const RewardSpec& spec, const tasks::TaskInstance& task,
                 policy::Group& group) {
  group.rewards.resize(group.responses.size());
  Scalar sum = 0.0;
  for (std::size_t i = 0; i < group.responses.size(); ++i) {
    group.rewards[i] = score(spec, verify(task, group.responses[i]));
    sum += group.rewards[i];
  }
  group.r_bar = sum / static_cast<Scalar>(group.responses.size());
  group.scored = true;
}

}  // namespace dgro::reward
