#pragma once

/**
 * Softmax autoregressive policy over a finite vocabulary.
 *
 * The policy is tabular: every (prompt, prefix) pair owns a logit row, the
 * prefix being the sequence of non-eos tokens emitted so far. Log
 * probabilities, sampling, the closed-form score function, and the logit-map
 * Jacobian norm are all exact, which is what lets the theory checks run at
 * 1e-9 tolerances. All probability arithmetic is done in log space with
 * max-shifted softmax.
 *
 * Generation semantics: a response either terminates by emitting eos within
 * n_max tokens, or is truncated at exactly n_max non-eos tokens. Truncated
 * responses are kept (terminated = false) and scored as incomplete.
 */

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "dgro/linalg.hpp"
#include "dgro/rng.hpp"

namespace dgro::policy {

struct Vocab {
  int size = 0;
  int eos_id = 0;
};

/// Throws InputError unless size >= 2 and 0 <= eos_id < size.
void validate_vocab(const Vocab& vocab);

struct Response {
  std::vector<int> tokens;
  bool terminated = false;

  int length() const { return static_cast<int>(tokens.size()); }
};

/// Enforces the response invariants: nonempty, length <= n_max, all tokens in
/// range, eos exactly at the end iff terminated. Throws InputError.
void validate_response(const Vocab& vocab, const Response& response, int n_max);

/// How prefix states map onto parameter rows. The logits for a state are
/// gain * theta.row(param_row(state)), so the Jacobian of the logit map for
/// any single prefix is gain times a row-selection matrix.
enum class FeatureMapKind : std::uint32_t {
  tabular = 0,     // one parameter row per prefix state
  scaled = 1,      // tabular rows read through a constant gain
  shared_row = 2,  // several states alias one parameter row (state mod rows)
};

struct FeatureMap {
  FeatureMapKind kind = FeatureMapKind::tabular;
  Scalar scale = 1.0;   // gain for the scaled kind; ignored otherwise
  int shared_rows = 0;  // parameter rows for the shared_row kind

  Scalar gain() const { return kind == FeatureMapKind::scaled ? scale : 1.0; }
  std::int64_t param_row(std::int64_t state) const {
    return kind == FeatureMapKind::shared_row ? state % shared_rows : state;
  }
};

/// Logit tables for a set of prompts. theta[p] has one row per parameter row
/// and one column per token; rows need no normalization constraint (softmax
/// absorbs any additive shift).
struct PolicyParams {
  Vocab vocab;
  int n_max = 1;
  FeatureMap map;
  std::vector<Mat> theta;

  int num_prompts() const { return static_cast<int>(theta.size()); }
  std::int64_t state_rows() const;
  std::int64_t param_rows() const;

  /// Zero logits (uniform policy) for `num_prompts` prompts.
  static PolicyParams zeros(const Vocab& vocab, int n_max, int num_prompts,
                            const FeatureMap& map = {});
};

/// Number of prefix states for the given vocab and horizon:
/// sum over k = 0..n_max-1 of (size-1)^k. Throws CapacityError past `cap`.
std::int64_t state_count(const Vocab& vocab, int n_max,
                         std::int64_t cap = 1'000'000);

/// Adds iid normal(0, scale) noise to every logit.
void randomize(PolicyParams& params, Scalar scale, SeedStream& stream);

/// Frozen copy of PolicyParams playing one of the paper's policy roles.
class PolicySnapshot {
 public:
  enum class Role { sampling, source, reference };

  PolicySnapshot(PolicyParams params, Role role)
      : params_(std::move(params)), role_(role) {}

  const PolicyParams& params() const { return params_; }
  Role role() const { return role_; }

 private:
  PolicyParams params_;
  Role role_;
};

/// G responses sampled for one prompt, plus their rewards once scored.
struct Group {
  int prompt_index = 0;
  std::uint64_t seed = 0;  // sampling provenance: stream key (seed, step)
  std::uint64_t step = 0;
  std::vector<Response> responses;
  std::vector<Scalar> rewards;
  Scalar r_bar = 0.0;
  bool scored = false;
};

/// log pi_theta(y | x), factored over tokens. Always <= 0.
Scalar log_prob(const PolicyParams& params, int prompt,
                const Response& response);

/// Gradient of log_prob with respect to the prompt's parameter table:
/// per visited prefix, gain * (e_y - pi) accumulated into the state's row.
/// Matches central finite differences of log_prob to ~1e-6.
Mat grad_log_prob(const PolicyParams& params, int prompt,
                  const Response& response);

/// acc += coeff * grad_log_prob(...), written in place; acc must be
/// table-shaped. The allocation-free form the estimators accumulate with.
void accumulate_grad_log_prob(const PolicyParams& params, int prompt,
                              const Response& response, Scalar coeff,
                              Mat& acc);

/// One ancestral sample; consumes one stream draw per emitted token.
Response sample_response(const PolicyParams& params, int prompt,
                         SeedStream& stream);

/// G independent rollouts, stream-keyed by (seed, prompt, rollout, step) so
/// identical keys reproduce identical groups bit for bit. Rewards are left
/// unset. Throws ConfigError if G < 2.
Group sample_group(const PolicyParams& params, int prompt, int G,
                   std::uint64_t seed, std::uint64_t step = 0);

/// Deterministic argmax decode (ties break to the lowest token index).
Response greedy_decode(const PolicyParams& params, int prompt);

/// gamma(x; theta): max over prefixes of the operator norm of the logit-map
/// Jacobian. For the selection-structured maps here this is the map gain;
/// the prefix enumeration is still capped like every other exact operation.
Scalar jacobian_gamma(const PolicyParams& params, int prompt, int n_max,
                      std::int64_t state_cap = 1'000'000);
Scalar jacobian_gamma(const PolicyParams& params, int prompt);

/// Expected per-token Shannon entropy along on-policy prefixes: the
/// visitation-weighted mean of row entropies. Exact by prefix enumeration
/// when the state count fits the cap, otherwise a fixed-seed sampling
/// estimate over 4096 rollouts.
Scalar entropy(const PolicyParams& params, int prompt,
               std::int64_t state_cap = 1'000'000);

/// Visits every response (terminated ones of length <= n_max plus truncated
/// ones of exactly n_max tokens) in canonical order: depth-first, tokens
/// ascending at each prefix. Calls fn(response, log_prob). Throws
/// CapacityError if the response count would exceed `cap`.
void for_each_response_logprob(
    const PolicyParams& params, int prompt, std::int64_t cap,
    const std::function<void(const Response&, Scalar)>& fn);

/// Same walk carrying log probabilities under two parameter sets that share
/// vocab, horizon, and feature map (e.g. current policy and the snapshot).
void for_each_response_logprob2(
    const PolicyParams& params_a, const PolicyParams& params_b, int prompt,
    std::int64_t cap,
    const std::function<void(const Response&, Scalar, Scalar)>& fn);

/// Log-softmax of one logit row (max-shifted).
Vec log_softmax(const Vec& logits);

/// Checkpoint format: little-endian; header (vocab size, n_max, feature map
/// id, eos id, scale, param rows, prompt count) then row-major logits as
/// 64-bit floats.
void save_checkpoint(const std::filesystem::path& path,
                     const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dgro::policy
