#pragma once

/**
 * Synthetic verifiable tasks over finite response spaces.
 *
 * Each family defines a token layout over a value domain of size m:
 * value tokens 0..m-1, then OPEN = m, CLOSE = m+1, eos = m+2. A well-formed
 * answer is the exact sequence [OPEN, value, CLOSE, eos]; the verifier
 * computes the ground-truth value in closed form from the payload, so no
 * answers are ever stored.
 *
 * Verdicts are binary triples in {-1, +1}: format (grammar match),
 * correctness (requires format), completeness (eos emitted before the
 * horizon). Correctness is coupled to format: an unparseable response is
 * never judged correct.
 */

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dgro/policy.hpp"

namespace dgro::tasks {

enum class Family { mod_sum, key_recall };

std::string family_name(Family family);
Family family_from_name(const std::string& name);

struct TaskInstance {
  Family family = Family::mod_sum;
  // mod_sum: {a, b, m}; key_recall: {m, k, v_0..v_{k-1}, q}
  std::vector<int> payload;
  int prompt_index = 0;

  int value_domain() const;  // m
  policy::Vocab vocab() const;
  int open_token() const { return value_domain(); }
  int close_token() const { return value_domain() + 1; }
  int answer() const;  // ground truth, closed form
};

/// (a + b) mod m. Throws InputError on invalid payload ranges.
TaskInstance make_mod_sum(int a, int b, int modulus);

/// Recall values[query] from the stored key->value list.
TaskInstance make_key_recall(const std::vector<int>& values, int query,
                             int value_domain);

struct VerdictTriple {
  int r_f = -1;
  int r_corr = -1;
  int r_com = -1;
};

/// Pure verdict function; every response gets a verdict.
VerdictTriple verify(const TaskInstance& task, const policy::Response& response);

/// True iff some response within n_max earns (+1, +1, +1).
bool solvable_within(const TaskInstance& task, int n_max);

/// Total number of responses: all eos-terminated sequences of length <= n_max
/// plus all eos-free sequences of exactly n_max tokens.
std::int64_t count_responses(const policy::Vocab& vocab, int n_max);

/// Streams every response in canonical order (depth-first, ascending token
/// at each prefix; eos yields a terminated response in place). Throws
/// CapacityError when count_responses exceeds `cap`.
void for_each_response(const policy::Vocab& vocab, int n_max, std::int64_t cap,
                       const std::function<void(const policy::Response&)>& fn);

std::vector<policy::Response> enumerate_responses(const policy::Vocab& vocab,
                                                  int n_max,
                                                  std::int64_t cap = 1'000'000);

/// Writes the full (response, verdict) table for one instance as CSV.
void dump_csv(std::ostream& out, const TaskInstance& task, int n_max,
              std::int64_t cap = 1'000'000);

/// Declarative task-suite description (parsed from the config file).
struct SuiteConfig {
  Family family = Family::mod_sum;
  int modulus = 5;        // value domain m
  int n_max = 4;
  int num_pairs = 3;      // key_recall only
  int id_operand_cap = 3; // payload values <= cap are in-distribution
  int train_prompts = 12;
  int holdout_prompts = 4;
  int ood_prompts = 4;
  std::uint64_t split_seed = 17;
};

/// Prompt splits share one vocab and horizon; prompt_index is global across
/// train, holdout, ood (in that order) so one policy table covers them all.
struct TaskSuite {
  SuiteConfig cfg;
  policy::Vocab vocab;
  std::vector<TaskInstance> train;
  std::vector<TaskInstance> holdout;
  std::vector<TaskInstance> ood;

  int total_prompts() const {
    return static_cast<int>(train.size() + holdout.size() + ood.size());
  }
  const TaskInstance& by_index(int prompt_index) const;
};

/// Builds the splits deterministically from cfg.split_seed and asserts every
/// selected instance is solvable within the horizon.
TaskSuite build_suite(const SuiteConfig& cfg);

}  // namespace dgro::tasks
