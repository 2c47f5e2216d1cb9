#include "dgro/tasks.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "dgro/errors.hpp"
#include "dgro/rng.hpp"

namespace dgro::tasks {

std::string family_name(Family family) {
  switch (family) {
    case Family::mod_sum: return "mod_sum";
    case Family::key_recall: return "key_recall";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  if (name == "mod_sum") return Family::mod_sum;
  if (name == "key_recall") return Family::key_recall;
  throw ConfigError("unknown task family: " + name);
}

int TaskInstance::value_domain() const {
  return family == Family::mod_sum ? payload.at(2) : payload.at(0);
}

policy::Vocab TaskInstance::vocab() const {
  const int m = value_domain();
  return policy::Vocab{m + 3, m + 2};
}

int TaskInstance::answer() const {
  if (family == Family::mod_sum) {
    return (payload.at(0) + payload.at(1)) % payload.at(2);
  }
  const int k = payload.at(1);
  const int query = payload.at(static_cast<std::size_t>(2 + k));
  return payload.at(static_cast<std::size_t>(2 + query));
}

TaskInstance make_mod_sum(int a, int b, int modulus) {
  if (modulus < 2) throw InputError("mod_sum: modulus must be >= 2");
  if (a < 0 || a >= modulus || b < 0 || b >= modulus) {
    throw InputError("mod_sum: operands must lie in [0, modulus)");
  }
  TaskInstance task;
  task.family = Family::mod_sum;
  task.payload = {a, b, modulus};
  return task;
}

TaskInstance make_key_recall(const std::vector<int>& values, int query,
                             int value_domain) {
  if (value_domain < 2) throw InputError("key_recall: value domain must be >= 2");
  if (values.empty()) throw InputError("key_recall: need at least one pair");
  for (int v : values) {
    if (v < 0 || v >= value_domain) {
      throw InputError("key_recall: value out of domain");
    }
  }
  if (query < 0 || query >= static_cast<int>(values.size())) {
    throw InputError("key_recall: query out of range");
  }
  TaskInstance task;
  task.family = Family::key_recall;
  task.payload.push_back(value_domain);
  task.payload.push_back(static_cast<int>(values.size()));
  task.payload.insert(task.payload.end(), values.begin(), values.end());
  task.payload.push_back(query);
  return task;
}

VerdictTriple verify(const TaskInstance& task, const policy::Response& response) {
  const policy::Vocab vocab = task.vocab();
  VerdictTriple verdict;
  verdict.r_com = response.terminated ? +1 : -1;
  // Grammar: exactly [OPEN, value, CLOSE, eos].
  const auto& t = response.tokens;
  const bool well_formed = t.size() == 4 && t[0] == task.open_token() &&
                           t[1] >= 0 && t[1] < task.value_domain() &&
                           t[2] == task.close_token() && t[3] == vocab.eos_id;
  verdict.r_f = well_formed ? +1 : -1;
  verdict.r_corr = (well_formed && t[1] == task.answer()) ? +1 : -1;
  return verdict;
}

bool solvable_within(const TaskInstance& task, int n_max) {
  if (n_max < 4) return false;
  policy::Response witness;
  witness.tokens = {task.open_token(), task.answer(), task.close_token(),
                    task.vocab().eos_id};
  witness.terminated = true;
  const VerdictTriple v = verify(task, witness);
  return v.r_f == +1 && v.r_corr == +1 && v.r_com == +1;
}

std::int64_t count_responses(const policy::Vocab& vocab, int n_max) {
  policy::validate_vocab(vocab);
  if (n_max < 1) throw InputError("n_max must be >= 1");
  const std::int64_t branch = vocab.size - 1;
  std::int64_t terminated = 0;
  std::int64_t pow = 1;
  for (int k = 0; k < n_max; ++k) {
    terminated += pow;
    pow *= branch;
  }
  return terminated + pow;
}

namespace {

void walk(const policy::Vocab& vocab, int n_max, policy::Response& scratch,
          const std::function<void(const policy::Response&)>& fn) {
  const int depth = scratch.length();
  for (int token = 0; token < vocab.size; ++token) {
    scratch.tokens.push_back(token);
    if (token == vocab.eos_id) {
      scratch.terminated = true;
      fn(scratch);
    } else if (depth + 1 == n_max) {
      scratch.terminated = false;
      fn(scratch);
    } else {
      walk(vocab, n_max, scratch, fn);
    }
    scratch.tokens.pop_back();
  }
}

}  // namespace

void for_each_response(const policy::Vocab& vocab, int n_max, std::int64_t cap,
                       const std::function<void(const policy::Response&)>& fn) {
  const std::int64_t total = count_responses(vocab, n_max);
  if (total > cap) {
    throw CapacityError("response enumeration exceeds cap");
  }
  policy::Response scratch;
  walk(vocab, n_max, scratch, fn);
}

std::vector<policy::Response> enumerate_responses(const policy::Vocab& vocab,
                                                  int n_max, std::int64_t cap) {
  std::vector<policy::Response> out;
  out.reserve(static_cast<std::size_t>(count_responses(vocab, n_max)));
  for_each_response(vocab, n_max, cap,
                    [&](const policy::Response& r) { out.push_back(r); });
  return out;
}

void dump_csv(std::ostream& out, const TaskInstance& task, int n_max,
              std::int64_t cap) {
  out << "response,terminated,r_f,r_corr,r_com\n";
  for_each_response(task.vocab(), n_max, cap, [&](const policy::Response& r) {
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      if (i > 0) out << ' ';
      out << r.tokens[i];
    }
    const VerdictTriple v = verify(task, r);
    out << ',' << (r.terminated ? 1 : 0) << ',' << v.r_f << ',' << v.r_corr
        << ',' << v.r_com << '\n';
  });
}

const TaskInstance& TaskSuite::by_index(int prompt_index) const {
  const auto i = static_cast<std::size_t>(prompt_index);
  if (i < train.size()) return train[i];
  const auto j = i - train.size();
  if (j < holdout.size()) return holdout[j];
  const auto k = j - holdout.size();
  if (k < ood.size()) return ood[k];
  throw InputError("prompt index outside suite");
}

namespace {

std::vector<TaskInstance> take(std::vector<TaskInstance>& pool, int count) {
  count = std::min<int>(count, static_cast<int>(pool.size()));
  std::vector<TaskInstance> out(pool.begin(), pool.begin() + count);
  pool.erase(pool.begin(), pool.begin() + count);
  return out;
}

void shuffle(std::vector<TaskInstance>& pool, SeedStream& stream) {
  for (std::size_t i = pool.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.next_below(i));
    std::swap(pool[i - 1], pool[j]);
  }
}

}  // namespace

TaskSuite build_suite(const SuiteConfig& cfg) {
  if (cfg.n_max < 4) throw ConfigError("suite n_max must be >= 4");
  if (cfg.train_prompts < 1) throw ConfigError("need at least one train prompt");
  TaskSuite suite;
  suite.cfg = cfg;

  std::vector<TaskInstance> id_pool;
  std::vector<TaskInstance> ood_pool;
  SeedStream stream(cfg.split_seed, 0, 0, 0);

  if (cfg.family == Family::mod_sum) {
    for (int a = 0; a < cfg.modulus; ++a) {
      for (int b = 0; b < cfg.modulus; ++b) {
        TaskInstance task = make_mod_sum(a, b, cfg.modulus);
        (std::max(a, b) <= cfg.id_operand_cap ? id_pool : ood_pool)
            .push_back(std::move(task));
      }
    }
  } else {
    // Sample distinct payloads; values <= id_operand_cap are in-distribution.
    std::set<std::vector<int>> seen;
    const int needed = cfg.train_prompts + cfg.holdout_prompts + cfg.ood_prompts;
    const int attempts = 64 * std::max(needed, 1);
    for (int it = 0; it < attempts; ++it) {
      std::vector<int> values(static_cast<std::size_t>(cfg.num_pairs));
      bool in_dist = true;
      for (int& v : values) {
        v = static_cast<int>(stream.next_below(
            static_cast<std::uint64_t>(cfg.modulus)));
        if (v > cfg.id_operand_cap) in_dist = false;
      }
      const int query = static_cast<int>(
          stream.next_below(static_cast<std::uint64_t>(cfg.num_pairs)));
      TaskInstance task = make_key_recall(values, query, cfg.modulus);
      if (!seen.insert(task.payload).second) continue;
      (in_dist ? id_pool : ood_pool).push_back(std::move(task));
    }
  }

  shuffle(id_pool, stream);
  shuffle(ood_pool, stream);
  suite.train = take(id_pool, cfg.train_prompts);
  suite.holdout = take(id_pool, cfg.holdout_prompts);
  suite.ood = take(ood_pool, cfg.ood_prompts);
  if (static_cast<int>(suite.train.size()) < cfg.train_prompts) {
    throw ConfigError("not enough in-distribution prompts for the train split");
  }

  int index = 0;
  for (auto* split : {&suite.train, &suite.holdout, &suite.ood}) {
    for (TaskInstance& task : *split) {
      task.prompt_index = index++;
      if (!solvable_within(task, cfg.n_max)) {
        throw ConfigError("unsolvable task instance in suite");
      }
    }
  }
  suite.vocab = suite.train.front().vocab();
  return suite;
}

}  // namespace dgro::tasks
