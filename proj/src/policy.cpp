#include "dgro/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "dgro/errors.hpp"

namespace dgro::policy {

namespace {

constexpr std::int64_t kTableRowCap = 1'000'000;
constexpr std::uint64_t kEntropySampleSeed = 0x5eedf00dULL;
constexpr int kEntropySampleCount = 4096;

std::string describe(const char* what, std::int64_t got, std::int64_t cap) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s: %lld exceeds cap %lld", what,
                static_cast<long long>(got), static_cast<long long>(cap));
  return buf;
}

/// Offsets of each prefix length block in the state index:
/// offsets[k] = sum_{j<k} (V-1)^j, so state = offsets[len] + base-(V-1) rank.
std::vector<std::int64_t> length_offsets(int branch, int n_max) {
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_max) + 1);
  std::int64_t total = 0;
  std::int64_t pow = 1;
  for (int k = 0; k <= n_max; ++k) {
    offsets[static_cast<std::size_t>(k)] = total;
    if (k < n_max) {
      total += pow;
      pow *= branch;
    }
  }
  return offsets;
}

int non_eos_digit(const Vocab& vocab, int token) {
  return token < vocab.eos_id ? token : token - 1;
}

/// Incremental prefix-state cursor for one response walk.
struct StateCursor {
  const std::vector<std::int64_t>& offsets;
  int branch;
  int len = 0;
  std::int64_t rank = 0;

  std::int64_t index() const {
    return offsets[static_cast<std::size_t>(len)] + rank;
  }
  void push(int digit) {
    rank = rank * branch + digit;
    ++len;
  }
};

const Mat& table_for(const PolicyParams& params, int prompt) {
  if (prompt < 0 || prompt >= params.num_prompts()) {
    throw InputError("prompt index out of range");
  }
  return params.theta[static_cast<std::size_t>(prompt)];
}

Vec state_log_probs(const PolicyParams& params, const Mat& table,
                    std::int64_t state) {
  const std::int64_t row = params.map.param_row(state);
  Vec logits = params.map.gain() * table.row(row).transpose();
  return log_softmax(logits);
}

}  // namespace

void validate_vocab(const Vocab& vocab) {
  if (vocab.size < 2) throw InputError("vocab size must be >= 2");
  if (vocab.eos_id < 0 || vocab.eos_id >= vocab.size) {
    throw InputError("eos_id out of range");
  }
}

void validate_response(const Vocab& vocab, const Response& response,
                       int n_max) {
  if (response.tokens.empty()) throw InputError("empty response");
  if (response.length() > n_max) throw InputError("response longer than n_max");
  for (int t : response.tokens) {
    if (t < 0 || t >= vocab.size) throw InputError("token index out of range");
  }
  const bool ends_eos = response.tokens.back() == vocab.eos_id;
  if (response.terminated != ends_eos) {
    throw InputError("terminated flag inconsistent with trailing eos");
  }
  for (std::size_t i = 0; i + 1 < response.tokens.size(); ++i) {
    if (response.tokens[i] == vocab.eos_id) {
      throw InputError("eos before end of response");
    }
  }
}

std::int64_t state_count(const Vocab& vocab, int n_max, std::int64_t cap) {
  validate_vocab(vocab);
  if (n_max < 1) throw InputError("n_max must be >= 1");
  const std::int64_t branch = vocab.size - 1;
  std::int64_t total = 0;
  std::int64_t pow = 1;
  for (int k = 0; k < n_max; ++k) {
    total += pow;
    if (total > cap) throw CapacityError(describe("state count", total, cap));
    if (k + 1 < n_max) {
      if (pow > cap / std::max<std::int64_t>(branch, 1) + 1) {
        throw CapacityError(describe("state count", cap + 1, cap));
      }
      pow *= branch;
    }
  }
  return total;
}

std::int64_t PolicyParams::state_rows() const {
  return state_count(vocab, n_max, kTableRowCap);
}

std::int64_t PolicyParams::param_rows() const {
  return theta.empty() ? 0 : static_cast<std::int64_t>(theta.front().rows());
}

PolicyParams PolicyParams::zeros(const Vocab& vocab, int n_max,
                                 int num_prompts, const FeatureMap& map) {
  validate_vocab(vocab);
  if (num_prompts < 1) throw InputError("need at least one prompt");
  PolicyParams params;
  params.vocab = vocab;
  params.n_max = n_max;
  params.map = map;
  const std::int64_t states = state_count(vocab, n_max, kTableRowCap);
  std::int64_t rows = states;
  if (map.kind == FeatureMapKind::shared_row) {
    if (map.shared_rows < 1 || map.shared_rows > states) {
      throw ConfigError("shared_rows must be in [1, state count]");
    }
    rows = map.shared_rows;
  }
  params.theta.assign(static_cast<std::size_t>(num_prompts),
                      Mat::Zero(rows, vocab.size));
  return params;
}

void randomize(PolicyParams& params, Scalar scale, SeedStream& stream) {
  for (Mat& table : params.theta) {
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
      for (Eigen::Index c = 0; c < table.cols(); ++c) {
        table(r, c) += scale * stream.next_normal();
      }
    }
  }
}

Vec log_softmax(const Vec& logits) {
  const Scalar shift = logits.maxCoeff();
  Vec shifted = logits.array() - shift;
  const Scalar lse = std::log(shifted.array().exp().sum());
  return shifted.array() - lse;
}

Scalar log_prob(const PolicyParams& params, int prompt,
                const Response& response) {
  const Mat& table = table_for(params, prompt);
  validate_response(params.vocab, response, params.n_max);
  const int branch = params.vocab.size - 1;
  const auto offsets = length_offsets(branch, params.n_max);
  StateCursor cursor{offsets, branch};
  Scalar total = 0.0;
  for (int token : response.tokens) {
    const Vec logp = state_log_probs(params, table, cursor.index());
    total += logp(token);
    if (token == params.vocab.eos_id) break;
    cursor.push(non_eos_digit(params.vocab, token));
  }
  return total;
}

void accumulate_grad_log_prob(const PolicyParams& params, int prompt,
                              const Response& response, Scalar coeff,
                              Mat& acc) {
  const Mat& table = table_for(params, prompt);
  validate_response(params.vocab, response, params.n_max);
  const int branch = params.vocab.size - 1;
  const auto offsets = length_offsets(branch, params.n_max);
  StateCursor cursor{offsets, branch};
  const Scalar gain = coeff * params.map.gain();
  for (int token : response.tokens) {
    const std::int64_t state = cursor.index();
    const Vec logp = state_log_probs(params, table, state);
    const std::int64_t row = params.map.param_row(state);
    acc.row(row) -= gain * logp.array().exp().matrix().transpose();
    acc(row, token) += gain;
    if (token == params.vocab.eos_id) break;
    cursor.push(non_eos_digit(params.vocab, token));
  }
}

Mat grad_log_prob(const PolicyParams& params, int prompt,
                  const Response& response) {
  const Mat& table = table_for(params, prompt);
  Mat grad = Mat::Zero(table.rows(), table.cols());
  accumulate_grad_log_prob(params, prompt, response, 1.0, grad);
  return grad;
}

Response sample_response(const PolicyParams& params, int prompt,
                         SeedStream& stream) {
  const Mat& table = table_for(params, prompt);
  const int branch = params.vocab.size - 1;
  const auto offsets = length_offsets(branch, params.n_max);
  StateCursor cursor{offsets, branch};
  Response response;
  response.tokens.reserve(static_cast<std::size_t>(params.n_max));
  for (int n = 0; n < params.n_max; ++n) {
    const Vec probs =
        state_log_probs(params, table, cursor.index()).array().exp();
    const int token =
        stream.next_categorical({probs.data(), static_cast<std::size_t>(probs.size())});
    response.tokens.push_back(token);
    if (token == params.vocab.eos_id) {
      response.terminated = true;
      return response;
    }
    cursor.push(non_eos_digit(params.vocab, token));
  }
  response.terminated = false;
  return response;
}

Group sample_group(const PolicyParams& params, int prompt, int G,
                   std::uint64_t seed, std::uint64_t step) {
  if (G < 2) throw ConfigError("group size G must be >= 2");
  Group group;
  group.prompt_index = prompt;
  group.seed = seed;
  group.step = step;
  group.responses.reserve(static_cast<std::size_t>(G));
  for (int i = 0; i < G; ++i) {
    SeedStream stream(seed, static_cast<std::uint64_t>(prompt),
                      static_cast<std::uint64_t>(i), step);
    group.responses.push_back(sample_response(params, prompt, stream));
  }
  return group;
}

Response greedy_decode(const PolicyParams& params, int prompt) {
  const Mat& table = table_for(params, prompt);
  const int branch = params.vocab.size - 1;
  const auto offsets = length_offsets(branch, params.n_max);
  StateCursor cursor{offsets, branch};
  Response response;
  for (int n = 0; n < params.n_max; ++n) {
    const Vec logp = state_log_probs(params, table, cursor.index());
    int token = 0;
    logp.maxCoeff(&token);
    response.tokens.push_back(token);
    if (token == params.vocab.eos_id) {
      response.terminated = true;
      return response;
    }
    cursor.push(non_eos_digit(params.vocab, token));
  }
  response.terminated = false;
  return response;
}

Scalar jacobian_gamma(const PolicyParams& params, int prompt, int n_max,
                      std::int64_t state_cap) {
  table_for(params, prompt);  // bounds check
  state_count(params.vocab, n_max, state_cap);
  // Every prefix reads one parameter row through a constant gain, so each
  // per-prefix Jacobian is gain times a selection matrix: operator norm
  // |gain| independent of the prefix.
  return std::abs(params.map.gain());
}

Scalar jacobian_gamma(const PolicyParams& params, int prompt) {
  return jacobian_gamma(params, prompt, params.n_max);
}

namespace {

Scalar row_entropy(const Vec& logp) {
  Scalar h = 0.0;
  for (Eigen::Index i = 0; i < logp.size(); ++i) {
    const Scalar p = std::exp(logp(i));
    if (p > 0.0) h -= p * logp(i);
  }
  return h;
}

void entropy_walk(const PolicyParams& params, const Mat& table,
                  StateCursor cursor, Scalar reach, Scalar& weighted,
                  Scalar& mass) {
  const Vec logp = state_log_probs(params, table, cursor.index());
  weighted += reach * row_entropy(logp);
  mass += reach;
  if (cursor.len + 1 >= params.n_max) return;
  for (int token = 0; token < params.vocab.size; ++token) {
    if (token == params.vocab.eos_id) continue;
    StateCursor child = cursor;
    child.push(non_eos_digit(params.vocab, token));
    entropy_walk(params, table, child, reach * std::exp(logp(token)), weighted,
                 mass);
  }
}

}  // namespace

Scalar entropy(const PolicyParams& params, int prompt,
               std::int64_t state_cap) {
  const Mat& table = table_for(params, prompt);
  const int branch = params.vocab.size - 1;
  const auto offsets = length_offsets(branch, params.n_max);
  bool enumerable = true;
  try {
    state_count(params.vocab, params.n_max, state_cap);
  } catch (const CapacityError&) {
    enumerable = false;
  }
  if (enumerable) {
    Scalar weighted = 0.0;
    Scalar mass = 0.0;
    entropy_walk(params, table, StateCursor{offsets, branch}, 1.0, weighted,
                 mass);
    return weighted / mass;
  }
  // Sampling fallback: visitation-weighted mean of row entropies along
  // sampled trajectories.
  Scalar weighted = 0.0;
  Scalar tokens = 0.0;
  for (int i = 0; i < kEntropySampleCount; ++i) {
    SeedStream stream(kEntropySampleSeed, static_cast<std::uint64_t>(prompt),
                      static_cast<std::uint64_t>(i), 0);
    StateCursor cursor{offsets, branch};
    for (int n = 0; n < params.n_max; ++n) {
      const Vec logp = state_log_probs(params, table, cursor.index());
      weighted += row_entropy(logp);
      tokens += 1.0;
      const Vec probs = logp.array().exp();
      const int token = stream.next_categorical(
          {probs.data(), static_cast<std::size_t>(probs.size())});
      if (token == params.vocab.eos_id) break;
      cursor.push(non_eos_digit(params.vocab, token));
    }
  }
  return weighted / tokens;
}

namespace {

std::int64_t response_count(const Vocab& vocab, int n_max) {
  const std::int64_t branch = vocab.size - 1;
  std::int64_t total = 0;
  std::int64_t pow = 1;
  for (int k = 0; k < n_max; ++k) {
    total += pow;
    pow *= branch;
  }
  return total + pow;  // terminated prefixes plus full-length truncations
}

template <typename Fn>
void response_walk(const PolicyParams& a, const PolicyParams* b,
                   const Mat& table_a, const Mat* table_b, StateCursor cursor,
                   Scalar lp_a, Scalar lp_b, Response& scratch, Fn&& fn) {
  const Vec logp_a = state_log_probs(a, table_a, cursor.index());
  Vec logp_b;
  if (b != nullptr) logp_b = state_log_probs(*b, *table_b, cursor.index());
  for (int token = 0; token < a.vocab.size; ++token) {
    scratch.tokens.push_back(token);
    const Scalar na = lp_a + logp_a(token);
    const Scalar nb = b != nullptr ? lp_b + logp_b(token) : 0.0;
    if (token == a.vocab.eos_id) {
      scratch.terminated = true;
      fn(scratch, na, nb);
    } else if (cursor.len + 1 == a.n_max) {
      scratch.terminated = false;
      fn(scratch, na, nb);
    } else {
      StateCursor child = cursor;
      child.push(non_eos_digit(a.vocab, token));
      response_walk(a, b, table_a, table_b, child, na, nb, scratch, fn);
    }
    scratch.tokens.pop_back();
  }
}

}  // namespace

void for_each_response_logprob(
    const PolicyParams& params, int prompt, std::int64_t cap,
    const std::function<void(const Response&, Scalar)>& fn) {
  const Mat& table = table_for(params, prompt);
  const std::int64_t total = response_count(params.vocab, params.n_max);
  if (total > cap) throw CapacityError(describe("response count", total, cap));
  const int branch = params.vocab.size - 1;
  const auto offsets = length_offsets(branch, params.n_max);
  Response scratch;
  response_walk(params, nullptr, table, nullptr, StateCursor{offsets, branch},
                0.0, 0.0, scratch,
                [&](const Response& r, Scalar lp, Scalar) { fn(r, lp); });
}

void for_each_response_logprob2(
    const PolicyParams& params_a, const PolicyParams& params_b, int prompt,
    std::int64_t cap,
    const std::function<void(const Response&, Scalar, Scalar)>& fn) {
  const Mat& table_a = table_for(params_a, prompt);
  const Mat& table_b = table_for(params_b, prompt);
  if (params_a.vocab.size != params_b.vocab.size ||
      params_a.vocab.eos_id != params_b.vocab.eos_id ||
      params_a.n_max != params_b.n_max ||
      params_a.map.kind != params_b.map.kind ||
      table_a.rows() != table_b.rows()) {
    throw InputError("parameter sets do not share vocab, horizon, and map");
  }
  const std::int64_t total = response_count(params_a.vocab, params_a.n_max);
  if (total > cap) throw CapacityError(describe("response count", total, cap));
  const int branch = params_a.vocab.size - 1;
  const auto offsets = length_offsets(branch, params_a.n_max);
  Response scratch;
  response_walk(params_a, &params_b, table_a, &table_b,
                StateCursor{offsets, branch}, 0.0, 0.0, scratch, fn);
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open checkpoint for writing: " + path.string());
  put_u32(out, static_cast<std::uint32_t>(params.vocab.size));
  put_u32(out, static_cast<std::uint32_t>(params.n_max));
  put_u32(out, static_cast<std::uint32_t>(params.map.kind));
  put_u32(out, static_cast<std::uint32_t>(params.vocab.eos_id));
  put_f64(out, params.map.scale);
  put_u64(out, static_cast<std::uint64_t>(params.param_rows()));
  put_u64(out, static_cast<std::uint64_t>(params.num_prompts()));
  for (const Mat& table : params.theta) {
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
      for (Eigen::Index c = 0; c < table.cols(); ++c) {
        put_f64(out, table(r, c));
      }
    }
  }
  if (!out) throw InputError("checkpoint write failed: " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path.string());
  PolicyParams params;
  params.vocab.size = static_cast<int>(get_u32(in));
  params.n_max = static_cast<int>(get_u32(in));
  params.map.kind = static_cast<FeatureMapKind>(get_u32(in));
  params.vocab.eos_id = static_cast<int>(get_u32(in));
  params.map.scale = get_f64(in);
  const auto rows = static_cast<std::int64_t>(get_u64(in));
  const auto prompts = static_cast<std::int64_t>(get_u64(in));
  validate_vocab(params.vocab);
  if (params.map.kind == FeatureMapKind::shared_row) {
    params.map.shared_rows = static_cast<int>(rows);
  }
  params.theta.assign(static_cast<std::size_t>(prompts),
                      Mat::Zero(rows, params.vocab.size));
  for (Mat& table : params.theta) {
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
      for (Eigen::Index c = 0; c < table.cols(); ++c) {
        table(r, c) = get_f64(in);
      }
    }
  }
  if (!in) throw InputError("truncated checkpoint: " + path.string());
  return params;
}

}  // namespace dgro::policy
