#include "riskbn/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "riskbn/error.hpp"

namespace riskbn {

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("sampler needs at least one chain");
  if (burn_in < 0) throw ConfigError("burn-in must be nonnegative");
  if (samples_per_chain < 1 || retained() == 0) {
    throw ConfigError("sampler configuration retains zero samples");
  }
}

std::string_view to_string(InferenceMethod method) {
  switch (method) {
    case InferenceMethod::automatic: return "auto";
    case InferenceMethod::exact: return "exact";
    case InferenceMethod::gibbs: return "gibbs";
  }
  return "?";
}

InferenceMethod inference_method_from_string(std::string_view text) {
  if (text == "auto") return InferenceMethod::automatic;
  if (text == "exact") return InferenceMethod::exact;
  if (text == "gibbs") return InferenceMethod::gibbs;
  throw ConfigError("unknown inference method '" + std::string(text) + "'");
}

double PosteriorReport::probability(std::string_view name) const {
  if (auto it = posteriors.find(std::string(name)); it != posteriors.end()) return it->second;
  if (auto it = clamped.find(std::string(name)); it != clamped.end()) return it->second ? 1.0 : 0.0;
  throw ContractError("'" + std::string(name) + "' is neither a target nor evidence");
}

namespace {

constexpr std::uint8_t kFree = 2;

/// Query resolved against a network: per-node state (0/1 observed, kFree
/// otherwise) restricted to the ancestral closure of targets and evidence.
struct Query {
  std::vector<std::uint8_t> state;
  std::vector<bool> relevant;
  std::vector<std::size_t> targets;  // node indices, in request order
  std::vector<std::size_t> free;     // relevant unobserved nodes, topological order
};

Query resolve(const BayesianNetwork& bn, const Evidence& evidence,
              std::span<const std::string> targets) {
  const Dag& dag = bn.dag();
  Query q;
  q.state.assign(bn.size(), kFree);
  q.relevant.assign(bn.size(), false);

  std::vector<std::size_t> seeds;
  for (const auto& [name, value] : evidence.values) {
    auto idx = dag.find(name);
    if (!idx) throw ContractError("evidence variable '" + name + "' is not in the network");
    q.state[*idx] = value ? 1 : 0;
    seeds.push_back(*idx);
  }
  for (const auto& name : targets) {
    auto idx = dag.find(name);
    if (!idx) throw ContractError("target '" + name + "' is not in the network");
    if (q.state[*idx] != kFree) {
      throw ContractError("target '" + name + "' is also given as evidence");
    }
    if (std::find(q.targets.begin(), q.targets.end(), *idx) != q.targets.end()) {
      throw ContractError("target '" + name + "' requested twice");
    }
    q.targets.push_back(*idx);
    seeds.push_back(*idx);
  }

  while (!seeds.empty()) {
    const auto v = seeds.back();
    seeds.pop_back();
    if (q.relevant[v]) continue;
    q.relevant[v] = true;
    for (auto p : dag.parents(v)) seeds.push_back(p);
  }
  for (auto v : dag.topological_order()) {
    if (q.relevant[v] && q.state[v] == kFree) q.free.push_back(v);
  }
  return q;
}

void fill_clamped(const Evidence& evidence, PosteriorReport& report) {
  for (const auto& [name, value] : evidence.values) report.clamped.emplace(name, value);
}

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
  std::vector<std::size_t> parent;
};

struct Component {
  std::vector<std::size_t> nodes;    // free nodes
  std::vector<std::size_t> factors;  // relevant nodes whose family touches the component
  bool has_target = false;
};

/// Free variables that are connected in the moral graph of the relevant
/// subnetwork once evidence nodes are removed.
std::vector<Component> components(const BayesianNetwork& bn, const Query& q) {
  const Dag& dag = bn.dag();
  DisjointSets sets(bn.size());
  for (std::size_t v = 0; v < bn.size(); ++v) {
    if (!q.relevant[v]) continue;
    std::optional<std::size_t> anchor;
    auto join = [&](std::size_t u) {
      if (q.state[u] != kFree) return;
      if (anchor) sets.unite(*anchor, u);
      else anchor = u;
    };
    join(v);
    for (auto p : dag.parents(v)) join(p);
  }

  std::map<std::size_t, Component> by_root;
  for (auto v : q.free) by_root[sets.find(v)].nodes.push_back(v);
  for (auto t : q.targets) by_root[sets.find(t)].has_target = true;
  for (std::size_t v = 0; v < bn.size(); ++v) {
    if (!q.relevant[v]) continue;
    std::optional<std::size_t> root;
    if (q.state[v] == kFree) root = sets.find(v);
    for (auto p : dag.parents(v)) {
      if (!root && q.state[p] == kFree) root = sets.find(p);
    }
    if (root) by_root[*root].factors.push_back(v);
  }
  std::vector<Component> out;
  for (auto& [root, c] : by_root) out.push_back(std::move(c));
  return out;
}

void check_deadline(const InferenceOptions& opts) {
  if (opts.deadline && std::chrono::steady_clock::now() > *opts.deadline) {
    throw TimeoutError("inference exceeded its time budget");
  }
}

/// Sums the joint over every assignment of the component's free nodes,
/// visiting them in Gray-code order so each step flips one node and rescores
/// only the factors it touches. Weights are kept in log space and rescaled
/// against the largest seen so far. Returns Z and the mass where each target
/// slot is true, both relative to the same scale.
std::pair<double, std::vector<double>> enumerate_component(const BayesianNetwork& bn, const Component& c,
                                                           const std::vector<std::size_t>& target_slots,
                                                           std::vector<std::uint8_t>& state,
                                                           const InferenceOptions& opts) {
  const std::size_t k = c.nodes.size();
  const std::size_t nf = c.factors.size();
  struct Touch {
    std::size_t factor;
    std::size_t bit;  // 0 flips the factor's own value
  };
  std::vector<std::vector<Touch>> touches(k);
  std::vector<std::size_t> index(nf);
  std::vector<std::uint8_t> own(nf);
  std::vector<double> logv(nf);
  std::size_t zeros = 0;

  for (std::size_t i = 0; i < k; ++i) state[c.nodes[i]] = 0;
  auto factor_log = [&](std::size_t f, bool& zero) {
    const double t = bn.cpt(c.factors[f]).table[index[f]];
    const double p = own[f] ? t : 1.0 - t;
    zero = p <= 0.0;
    return zero ? 0.0 : std::log(p);
  };
  for (std::size_t f = 0; f < nf; ++f) {
    const std::size_t node = c.factors[f];
    index[f] = bn.config_index(node, state);
    own[f] = state[node];
    const auto& parents = bn.cpt(node).parents;
    for (std::size_t i = 0; i < k; ++i) {
      if (c.nodes[i] == node) touches[i].push_back({f, 0});
      for (std::size_t b = 0; b < parents.size(); ++b) {
        if (parents[b] == c.nodes[i]) touches[i].push_back({f, std::size_t{1} << b});
      }
    }
  }
  std::vector<std::uint8_t> is_zero(nf);
  auto resync = [&] {
    double sum = 0.0;
    zeros = 0;
    for (std::size_t f = 0; f < nf; ++f) {
      bool zero = false;
      logv[f] = factor_log(f, zero);
      is_zero[f] = zero;
      zeros += zero;
      sum += logv[f];
    }
    return sum;
  };
  double logsum = resync();

  double z = 0.0, ref = -std::numeric_limits<double>::infinity();
  std::vector<double> numer(target_slots.size(), 0.0);
  const std::size_t total = std::size_t{1} << k;
  std::size_t gray = 0;
  for (std::size_t step = 0; step < total; ++step) {
    if (step > 0) {
      const std::size_t slot = static_cast<std::size_t>(std::countr_zero(step));
      gray ^= std::size_t{1} << slot;
      state[c.nodes[slot]] ^= 1U;
      for (const auto& t : touches[slot]) {
        if (t.bit == 0) own[t.factor] ^= 1U;
        else index[t.factor] ^= t.bit;
        bool zero = false;
        const double lv = factor_log(t.factor, zero);
        zeros += static_cast<std::size_t>(zero) - is_zero[t.factor];
        is_zero[t.factor] = zero;
        logsum += lv - logv[t.factor];
        logv[t.factor] = lv;
      }
      if ((step & 0xFFF) == 0) {
        check_deadline(opts);
        logsum = resync();
      }
    }
    if (zeros > 0) continue;
    if (logsum > ref) {
      const double scale = std::isinf(ref) ? 0.0 : std::exp(ref - logsum);
      z *= scale;
      for (auto& x : numer) x *= scale;
      ref = logsum;
    }
    const double w = std::exp(logsum - ref);
    z += w;
    for (std::size_t j = 0; j < target_slots.size(); ++j) {
      if ((gray >> target_slots[j]) & 1U) numer[j] += w;
    }
  }
  return {z, std::move(numer)};
}

}  // namespace

PosteriorReport infer_exact(const BayesianNetwork& bn, const Evidence& evidence,
                            std::span<const std::string> targets, const InferenceOptions& opts) {
  Query q = resolve(bn, evidence, targets);
  PosteriorReport report;
  report.method = "exact";
  fill_clamped(evidence, report);

  // Factors over evidence only: zero means the evidence itself is impossible.
  for (std::size_t v = 0; v < bn.size(); ++v) {
    if (!q.relevant[v] || q.state[v] == kFree) continue;
    bool all_observed = true;
    for (auto p : bn.dag().parents(v)) all_observed = all_observed && q.state[p] != kFree;
    if (all_observed && bn.conditional(v, q.state) == 0.0) {
      throw ImpossibleEvidenceError("evidence has probability zero");
    }
  }

  auto comps = components(bn, q);
  for (const auto& c : comps) {
    if (c.nodes.size() > opts.exact_node_guard) {
      if (!c.has_target) continue;  // independent of every target
      throw TooLargeForExactError(std::to_string(c.nodes.size()) +
                                  " jointly dependent free variables exceed the exact guard of " +
                                  std::to_string(opts.exact_node_guard) + "; use Gibbs sampling");
    }
  }

  std::vector<std::uint8_t> state = q.state;
  for (const auto& c : comps) {
    if (c.nodes.size() > opts.exact_node_guard) continue;
    const std::size_t k = c.nodes.size();
    std::vector<std::size_t> target_slots;
    for (std::size_t i = 0; i < k; ++i) {
      if (std::find(q.targets.begin(), q.targets.end(), c.nodes[i]) != q.targets.end()) {
        target_slots.push_back(i);
      }
    }
    const auto [z, numer] = enumerate_component(bn, c, target_slots, state, opts);
    if (!(z > 0.0)) throw ImpossibleEvidenceError("evidence has probability zero");
    for (std::size_t j = 0; j < target_slots.size(); ++j) {
      const auto node = c.nodes[target_slots[j]];
      report.posteriors[bn.dag().node(node).name] = numer[j] / z;
    }
    for (auto v : c.nodes) state[v] = kFree;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Gibbs

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct ChainResult {
  std::vector<std::size_t> hits;  // per target
  std::exception_ptr error;
};

void run_chain(const BayesianNetwork& bn, const Query& q,
               const std::vector<std::vector<std::size_t>>& relevant_children,
               const SamplerConfig& cfg, const InferenceOptions& opts, int chain,
               ChainResult& out) {
  try {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(chain) + 1)));
    std::vector<std::uint8_t> state = q.state;

    // Ancestral initialisation; evidence stays clamped.
    for (auto v : q.free) {
      state[v] = 0;
      const double p = bn.cpt(v).table[bn.config_index(v, state)];
      state[v] = uniform01(rng) < p ? 1 : 0;
    }

    out.hits.assign(q.targets.size(), 0);
    const long total = static_cast<long>(cfg.burn_in) + cfg.samples_per_chain;
    for (long sweep = 0; sweep < total; ++sweep) {
      if ((sweep & 0xFF) == 0) check_deadline(opts);
      for (auto v : q.free) {
        state[v] = 1;
        double p1 = bn.cpt(v).table[bn.config_index(v, state)];
        double p0 = 1.0 - p1;
        for (auto c : relevant_children[v]) {
          p1 *= bn.conditional(c, state);
        }
        state[v] = 0;
        for (auto c : relevant_children[v]) {
          p0 *= bn.conditional(c, state);
        }
        const double z = p0 + p1;
        if (!(z > 0.0)) throw ImpossibleEvidenceError("sampler reached a zero-probability state");
        state[v] = uniform01(rng) * z < p1 ? 1 : 0;
      }
      if (sweep >= cfg.burn_in) {
        for (std::size_t t = 0; t < q.targets.size(); ++t) out.hits[t] += state[q.targets[t]];
      }
    }
  } catch (...) {
    out.error = std::current_exception();
  }
}

}  // namespace

PosteriorReport infer_gibbs(const BayesianNetwork& bn, const Evidence& evidence,
                            std::span<const std::string> targets, const SamplerConfig& cfg,
                            const InferenceOptions& opts) {
  cfg.validate();
  Query q = resolve(bn, evidence, targets);

  std::vector<std::vector<std::size_t>> relevant_children(bn.size());
  for (auto v : q.free) {
    for (auto c : bn.dag().children(v)) {
      if (q.relevant[c]) relevant_children[v].push_back(c);
    }
  }

  std::vector<ChainResult> results(static_cast<std::size_t>(cfg.chains));
  if (cfg.parallel && cfg.chains > 1 && std::thread::hardware_concurrency() > 1) {
    std::vector<std::thread> workers;
    for (int c = 0; c < cfg.chains; ++c) {
      workers.emplace_back(run_chain, std::cref(bn), std::cref(q), std::cref(relevant_children),
                           std::cref(cfg), std::cref(opts), c, std::ref(results[c]));
    }
    for (auto& w : workers) w.join();
  } else {
    for (int c = 0; c < cfg.chains; ++c) {
      run_chain(bn, q, relevant_children, cfg, opts, c, results[c]);
    }
  }
  for (const auto& r : results) {
    if (r.error) std::rethrow_exception(r.error);
  }

  PosteriorReport report;
  report.method = "gibbs";
  fill_clamped(evidence, report);
  for (std::size_t t = 0; t < q.targets.size(); ++t) {
    double sum = 0.0;
    for (const auto& r : results) {
      sum += static_cast<double>(r.hits[t]) / cfg.samples_per_chain;
    }
    report.posteriors[bn.dag().node(q.targets[t]).name] = sum / cfg.chains;
  }
  report.sampler = SamplerDiagnostics{cfg.chains, cfg.burn_in, cfg.samples_per_chain, cfg.seed,
                                      q.free.size()};
  return report;
}

PosteriorReport infer(const BayesianNetwork& bn, const Evidence& evidence,
                      std::span<const std::string> targets, const SamplerConfig& cfg,
                      InferenceMethod method, const InferenceOptions& opts) {
  switch (method) {
    case InferenceMethod::exact: return infer_exact(bn, evidence, targets, opts);
    case InferenceMethod::gibbs: return infer_gibbs(bn, evidence, targets, cfg, opts);
    case InferenceMethod::automatic: break;
  }
  try {
    return infer_exact(bn, evidence, targets, opts);
  } catch (const TooLargeForExactError&) {
    return infer_gibbs(bn, evidence, targets, cfg, opts);
  }
}

std::vector<RankedItem> predict_ranking(const PosteriorReport& report, std::size_t k, double t) {
  if (k < 1) throw ContractError("ranking length must be at least 1");
  if (!(t >= 0.0 && t <= 1.0)) throw ContractError("threshold must lie in [0, 1]");
  std::vector<RankedItem> items;
  for (const auto& [name, p] : report.posteriors) items.push_back({name, p});
  std::stable_sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.variable < b.variable;
  });
  if (items.size() > k) items.resize(k);
  std::erase_if(items, [&](const RankedItem& r) { return r.probability <= t; });
  return items;
}

PosteriorReport baseline_predict(const BinaryDataset& ds, std::span<const std::size_t> outputs) {
  if (ds.empty()) throw ContractError("baseline needs a nonempty dataset");
  PosteriorReport report;
  report.method = "baseline";
  for (auto v : outputs) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < ds.sample_count(); ++s) hits += ds.value(s, v) ? 1 : 0;
    report.posteriors[ds.variable(v).name] =
        static_cast<double>(hits) / static_cast<double>(ds.sample_count());
  }
  return report;
}

PosteriorReport baseline_predict(const BinaryDataset& ds, const Tag& output_tag) {
  const auto outputs = ds.indices_with_tag(output_tag);
  return baseline_predict(ds, outputs);
}

}  // namespace riskbn
