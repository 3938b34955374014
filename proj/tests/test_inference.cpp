#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "riskbn/error.hpp"
#include "riskbn/inference.hpp"
#include "support/testkit.hpp"

using namespace riskbn;

namespace {

BayesianNetwork chain() { return testkit::make_network({"A", "B"}, {{"A", "B"}}, {{0.5}, {0.1, 0.9}}); }

std::vector<std::string> pick_targets(std::mt19937_64& rng, const BayesianNetwork& bn, std::size_t count) {
  std::vector<std::string> names;
  for (const auto& v : bn.dag().nodes()) names.push_back(v.name);
  std::shuffle(names.begin(), names.end(), rng);
  names.resize(std::min(count, names.size()));
  return names;
}

/// A long chain: one component too large to enumerate.
BayesianNetwork long_chain(std::size_t n) {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::vector<double>> tables;
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back("N" + std::to_string(100 + i));
    if (i > 0) edges.push_back({names[i - 1], names[i]});
    tables.push_back(i == 0 ? std::vector<double>{0.3} : std::vector<double>{0.2, 0.7});
  }
  return testkit::make_network(names, edges, tables);
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("exact posteriors on the two-node chain") {
  const auto bn = chain();
  const std::vector<std::string> a = {"A"};
  const auto r = infer_exact(bn, Evidence{}.set("B", true), a);
  CHECK(r.posteriors.at("A") == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(r.method == "exact");
  CHECK(r.probability("B") == 1.0);
  const std::vector<std::string> b = {"B"};
  CHECK(infer_exact(bn, {}, b).posteriors.at("B") == doctest::Approx(0.5));
  CHECK_THROWS_AS(infer_exact(bn, Evidence{}.set("A", true), a), ContractError);
  CHECK_THROWS_AS(infer_exact(bn, Evidence{}.set("Z", true), b), ContractError);
}

TEST_CASE("exact inference equals full-joint conditioning") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const auto bn = testkit::random_network(rng, 1 + rng() % 10);
    const auto targets = pick_targets(rng, bn, 1 + rng() % 3);
    const auto ev = testkit::random_evidence(rng, bn, targets, 0.4);
    const auto got = infer_exact(bn, ev, targets);
    const auto want = testkit::naive_posteriors(bn, ev, targets);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      CHECK(std::abs(got.posteriors.at(targets[i]) - want[i]) < 1e-12);
    }
  }
}

TEST_CASE("impossible evidence is reported") {
  const auto hard = testkit::make_network({"A", "B"}, {{"A", "B"}}, {{0.0}, {0.0, 1.0}});
  const std::vector<std::string> a = {"A"};
  CHECK_THROWS_AS(infer_exact(hard, Evidence{}.set("B", true), a), ImpossibleEvidenceError);
  SamplerConfig cfg(1);
  CHECK_THROWS_AS(infer_gibbs(hard, Evidence{}.set("B", true), a, cfg), ImpossibleEvidenceError);
}

TEST_CASE("size guard refuses one large component and automatic falls back") {
  const auto bn = long_chain(30);
  const std::vector<std::string> t = {"N129"};
  CHECK_THROWS_AS(infer_exact(bn, {}, t), TooLargeForExactError);
  SamplerConfig cfg(3);
  cfg.samples_per_chain = 500;
  cfg.burn_in = 100;
  const auto r = infer(bn, {}, t, cfg);
  CHECK(r.method == "gibbs");
  REQUIRE(r.sampler);
  // Evidence at the far end splits the chain: the target's ancestors become small.
  const std::vector<std::string> near = {"N105"};
  const auto split = infer(bn, Evidence{}.set("N104", true), near, cfg);
  CHECK(split.method == "exact");
  CHECK(split.posteriors.at("N105") == doctest::Approx(0.7));
}

TEST_CASE("many independent nodes enumerate per component") {
  std::vector<std::string> names;
  std::vector<std::vector<double>> tables;
  for (int i = 0; i < 40; ++i) {
    names.push_back("I" + std::to_string(i));
    tables.push_back({0.01 * (i + 1)});
  }
  const auto bn = testkit::make_network(names, {}, tables);
  const std::vector<std::string> t = {"I7", "I30"};
  const auto r = infer_exact(bn, Evidence{}.set("I3", true), t);
  CHECK(r.posteriors.at("I7") == doctest::Approx(0.08));
  CHECK(r.posteriors.at("I30") == doctest::Approx(0.31));
}

TEST_CASE("gibbs estimate converges on the chain and is reproducible") {
  const auto bn = chain();
  const std::vector<std::string> a = {"A"};
  SamplerConfig cfg(2024);
  const auto r = infer_gibbs(bn, Evidence{}.set("B", true), a, cfg);
  CHECK(std::abs(r.posteriors.at("A") - 0.9) < 0.02);
  CHECK(r.probability("B") == 1.0);
  CHECK(r.clamped.at("B"));
  REQUIRE(r.sampler);
  CHECK(r.sampler->chains == 4);
  CHECK(r.sampler->seed == 2024);
  CHECK(infer_gibbs(bn, Evidence{}.set("B", true), a, cfg) == r);
  SamplerConfig serial = cfg;
  serial.parallel = false;
  CHECK(infer_gibbs(bn, Evidence{}.set("B", true), a, serial).posteriors == r.posteriors);
  const auto f = infer_gibbs(bn, Evidence{}.set("B", false), a, cfg);
  CHECK(f.probability("B") == 0.0);
}

TEST_CASE("gibbs tracks exact posteriors on small random networks") {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 10; ++trial) {
    const auto bn = testkit::random_network(rng, 2 + rng() % 8);
    const auto targets = pick_targets(rng, bn, 2);
    const auto ev = testkit::random_evidence(rng, bn, targets, 0.3);
    const auto exact = infer_exact(bn, ev, targets);
    const auto gibbs = infer_gibbs(bn, ev, targets, SamplerConfig(rng()));
    for (const auto& t : targets) CHECK(std::abs(exact.posteriors.at(t) - gibbs.posteriors.at(t)) < 0.02);
  }
}

TEST_CASE("sampler configuration is validated") {
  const auto bn = chain();
  const std::vector<std::string> a = {"A"};
  SamplerConfig none(1);
  none.samples_per_chain = 0;
  CHECK_THROWS_AS(infer_gibbs(bn, {}, a, none), ConfigError);
  SamplerConfig neg(1);
  neg.burn_in = -1;
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  SamplerConfig def(1);
  CHECK(def.retained() >= 1000);
}

TEST_CASE("expired deadline times out the sampler") {
  const auto bn = long_chain(30);
  const std::vector<std::string> t = {"N129"};
  InferenceOptions opts;
  opts.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  CHECK_THROWS_AS(infer_gibbs(bn, {}, t, SamplerConfig(1), opts), TimeoutError);
}

TEST_CASE("conditioning on a certain event changes nothing") {
  const auto bn = testkit::make_network({"A", "B", "S"}, {{"A", "B"}, {"A", "S"}},
                                        {{0.3}, {0.2, 0.8}, {1.0, 1.0}});
  const std::vector<std::string> t = {"A", "B"};
  const auto before = infer_exact(bn, {}, t);
  const auto after = infer_exact(bn, Evidence{}.set("S", true), t);
  for (const auto& n : t) CHECK(before.posteriors.at(n) == doctest::Approx(after.posteriors.at(n)));
}

TEST_CASE("ranking cuts at k and threshold with name tie-break") {
  PosteriorReport r;
  r.posteriors = {{"C:b", 0.52}, {"C:a", 0.52}, {"C:c", 0.9}, {"C:d", 0.1}, {"C:e", 0.3},
                  {"C:f", 0.31}, {"C:g", 0.05}, {"C:h", 0.6}, {"C:i", 0.2}, {"C:j", 0.7}};
  const auto top = predict_ranking(r, 5, 0.0);
  REQUIRE(top.size() == 5);
  CHECK(top[0].variable == "C:c");
  CHECK(top[1].variable == "C:j");
  CHECK(top[2].variable == "C:h");
  CHECK(top[3].variable == "C:a");
  CHECK(top[4].variable == "C:b");
  CHECK(predict_ranking(r, 5, 1.0).empty());
  const auto cut = predict_ranking(r, 10, 0.3);
  CHECK(cut.size() == 6);
  CHECK(cut.back().variable == "C:f");
  CHECK_THROWS_AS(predict_ranking(r, 0, 0.3), ContractError);
  CHECK_THROWS_AS(predict_ranking(r, 3, 1.5), ContractError);
}

TEST_CASE("ranking is strictly ordered and bounded by k") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    PosteriorReport r;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) r.posteriors["v" + std::to_string(i)] = std::round(unit(rng) * 10) / 10;
    const std::size_t k = 1 + rng() % 10;
    const double t = std::round(unit(rng) * 10) / 10;
    const auto items = predict_ranking(r, k, t);
    CHECK(items.size() <= k);
    for (std::size_t i = 0; i < items.size(); ++i) {
      CHECK(items[i].probability > t);
      if (i > 0) {
        const bool ordered = items[i - 1].probability > items[i].probability ||
                             (items[i - 1].probability == items[i].probability &&
                              items[i - 1].variable < items[i].variable);
        CHECK(ordered);
      }
    }
  }
}

TEST_CASE("baseline predicts relative frequencies") {
  std::vector<VariableDescriptor> vars = {testkit::var("C:x", tags::cause), testkit::var("C:y", tags::cause),
                                          testkit::var("P:p", tags::problem)};
  std::vector<std::uint8_t> bits;
  for (int s = 0; s < 488; ++s) {
    bits.push_back(s < 122 ? 1 : 0);
    bits.push_back(0);
    bits.push_back(s % 2);
  }
  const BinaryDataset ds(vars, bits);
  const auto r = baseline_predict(ds, tags::cause);
  CHECK(r.posteriors.at("C:x") == 0.25);
  CHECK(r.posteriors.at("C:y") == 0.0);
  CHECK(r.posteriors.size() == 2);
  CHECK(r.method == "baseline");
  const Dag edgeless({vars[0], vars[1]}, {});
  const auto bn = fit_mle(edgeless, ds, 0.0, WeightMode::occurrence);
  CHECK(bn.cpt(0).table[0] == r.posteriors.at("C:x"));
  CHECK(bn.cpt(1).table[0] == r.posteriors.at("C:y"));
}

}  // TEST_SUITE
