#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace testkit {

using Q = boost::rational<long long>;

/// Posteriors given as integer percentages so thresholds compare exactly.
struct MetricFixture {
  std::vector<std::string> variables;
  std::vector<std::vector<int>> percent;  // [sample][variable]
  std::vector<std::vector<int>> truth;
};

struct OracleThreshold {
  Q accuracy;
  std::optional<Q> precision;
  std::optional<Q> recall;
  std::size_t precision_excluded = 0;
  std::size_t recall_excluded = 0;
};

struct OracleRanking {
  Q precision;
  std::optional<Q> recall;
};

/// Threshold t given in tenths.
inline OracleThreshold oracle_threshold(const MetricFixture& f, int tenths) {
  OracleThreshold out;
  const long long n = static_cast<long long>(f.variables.size());
  long long correct = 0;
  Q pre_sum = 0, rec_sum = 0;
  long long pre_n = 0, rec_n = 0;
  for (std::size_t s = 0; s < f.percent.size(); ++s) {
    long long predicted = 0, hits = 0, actual = 0;
    for (std::size_t v = 0; v < f.variables.size(); ++v) {
      const bool said = f.percent[s][v] > tenths * 10;
      const bool is = f.truth[s][v] != 0;
      correct += said == is;
      predicted += said;
      hits += said && is;
      actual += is;
    }
    if (predicted > 0) {
      pre_sum += Q(hits, predicted);
      ++pre_n;
    } else {
      ++out.precision_excluded;
    }
    if (actual > 0) {
      rec_sum += Q(hits, actual);
      ++rec_n;
    } else {
      ++out.recall_excluded;
    }
  }
  out.accuracy = Q(correct, n * static_cast<long long>(f.percent.size()));
  if (pre_n) out.precision = pre_sum / pre_n;
  if (rec_n) out.recall = rec_sum / rec_n;
  return out;
}

inline OracleRanking oracle_ranking(const MetricFixture& f, std::size_t k) {
  Q pre_sum = 0, rec_sum = 0;
  long long rec_n = 0;
  for (std::size_t s = 0; s < f.percent.size(); ++s) {
    std::vector<std::size_t> order(f.variables.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (f.percent[s][a] != f.percent[s][b]) return f.percent[s][a] > f.percent[s][b];
      return f.variables[a] < f.variables[b];
    });
    long long hits = 0, actual = 0;
    for (std::size_t i = 0; i < k; ++i) hits += f.truth[s][order[i]];
    for (int t : f.truth[s]) actual += t;
    pre_sum += Q(hits, static_cast<long long>(k));
    if (actual > 0) {
      rec_sum += Q(hits, actual);
      ++rec_n;
    }
  }
  OracleRanking out;
  out.precision = pre_sum / static_cast<long long>(f.percent.size());
  if (rec_n) out.recall = rec_sum / rec_n;
  return out;
}

inline double to_double(const Q& q) {
  return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator());
}

/// Five samples over six variables, with an all-false row, a row with nothing
/// above most thresholds, a tie and values on both sides of every threshold.
inline MetricFixture five_by_six() {
  MetricFixture f;
  f.variables = {"C:a", "C:b", "C:c", "C:d", "C:e", "C:f"};
  f.percent = {{95, 15, 55, 35, 75, 5},
               {45, 45, 85, 25, 65, 12},
               {8, 3, 2, 6, 4, 1},
               {62, 38, 91, 77, 18, 54},
               {33, 73, 47, 88, 52, 26}};
  f.truth = {{1, 0, 1, 0, 0, 0},
             {0, 1, 1, 0, 1, 0},
             {0, 0, 0, 0, 0, 0},
             {1, 1, 1, 1, 0, 1},
             {0, 0, 1, 0, 0, 1}};
  return f;
}

}  // namespace testkit
