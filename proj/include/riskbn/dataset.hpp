#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace riskbn {

/// Variable-type code such as "P", "C" or a context tag like "CS".
class Tag {
 public:
  Tag() = default;
  explicit Tag(std::string code) : code_(std::move(code)) {}

  const std::string& code() const { return code_; }
  bool empty() const { return code_.empty(); }

  auto operator<=>(const Tag&) const = default;

 private:
  std::string code_;
};

namespace tags {
inline const Tag problem{"P"};
inline const Tag cause{"C"};
inline const Tag cause_category{"CC"};
inline const Tag effect{"E"};
inline const Tag effect_category{"EC"};
}  // namespace tags

/// True for P, C, CC, E and EC.
bool is_core_tag(const Tag& tag);

enum class SourceKind {
  answer_indicator,
  category_indicator,
  context_binary,
  context_categorical_level,
  context_ordinal_level,
  context_interval,
};

std::string_view to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view text);

/// One binary indicator column.
struct VariableDescriptor {
  std::string name;
  Tag tag;
  SourceKind kind = SourceKind::answer_indicator;
  std::string label;   // answer text, category name, level or interval text
  std::string factor;  // owning context factor; empty for P/C/E/CC/EC
  std::string level;   // categorical/ordinal level
  // Interval bounds as (lower, upper]. nullopt means unbounded.
  std::optional<double> lower;
  std::optional<double> upper;

  /// Context indicators are properties of the whole record, not of a triple.
  bool record_level() const;

  bool operator==(const VariableDescriptor&) const = default;
};

enum class FactorType { binary, categorical, ordinal, continuous };

std::string_view to_string(FactorType type);
FactorType factor_type_from_string(std::string_view text);

struct ContextFactor {
  std::string name;
  Tag tag;
  FactorType type = FactorType::binary;
  std::vector<std::string> levels;  // categorical and ordinal only
  int intervals = 0;                // continuous only

  bool operator==(const ContextFactor&) const = default;
};

/// Declared answer vocabulary of a survey.
struct Schema {
  std::vector<std::string> problems;
  std::vector<std::string> causes;
  std::vector<std::string> effects;
  // category name -> member causes (resp. effects)
  std::map<std::string, std::vector<std::string>> cause_categories;
  std::map<std::string, std::vector<std::string>> effect_categories;
  std::vector<ContextFactor> context;

  const ContextFactor* find_factor(std::string_view name) const;

  /// Throws SchemaError on duplicate names, clashing tags or bad factor declarations.
  void validate() const;

  bool operator==(const Schema&) const = default;
};

/// Explicit "unknown" is std::monostate.
using ContextValue = std::variant<std::monostate, bool, std::string, double>;

struct Triple {
  std::string problem;
  std::optional<std::string> cause;
  std::optional<std::string> effect;
  int rank = 1;

  bool operator==(const Triple&) const = default;
};

struct SurveyRecord {
  std::string id;
  std::map<std::string, ContextValue> context;
  std::vector<Triple> triples;

  bool operator==(const SurveyRecord&) const = default;
};

inline constexpr int kMinRank = 1;
inline constexpr int kMaxRank = 5;
inline constexpr std::size_t kMaxTriples = 5;

/// Weight of a triple reported at `rank`: 5 - rank.
inline constexpr int inverse_rank(int rank) { return kMaxRank - rank; }

/// Problems with one record, or nullopt when it is valid against `schema`.
/// Undeclared names are reported through `undeclared` so callers can raise SchemaError.
std::optional<std::string> check_record(const Schema& schema, const SurveyRecord& record,
                                        bool* undeclared = nullptr);

/// Equiprobable breakpoints of one continuous factor.
/// Interval i covers (breakpoints[i-1], breakpoints[i]]; the outer intervals are open-ended.
struct IntervalSpec {
  int requested_count = 0;
  std::vector<double> breakpoints;
  double observed_min = 0.0;
  double observed_max = 0.0;

  int interval_count() const { return static_cast<int>(breakpoints.size()) + 1; }
  int interval_of(double value) const;

  bool operator==(const IntervalSpec&) const = default;
};

struct DiscretizationSpec {
  std::map<std::string, IntervalSpec> factors;

  bool operator==(const DiscretizationSpec&) const = default;
};

/// Fits breakpoints at the i/k quantiles of the known values of `factor`.
/// With fewer than k distinct values, k is reduced to the number of distinct
/// values and a warning is appended. Throws DegenerateFactorError when fewer
/// than two distinct values are observed.
IntervalSpec fit_discretization(std::span<const SurveyRecord> records, std::string_view factor,
                                int k, std::vector<std::string>* warnings = nullptr);

/// Fits every continuous factor of the schema with its declared interval count.
DiscretizationSpec fit_discretizations(std::span<const SurveyRecord> records, const Schema& schema,
                                       std::vector<std::string>* warnings = nullptr);

/// Triple-bound variable indices (problem, cause, effect and their categories).
struct TripleRef {
  int rank = 1;
  std::vector<std::size_t> variables;

  bool operator==(const TripleRef&) const = default;
};

struct Provenance {
  std::string source_digest;
  DiscretizationSpec discretization;
  std::vector<std::string> warnings;

  bool operator==(const Provenance&) const = default;
};

enum class WeightMode { occurrence, inverse_rank };

std::string_view to_string(WeightMode mode);
WeightMode weight_mode_from_string(std::string_view text);

/// Immutable binary sample matrix plus the rank annotations of each record.
class BinaryDataset {
 public:
  BinaryDataset() = default;

  /// `samples` is row-major, one byte (0/1) per variable. `triples` and
  /// `unknown_factors` may be empty or have one entry per sample.
  BinaryDataset(std::vector<VariableDescriptor> variables, std::vector<std::uint8_t> samples,
                std::vector<std::string> record_ids = {},
                std::vector<std::vector<TripleRef>> triples = {},
                std::vector<std::vector<std::string>> unknown_factors = {},
                Provenance provenance = {});

  std::size_t variable_count() const { return variables_.size(); }
  std::size_t sample_count() const { return record_ids_.size(); }
  bool empty() const { return record_ids_.empty(); }

  std::span<const VariableDescriptor> variables() const { return variables_; }
  const VariableDescriptor& variable(std::size_t index) const { return variables_.at(index); }
  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws SchemaError when the name is absent.
  std::size_t index_of(std::string_view name) const;
  std::vector<std::size_t> indices_with_tag(const Tag& tag) const;
  std::vector<Tag> tags() const;

  bool value(std::size_t sample, std::size_t variable) const {
    return samples_[sample * variables_.size() + variable] != 0;
  }
  std::span<const std::uint8_t> sample(std::size_t index) const {
    return {samples_.data() + index * variables_.size(), variables_.size()};
  }
  std::span<const std::uint8_t> raw_samples() const { return samples_; }

  const std::string& record_id(std::size_t sample) const { return record_ids_.at(sample); }
  std::span<const TripleRef> triples(std::size_t sample) const;
  std::span<const std::string> unknown_factors(std::size_t sample) const;
  bool has_rank_annotations() const { return !triples_.empty(); }

  const Provenance& provenance() const { return provenance_; }

  /// Rows in the given order; provenance is kept.
  BinaryDataset subset(std::span<const std::size_t> rows) const;

  bool operator==(const BinaryDataset&) const = default;

 private:
  std::vector<VariableDescriptor> variables_;
  std::vector<std::uint8_t> samples_;
  std::vector<std::string> record_ids_;
  std::vector<std::vector<TripleRef>> triples_;
  std::vector<std::vector<std::string>> unknown_factors_;
  Provenance provenance_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

/// Builds the indicator columns defined by the schema. Unknown context values
/// leave all of that factor's indicators false and are listed per record.
BinaryDataset binarize(std::span<const SurveyRecord> records, const Schema& schema,
                       const DiscretizationSpec& disc, std::string source_digest = {});

/// Ordered variable list `binarize` would produce.
std::vector<VariableDescriptor> describe_variables(const Schema& schema,
                                                   const DiscretizationSpec& disc);

/// Support of one variable.
///
/// occurrence: number of records in which the variable is true.
/// inverse_rank: sum of 5 - r over the triples in which the variable appears.
/// A context indicator appears in every triple of the records where it is true.
double weighted_count(const BinaryDataset& ds, std::size_t variable, WeightMode mode);

/// Support of a pair: records where both are true, or the inverse-rank sum over
/// triples in which both appear.
double weighted_count(const BinaryDataset& ds, std::size_t a, std::size_t b, WeightMode mode);

}  // namespace riskbn
