#include "riskbn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "riskbn/error.hpp"

namespace riskbn {

bool is_core_tag(const Tag& tag) {
  return tag == tags::problem || tag == tags::cause || tag == tags::effect ||
         tag == tags::cause_category || tag == tags::effect_category;
}

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::answer_indicator: return "answer-indicator";
    case SourceKind::category_indicator: return "category-indicator";
    case SourceKind::context_binary: return "context-binary";
    case SourceKind::context_categorical_level: return "context-categorical-level";
    case SourceKind::context_ordinal_level: return "context-ordinal-level";
    case SourceKind::context_interval: return "context-interval";
  }
  return "?";
}

SourceKind source_kind_from_string(std::string_view text) {
  for (auto kind : {SourceKind::answer_indicator, SourceKind::category_indicator,
                    SourceKind::context_binary, SourceKind::context_categorical_level,
                    SourceKind::context_ordinal_level, SourceKind::context_interval}) {
    if (to_string(kind) == text) return kind;
  }
  throw SchemaError("unknown variable kind '" + std::string(text) + "'");
}

bool VariableDescriptor::record_level() const {
  return kind != SourceKind::answer_indicator && kind != SourceKind::category_indicator;
}

std::string_view to_string(FactorType type) {
  switch (type) {
    case FactorType::binary: return "binary";
    case FactorType::categorical: return "categorical";
    case FactorType::ordinal: return "ordinal";
    case FactorType::continuous: return "continuous";
  }
  return "?";
}

FactorType factor_type_from_string(std::string_view text) {
  for (auto type : {FactorType::binary, FactorType::categorical, FactorType::ordinal,
                    FactorType::continuous}) {
    if (to_string(type) == text) return type;
  }
  throw SchemaError("unknown context factor type '" + std::string(text) + "'");
}

std::string_view to_string(WeightMode mode) {
  return mode == WeightMode::occurrence ? "occurrence" : "inverse-rank";
}

WeightMode weight_mode_from_string(std::string_view text) {
  if (text == "occurrence") return WeightMode::occurrence;
  if (text == "inverse-rank") return WeightMode::inverse_rank;
  throw SpecError("unknown weight mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Schema

const ContextFactor* Schema::find_factor(std::string_view name) const {
  for (const auto& f : context) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

namespace {

void require_unique(const std::vector<std::string>& names, std::string_view what) {
  std::set<std::string_view> seen;
  for (const auto& n : names) {
    if (n.empty()) throw SchemaError("empty " + std::string(what) + " name");
    if (!seen.insert(n).second) {
      throw SchemaError("duplicate " + std::string(what) + " '" + n + "'");
    }
  }
}

void check_membership(const std::map<std::string, std::vector<std::string>>& categories,
                      const std::vector<std::string>& members, std::string_view what) {
  std::set<std::string_view> declared(members.begin(), members.end());
  for (const auto& [category, list] : categories) {
    for (const auto& m : list) {
      if (!declared.contains(m)) {
        throw SchemaError(std::string(what) + " category '" + category +
                          "' lists undeclared member '" + m + "'");
      }
    }
  }
}

}  // namespace

void Schema::validate() const {
  require_unique(problems, "problem");
  require_unique(causes, "cause");
  require_unique(effects, "effect");
  check_membership(cause_categories, causes, "cause");
  check_membership(effect_categories, effects, "effect");

  std::set<std::string> factor_names;
  std::set<Tag> context_tags;
  for (const auto& f : context) {
    if (f.name.empty()) throw SchemaError("context factor without a name");
    if (!factor_names.insert(f.name).second) {
      throw SchemaError("duplicate context factor '" + f.name + "'");
    }
    if (f.tag.empty()) throw SchemaError("context factor '" + f.name + "' has no tag");
    if (is_core_tag(f.tag)) {
      throw SchemaError("context factor '" + f.name + "' reuses core tag " + f.tag.code());
    }
    if (!context_tags.insert(f.tag).second) {
      throw SchemaError("tag " + f.tag.code() + " assigned to more than one context factor");
    }
    switch (f.type) {
      case FactorType::categorical:
      case FactorType::ordinal:
        if (f.levels.empty()) throw SchemaError("factor '" + f.name + "' declares no levels");
        require_unique(f.levels, "level");
        break;
      case FactorType::continuous:
        if (f.intervals < 2) {
          throw SchemaError("continuous factor '" + f.name + "' needs at least 2 intervals");
        }
        break;
      case FactorType::binary:
        break;
    }
  }
}

std::optional<std::string> check_record(const Schema& schema, const SurveyRecord& record,
                                        bool* undeclared) {
  auto fail_undeclared = [&](std::string msg) -> std::optional<std::string> {
    if (undeclared) *undeclared = true;
    return msg;
  };
  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };

  if (record.triples.size() > kMaxTriples) {
    return "more than " + std::to_string(kMaxTriples) + " triples";
  }
  std::set<int> ranks;
  for (const auto& t : record.triples) {
    if (!contains(schema.problems, t.problem)) {
      return fail_undeclared("undeclared problem '" + t.problem + "'");
    }
    if (t.cause && !contains(schema.causes, *t.cause)) {
      return fail_undeclared("undeclared cause '" + *t.cause + "'");
    }
    if (t.effect && !contains(schema.effects, *t.effect)) {
      return fail_undeclared("undeclared effect '" + *t.effect + "'");
    }
    if (t.rank < kMinRank || t.rank > kMaxRank) {
      return "rank " + std::to_string(t.rank) + " outside 1..5";
    }
    if (!ranks.insert(t.rank).second) return "duplicate rank " + std::to_string(t.rank);
  }

  for (const auto& [name, value] : record.context) {
    const ContextFactor* f = schema.find_factor(name);
    if (!f) return fail_undeclared("undeclared context factor '" + name + "'");
    if (std::holds_alternative<std::monostate>(value)) continue;
    switch (f->type) {
      case FactorType::binary:
        if (!std::holds_alternative<bool>(value)) return "factor '" + name + "' expects a boolean";
        break;
      case FactorType::categorical:
      case FactorType::ordinal: {
        const auto* level = std::get_if<std::string>(&value);
        if (!level) return "factor '" + name + "' expects a level label";
        if (!contains(f->levels, *level)) {
          return "factor '" + name + "' has no level '" + *level + "'";
        }
        break;
      }
      case FactorType::continuous: {
        const auto* x = std::get_if<double>(&value);
        if (!x) return "factor '" + name + "' expects a number";
        if (!std::isfinite(*x)) return "factor '" + name + "' value is not finite";
        break;
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Discretization

int IntervalSpec::interval_of(double value) const {
  // Values equal to a breakpoint belong to the lower interval.
  auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), value);
  return static_cast<int>(it - breakpoints.begin());
}

IntervalSpec fit_discretization(std::span<const SurveyRecord> records, std::string_view factor,
                                int k, std::vector<std::string>* warnings) {
  if (k < 2) throw ConfigError("interval count must be at least 2");
  std::vector<double> values;
  for (const auto& r : records) {
    auto it = r.context.find(std::string(factor));
    if (it == r.context.end() || std::holds_alternative<std::monostate>(it->second)) continue;
    const auto* x = std::get_if<double>(&it->second);
    if (!x) throw ContractError("factor '" + std::string(factor) + "' is not continuous");
    values.push_back(*x);
  }
  std::sort(values.begin(), values.end());

  std::vector<double> distinct = values;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    throw DegenerateFactorError("factor '" + std::string(factor) + "' has " +
                                std::to_string(distinct.size()) +
                                " distinct value(s); cannot form intervals");
  }

  IntervalSpec spec;
  spec.requested_count = k;
  spec.observed_min = values.front();
  spec.observed_max = values.back();

  const std::size_t m = values.size();
  std::vector<double> candidates;
  if (distinct.size() <= static_cast<std::size_t>(k)) {
    if (distinct.size() < static_cast<std::size_t>(k) && warnings) {
      warnings->push_back("factor '" + std::string(factor) + "': only " +
                          std::to_string(distinct.size()) + " distinct values, using " +
                          std::to_string(distinct.size()) + " intervals instead of " +
                          std::to_string(k));
    }
    for (std::size_t i = 1; i < distinct.size(); ++i) {
      candidates.push_back(0.5 * (distinct[i - 1] + distinct[i]));
    }
  } else {
    for (int i = 1; i < k; ++i) {
      std::size_t pos = (static_cast<std::size_t>(i) * m + static_cast<std::size_t>(k) / 2) /
                        static_cast<std::size_t>(k);
      pos = std::clamp<std::size_t>(pos, 1, m - 1);
      const double lo = values[pos - 1];
      const double hi = values[pos];
      candidates.push_back(lo == hi ? lo : 0.5 * (lo + hi));
    }
  }

  // Drop breakpoints that would leave an interval empty (possible with ties).
  double prev = -INFINITY;
  for (double b : candidates) {
    if (!spec.breakpoints.empty() && b <= spec.breakpoints.back()) continue;
    const bool occupied = std::any_of(values.begin(), values.end(),
                                      [&](double x) { return x > prev && x <= b; });
    if (occupied && b < spec.observed_max) {
      spec.breakpoints.push_back(b);
      prev = b;
    }
  }
  if (spec.interval_count() < std::min<int>(k, static_cast<int>(distinct.size())) && warnings) {
    warnings->push_back("factor '" + std::string(factor) + "': ties reduced " +
                        std::to_string(k) + " intervals to " +
                        std::to_string(spec.interval_count()));
  }
  return spec;
}

DiscretizationSpec fit_discretizations(std::span<const SurveyRecord> records, const Schema& schema,
                                       std::vector<std::string>* warnings) {
  DiscretizationSpec disc;
  for (const auto& f : schema.context) {
    if (f.type != FactorType::continuous) continue;
    disc.factors.emplace(f.name, fit_discretization(records, f.name, f.intervals, warnings));
  }
  return disc;
}

// ---------------------------------------------------------------------------
// BinaryDataset

BinaryDataset::BinaryDataset(std::vector<VariableDescriptor> variables,
                             std::vector<std::uint8_t> samples,
                             std::vector<std::string> record_ids,
                             std::vector<std::vector<TripleRef>> triples,
                             std::vector<std::vector<std::string>> unknown_factors,
                             Provenance provenance)
    : variables_(std::move(variables)),
      samples_(std::move(samples)),
      record_ids_(std::move(record_ids)),
      triples_(std::move(triples)),
      unknown_factors_(std::move(unknown_factors)),
      provenance_(std::move(provenance)) {
  const std::size_t n = variables_.size();
  if (n == 0 ? !samples_.empty() : samples_.size() % n != 0) {
    throw ContractError("sample matrix size is not a multiple of the variable count");
  }
  const std::size_t m = n == 0 ? record_ids_.size() : samples_.size() / n;
  if (record_ids_.empty() && m > 0) {
    record_ids_.reserve(m);
    for (std::size_t i = 0; i < m; ++i) record_ids_.push_back(std::to_string(i));
  }
  if (record_ids_.size() != m) throw ContractError("record id count does not match samples");
  if (!triples_.empty() && triples_.size() != m) {
    throw ContractError("triple annotations do not match samples");
  }
  if (!unknown_factors_.empty() && unknown_factors_.size() != m) {
    throw ContractError("unknown flags do not match samples");
  }
  if (std::all_of(unknown_factors_.begin(), unknown_factors_.end(),
                  [](const auto& u) { return u.empty(); })) {
    unknown_factors_.clear();
  }
  for (auto v : samples_) {
    if (v > 1) throw ContractError("sample entries must be 0 or 1");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!by_name_.emplace(variables_[i].name, i).second) {
      throw SchemaError("duplicate variable name '" + variables_[i].name + "'");
    }
  }
  for (const auto& row : triples_) {
    for (const auto& t : row) {
      for (auto v : t.variables) {
        if (v >= n) throw ContractError("triple references variable out of range");
      }
    }
  }
}

std::optional<std::size_t> BinaryDataset::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::size_t BinaryDataset::index_of(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw SchemaError("dataset has no variable '" + std::string(name) + "'");
  return *idx;
}

std::vector<std::size_t> BinaryDataset::indices_with_tag(const Tag& tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].tag == tag) out.push_back(i);
  }
  return out;
}

std::vector<Tag> BinaryDataset::tags() const {
  std::vector<Tag> out;
  for (const auto& v : variables_) {
    if (std::find(out.begin(), out.end(), v.tag) == out.end()) out.push_back(v.tag);
  }
  return out;
}

std::span<const TripleRef> BinaryDataset::triples(std::size_t sample) const {
  if (triples_.empty()) return {};
  return triples_.at(sample);
}

std::span<const std::string> BinaryDataset::unknown_factors(std::size_t sample) const {
  if (unknown_factors_.empty()) return {};
  return unknown_factors_.at(sample);
}

BinaryDataset BinaryDataset::subset(std::span<const std::size_t> rows) const {
  const std::size_t n = variables_.size();
  std::vector<std::uint8_t> samples;
  samples.reserve(rows.size() * n);
  std::vector<std::string> ids;
  std::vector<std::vector<TripleRef>> triples;
  std::vector<std::vector<std::string>> unknown;
  for (auto r : rows) {
    if (r >= sample_count()) throw ContractError("row index out of range");
    auto s = sample(r);
    samples.insert(samples.end(), s.begin(), s.end());
    ids.push_back(record_ids_[r]);
    if (!triples_.empty()) triples.push_back(triples_[r]);
    if (!unknown_factors_.empty()) unknown.push_back(unknown_factors_[r]);
  }
  return BinaryDataset(variables_, std::move(samples), std::move(ids), std::move(triples),
                       std::move(unknown), provenance_);
}

// ---------------------------------------------------------------------------
// Binarization

namespace {

std::string format_bound(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string interval_label(const std::string& factor, std::optional<double> lo,
                           std::optional<double> hi) {
  if (!lo && !hi) return factor;
  if (!lo) return factor + " <= " + format_bound(*hi);
  if (!hi) return factor + " > " + format_bound(*lo);
  return factor + " in (" + format_bound(*lo) + ", " + format_bound(*hi) + "]";
}

VariableDescriptor answer(const Tag& tag, const std::string& name, SourceKind kind) {
  VariableDescriptor v;
  v.name = tag.code() + ":" + name;
  v.tag = tag;
  v.kind = kind;
  v.label = name;
  return v;
}

}  // namespace

std::vector<VariableDescriptor> describe_variables(const Schema& schema,
                                                   const DiscretizationSpec& disc) {
  std::vector<VariableDescriptor> vars;
  for (const auto& p : schema.problems) {
    vars.push_back(answer(tags::problem, p, SourceKind::answer_indicator));
  }
  for (const auto& c : schema.causes) {
    vars.push_back(answer(tags::cause, c, SourceKind::answer_indicator));
  }
  for (const auto& e : schema.effects) {
    vars.push_back(answer(tags::effect, e, SourceKind::answer_indicator));
  }
  for (const auto& [cat, members] : schema.cause_categories) {
    vars.push_back(answer(tags::cause_category, cat, SourceKind::category_indicator));
  }
  for (const auto& [cat, members] : schema.effect_categories) {
    vars.push_back(answer(tags::effect_category, cat, SourceKind::category_indicator));
  }
  for (const auto& f : schema.context) {
    const std::string prefix = f.tag.code() + ":" + f.name;
    switch (f.type) {
      case FactorType::binary: {
        VariableDescriptor v;
        v.name = prefix;
        v.tag = f.tag;
        v.kind = SourceKind::context_binary;
        v.label = f.name;
        v.factor = f.name;
        vars.push_back(std::move(v));
        break;
      }
      case FactorType::categorical:
      case FactorType::ordinal:
        for (const auto& level : f.levels) {
          VariableDescriptor v;
          v.name = prefix + "=" + level;
          v.tag = f.tag;
          v.kind = f.type == FactorType::categorical ? SourceKind::context_categorical_level
                                                     : SourceKind::context_ordinal_level;
          v.label = f.name + " = " + level;
          v.factor = f.name;
          v.level = level;
          vars.push_back(std::move(v));
        }
        break;
      case FactorType::continuous: {
        auto it = disc.factors.find(f.name);
        if (it == disc.factors.end()) {
          throw ContractError("no discretization fitted for factor '" + f.name + "'");
        }
        const auto& bps = it->second.breakpoints;
        for (std::size_t i = 0; i <= bps.size(); ++i) {
          VariableDescriptor v;
          v.tag = f.tag;
          v.kind = SourceKind::context_interval;
          v.factor = f.name;
          if (i > 0) v.lower = bps[i - 1];
          if (i < bps.size()) v.upper = bps[i];
          v.label = interval_label(f.name, v.lower, v.upper);
          v.name = prefix + "#" + std::to_string(i + 1);
          vars.push_back(std::move(v));
        }
        break;
      }
    }
  }
  return vars;
}

BinaryDataset binarize(std::span<const SurveyRecord> records, const Schema& schema,
                       const DiscretizationSpec& disc, std::string source_digest) {
  auto vars = describe_variables(schema, disc);
  const std::size_t n = vars.size();
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(vars[i].name, i);
  auto idx = [&](const Tag& tag, const std::string& name) {
    return index.at(tag.code() + ":" + name);
  };

  std::map<std::string, std::vector<std::size_t>> cause_cats;
  std::map<std::string, std::vector<std::size_t>> effect_cats;
  for (const auto& [cat, members] : schema.cause_categories) {
    for (const auto& m : members) cause_cats[m].push_back(idx(tags::cause_category, cat));
  }
  for (const auto& [cat, members] : schema.effect_categories) {
    for (const auto& m : members) effect_cats[m].push_back(idx(tags::effect_category, cat));
  }

  std::vector<std::uint8_t> samples(records.size() * n, 0);
  std::vector<std::string> ids;
  std::vector<std::vector<TripleRef>> triples(records.size());
  std::vector<std::vector<std::string>> unknown(records.size());

  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    std::uint8_t* row = samples.data() + r * n;
    ids.push_back(rec.id);

    for (const auto& t : rec.triples) {
      TripleRef ref;
      ref.rank = t.rank;
      ref.variables.push_back(idx(tags::problem, t.problem));
      if (t.cause) {
        ref.variables.push_back(idx(tags::cause, *t.cause));
        if (auto it = cause_cats.find(*t.cause); it != cause_cats.end()) {
          ref.variables.insert(ref.variables.end(), it->second.begin(), it->second.end());
        }
      }
      if (t.effect) {
        ref.variables.push_back(idx(tags::effect, *t.effect));
        if (auto it = effect_cats.find(*t.effect); it != effect_cats.end()) {
          ref.variables.insert(ref.variables.end(), it->second.begin(), it->second.end());
        }
      }
      std::sort(ref.variables.begin(), ref.variables.end());
      ref.variables.erase(std::unique(ref.variables.begin(), ref.variables.end()),
                          ref.variables.end());
      for (auto v : ref.variables) row[v] = 1;
      triples[r].push_back(std::move(ref));
    }

    for (const auto& f : schema.context) {
      auto it = rec.context.find(f.name);
      if (it == rec.context.end() || std::holds_alternative<std::monostate>(it->second)) {
        unknown[r].push_back(f.name);
        continue;
      }
      const std::string prefix = f.tag.code() + ":" + f.name;
      const ContextValue& value = it->second;
      switch (f.type) {
        case FactorType::binary: {
          const bool* b = std::get_if<bool>(&value);
          if (!b) throw ContractError("factor '" + f.name + "' expects a boolean");
          row[index.at(prefix)] = *b ? 1 : 0;
          break;
        }
        case FactorType::categorical:
        case FactorType::ordinal: {
          const auto* level = std::get_if<std::string>(&value);
          if (!level) throw ContractError("factor '" + f.name + "' expects a level");
          auto lv = index.find(prefix + "=" + *level);
          if (lv == index.end()) throw ContractError("unknown level '" + *level + "'");
          row[lv->second] = 1;
          break;
        }
        case FactorType::continuous: {
          const double* x = std::get_if<double>(&value);
          if (!x) throw ContractError("factor '" + f.name + "' expects a number");
          const int bin = disc.factors.at(f.name).interval_of(*x);
          row[index.at(prefix + "#" + std::to_string(bin + 1))] = 1;
          break;
        }
      }
    }
  }

  Provenance prov;
  prov.source_digest = std::move(source_digest);
  prov.discretization = disc;
  return BinaryDataset(std::move(vars), std::move(samples), std::move(ids), std::move(triples),
                       std::move(unknown), std::move(prov));
}

// ---------------------------------------------------------------------------
// Support counting

namespace {

bool appears(const BinaryDataset& ds, std::size_t sample, const TripleRef& t, std::size_t v) {
  if (ds.variable(v).record_level()) return ds.value(sample, v);
  return std::binary_search(t.variables.begin(), t.variables.end(), v);
}

void require_annotations(const BinaryDataset& ds) {
  if (!ds.has_rank_annotations() && !ds.empty()) {
    throw ContractError("inverse-rank weighting needs a dataset with rank annotations");
  }
}

}  // namespace

double weighted_count(const BinaryDataset& ds, std::size_t variable, WeightMode mode) {
  if (variable >= ds.variable_count()) throw ContractError("variable index out of range");
  double total = 0.0;
  if (mode == WeightMode::occurrence) {
    for (std::size_t s = 0; s < ds.sample_count(); ++s) total += ds.value(s, variable) ? 1 : 0;
    return total;
  }
  require_annotations(ds);
  for (std::size_t s = 0; s < ds.sample_count(); ++s) {
    for (const auto& t : ds.triples(s)) {
      if (appears(ds, s, t, variable)) total += inverse_rank(t.rank);
    }
  }
  return total;
}

double weighted_count(const BinaryDataset& ds, std::size_t a, std::size_t b, WeightMode mode) {
  if (a >= ds.variable_count() || b >= ds.variable_count()) {
    throw ContractError("variable index out of range");
  }
  double total = 0.0;
  if (mode == WeightMode::occurrence) {
    for (std::size_t s = 0; s < ds.sample_count(); ++s) {
      total += (ds.value(s, a) && ds.value(s, b)) ? 1 : 0;
    }
    return total;
  }
  require_annotations(ds);
  for (std::size_t s = 0; s < ds.sample_count(); ++s) {
    for (const auto& t : ds.triples(s)) {
      if (appears(ds, s, t, a) && appears(ds, s, t, b)) total += inverse_rank(t.rank);
    }
  }
  return total;
}

}  // namespace riskbn
