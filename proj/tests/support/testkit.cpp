#include "testkit.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <stdexcept>

namespace testkit {

using namespace riskbn;

VariableDescriptor var(const std::string& name, const Tag& tag) {
  VariableDescriptor v;
  v.name = name;
  v.tag = tag;
  v.label = name;
  return v;
}

BayesianNetwork make_network(const std::vector<std::string>& names,
                             const std::vector<std::pair<std::string, std::string>>& edges,
                             const std::vector<std::vector<double>>& tables) {
  std::vector<VariableDescriptor> nodes;
  std::map<std::string, std::size_t> index;
  for (const auto& n : names) {
    index[n] = nodes.size();
    nodes.push_back(var(n));
  }
  std::vector<Edge> es;
  for (const auto& [a, b] : edges) es.push_back({index.at(a), index.at(b), 1.0});
  Dag dag(std::move(nodes), std::move(es));
  std::vector<Cpt> cpts;
  for (std::size_t i = 0; i < names.size(); ++i) cpts.push_back({i, dag.parents(i), tables.at(i)});
  return BayesianNetwork(std::move(dag), std::move(cpts), {0, 0.0, WeightMode::occurrence});
}

BayesianNetwork random_network(std::mt19937_64& rng, std::size_t n, std::size_t max_parents) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<VariableDescriptor> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "X%02zu", i);
    nodes.push_back(var(buf));
  }
  std::vector<Edge> edges;
  for (std::size_t pos = 1; pos < n; ++pos) {
    std::size_t added = 0;
    for (std::size_t q = 0; q < pos && added < max_parents; ++q) {
      if (unit(rng) < 0.4) {
        edges.push_back({order[q], order[pos], 1.0});
        ++added;
      }
    }
  }
  Dag dag(nodes, edges);
  std::vector<Cpt> truth;
  for (std::size_t i = 0; i < n; ++i) {
    Cpt c{i, dag.parents(i), {}};
    for (std::size_t k = 0; k < (std::size_t{1} << c.parents.size()); ++k) {
      c.table.push_back(0.05 + 0.9 * unit(rng));
    }
    truth.push_back(std::move(c));
  }
  BayesianNetwork generator(dag, std::move(truth), {});
  const auto data = forward_sample(generator, 30, rng());
  return fit_mle(dag, data, 1.0, WeightMode::occurrence);
}

namespace {

double naive_joint(const BayesianNetwork& bn, std::uint64_t bits) {
  double p = 1.0;
  for (const auto& c : bn.cpts()) {
    std::size_t config = 0;
    for (std::size_t k = 0; k < c.parents.size(); ++k) {
      if ((bits >> c.parents[k]) & 1) config |= std::size_t{1} << k;
    }
    const double t = c.table[config];
    p *= ((bits >> c.node) & 1) ? t : 1.0 - t;
  }
  return p;
}

}  // namespace

std::vector<double> naive_posteriors(const BayesianNetwork& bn, const Evidence& evidence,
                                     const std::vector<std::string>& targets, double* z_out) {
  const std::size_t n = bn.size();
  std::vector<std::pair<std::size_t, bool>> ev;
  for (const auto& [name, value] : evidence.values) ev.push_back({*bn.dag().find(name), value});
  std::vector<std::size_t> tix;
  for (const auto& t : targets) tix.push_back(*bn.dag().find(t));

  double z = 0.0;
  std::vector<double> mass(targets.size(), 0.0);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    bool consistent = true;
    for (const auto& [v, value] : ev) {
      if ((((bits >> v) & 1) != 0) != value) {
        consistent = false;
        break;
      }
    }
    if (!consistent) continue;
    const double p = naive_joint(bn, bits);
    z += p;
    for (std::size_t i = 0; i < tix.size(); ++i) {
      if ((bits >> tix[i]) & 1) mass[i] += p;
    }
  }
  if (z_out) *z_out = z;
  for (auto& m : mass) m = z > 0.0 ? m / z : 0.0;
  return mass;
}

double naive_total_mass(const BayesianNetwork& bn) {
  double total = 0.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << bn.size()); ++bits) {
    total += naive_joint(bn, bits);
  }
  return total;
}

Evidence random_evidence(std::mt19937_64& rng, const BayesianNetwork& bn,
                         const std::vector<std::string>& targets, double fraction) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Evidence e;
  for (const auto& v : bn.dag().nodes()) {
    if (std::find(targets.begin(), targets.end(), v.name) != targets.end()) continue;
    if (unit(rng) < fraction) e.set(v.name, unit(rng) < 0.5);
  }
  return e;
}

// ---------------------------------------------------------------------------
// DOT subset checker

namespace {

struct Token {
  enum Kind { id, punct, arrow, undirected, end } kind;
  std::string text;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '"') {
      std::string text;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == '\\' && i + 1 < s.size()) {
          text += s[i + 1];
          i += 2;
        } else if (s[i] == '"') {
          closed = true;
          ++i;
          break;
        } else {
          text += s[i++];
        }
      }
      if (!closed) throw std::runtime_error("unterminated string");
      out.push_back({Token::id, text});
    } else if (c == '-' && i + 1 < s.size() && (s[i + 1] == '>' || s[i + 1] == '-')) {
      out.push_back({s[i + 1] == '>' ? Token::arrow : Token::undirected, s.substr(i, 2)});
      i += 2;
    } else if (std::string("{}[]=;,").find(c) != std::string::npos) {
      out.push_back({Token::punct, std::string(1, c)});
      ++i;
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' ||
                              s[j] == '.' || s[j] == '-')) {
        if (s[j] == '-' && j + 1 < s.size() && (s[j + 1] == '>' || s[j + 1] == '-')) break;
        ++j;
      }
      const std::string text = s.substr(i, j - i);
      const bool numeral = std::all_of(text.begin(), text.end(), [](char ch) {
        return std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-';
      });
      const bool ident = !std::isdigit(static_cast<unsigned char>(text[0])) &&
                         std::all_of(text.begin(), text.end(), [](char ch) {
                           return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
                         });
      if (!numeral && !ident) throw std::runtime_error("bad identifier '" + text + "'");
      out.push_back({Token::id, text});
      i = j;
    } else {
      throw std::runtime_error(std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Token::end, ""});
  return out;
}

struct DotParser {
  std::vector<Token> toks;
  std::size_t pos = 0;
  DotCheck result;

  const Token& peek() const { return toks[pos]; }
  bool is(const char* p) const { return peek().kind == Token::punct && peek().text == p; }
  void expect(const char* p) {
    if (!is(p)) throw std::runtime_error(std::string("expected '") + p + "' got '" + peek().text + "'");
    ++pos;
  }
  std::string id() {
    if (peek().kind != Token::id) throw std::runtime_error("expected identifier, got '" + peek().text + "'");
    return toks[pos++].text;
  }

  // Returns true when a penwidth attribute was seen.
  bool attr_lists() {
    bool pen = false;
    while (is("[")) {
      ++pos;
      while (!is("]")) {
        const std::string key = id();
        expect("=");
        id();
        if (key == "penwidth") pen = true;
        if (is(",") || is(";")) ++pos;
      }
      expect("]");
    }
    return pen;
  }

  void statement() {
    const Token& t = peek();
    if (t.kind == Token::id && (t.text == "graph" || t.text == "node" || t.text == "edge") &&
        toks[pos + 1].kind == Token::punct && toks[pos + 1].text == "[") {
      ++pos;
      attr_lists();
      return;
    }
    id();
    if (is("=")) {
      ++pos;
      id();
      return;
    }
    if (peek().kind == Token::undirected) throw std::runtime_error("'--' in a digraph");
    if (peek().kind == Token::arrow) {
      while (peek().kind == Token::arrow) {
        ++pos;
        id();
      }
      ++result.edge_statements;
      if (attr_lists()) ++result.penwidth_edges;
      return;
    }
    ++result.node_statements;
    attr_lists();
  }

  void parse() {
    std::string kw = id();
    if (kw == "strict") kw = id();
    if (kw != "digraph") throw std::runtime_error("expected digraph");
    if (peek().kind == Token::id) ++pos;
    expect("{");
    while (!is("}")) {
      if (peek().kind == Token::end) throw std::runtime_error("missing '}'");
      statement();
      if (is(";")) ++pos;
    }
    expect("}");
    if (peek().kind != Token::end) throw std::runtime_error("trailing text after graph");
  }
};

}  // namespace

DotCheck check_dot(const std::string& text) {
  DotParser p;
  try {
    p.toks = tokenize(text);
    p.parse();
    p.result.ok = true;
  } catch (const std::exception& e) {
    p.result.ok = false;
    p.result.error = e.what();
  }
  return p.result;
}

// ---------------------------------------------------------------------------
// Schemas and generators

namespace {

std::vector<std::string> numbered(const std::string& stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s %03zu", stem.c_str(), i);
    out.push_back(buf);
  }
  return out;
}

ContextFactor factor(std::string name, std::string tag, FactorType type,
                     std::vector<std::string> levels = {}, int intervals = 0) {
  return {std::move(name), Tag(std::move(tag)), type, std::move(levels), intervals};
}

}  // namespace

Schema layout_2018_schema() {
  Schema s;
  s.problems = numbered("problem", 20);
  s.causes = numbered("cause", 120);
  s.effects = numbered("effect", 55);
  s.context = {
      factor("team size", "CS", FactorType::continuous, {}, 6),
      factor("development method", "CDM", FactorType::ordinal,
             {"agile", "rather agile", "hybrid", "rather plan-driven", "plan-driven"}),
      factor("distributed project", "CD", FactorType::binary),
      factor("customer relation", "CR", FactorType::ordinal,
             {"very bad", "bad", "neutral", "good", "very good"}),
      factor("system type", "CT", FactorType::categorical,
             {"embedded", "business information", "hybrid"}),
  };
  return s;
}

Schema layout_2014_schema() {
  Schema s;
  s.problems = numbered("problem", 21);
  s.causes = numbered("cause", 92);
  s.effects = numbered("effect", 49);
  const std::vector<std::string> cc = {"Input", "Method", "Organization", "People", "Tools"};
  const std::vector<std::string> ec = {"Implementation", "Organization", "Product", "Customer",
                                       "Validation"};
  for (std::size_t i = 0; i < s.causes.size(); ++i) s.cause_categories[cc[i % 5]].push_back(s.causes[i]);
  for (std::size_t i = 0; i < s.effects.size(); ++i) {
    s.effect_categories[ec[i % 5]].push_back(s.effects[i]);
  }
  s.context = {
      factor("company size", "CS", FactorType::categorical,
             {"1-10", "11-50", "51-250", "251-500", "501-1000", "1001-2000", "2001-10000", ">10000"}),
      factor("development method", "CDM", FactorType::categorical,
             {"Waterfall", "V-Model XT", "Scrum", "XP", "RUP"}),
      factor("distributed projects", "CD", FactorType::binary),
  };
  return s;
}

std::vector<SurveyRecord> random_records(std::mt19937_64& rng, const Schema& schema,
                                         std::size_t count, double unknown_rate) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](const std::vector<std::string>& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  std::vector<SurveyRecord> out;
  for (std::size_t r = 0; r < count; ++r) {
    SurveyRecord rec;
    rec.id = "r" + std::to_string(r + 1);
    for (const auto& f : schema.context) {
      if (unit(rng) < unknown_rate) {
        rec.context[f.name] = std::monostate{};
        continue;
      }
      switch (f.type) {
        case FactorType::binary: rec.context[f.name] = unit(rng) < 0.5; break;
        case FactorType::categorical:
        case FactorType::ordinal: rec.context[f.name] = pick(f.levels); break;
        case FactorType::continuous:
          rec.context[f.name] = static_cast<double>(std::uniform_int_distribution<int>(1, 200)(rng));
          break;
      }
    }
    const int triples = unit(rng) < 0.8 ? 5 : std::uniform_int_distribution<int>(0, 4)(rng);
    std::vector<int> ranks = {1, 2, 3, 4, 5};
    std::shuffle(ranks.begin(), ranks.end(), rng);
    for (int t = 0; t < triples; ++t) {
      Triple tr;
      tr.problem = pick(schema.problems);
      if (unit(rng) < 0.9) tr.cause = pick(schema.causes);
      if (unit(rng) < 0.9) tr.effect = pick(schema.effects);
      tr.rank = ranks[static_cast<std::size_t>(t)];
      rec.triples.push_back(std::move(tr));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Schema problem_cause_schema(std::size_t problems) {
  Schema s;
  for (std::size_t j = 0; j < problems; ++j) s.problems.push_back("p" + std::to_string(j));
  for (std::size_t j = 0; j < 2 * problems; ++j) s.causes.push_back("c" + std::to_string(j));
  s.effects = {"e0", "e1"};
  return s;
}

std::vector<SurveyRecord> problem_cause_records(std::mt19937_64& rng, std::size_t problems,
                                                std::size_t count) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SurveyRecord> out;
  for (std::size_t r = 0; r < count; ++r) {
    SurveyRecord rec;
    rec.id = "g" + std::to_string(r + 1);
    std::vector<std::size_t> chosen(problems);
    std::iota(chosen.begin(), chosen.end(), 0);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    for (int t = 0; t < 3; ++t) {
      const std::size_t j = chosen[static_cast<std::size_t>(t)];
      const double u = unit(rng);
      std::size_t cause = 2 * j;
      if (u > 0.95) {
        cause = std::uniform_int_distribution<std::size_t>(0, 2 * problems - 1)(rng);
      } else if (u > 0.8) {
        cause = 2 * j + 1;
      }
      Triple tr;
      tr.problem = "p" + std::to_string(j);
      tr.cause = "c" + std::to_string(cause);
      tr.effect = unit(rng) < 0.5 ? "e0" : "e1";
      tr.rank = t + 1;
      rec.triples.push_back(std::move(tr));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace testkit
