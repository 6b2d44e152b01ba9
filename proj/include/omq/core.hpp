#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <boost/container_hash/hash.hpp>

namespace omq {

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

// Anything the caller did wrong: bad flags, malformed input, a query outside
// the supported class. The CLI maps the whole family to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ValidationError : public UsageError {
 public:
  using UsageError::UsageError;
};

class StructuralError : public UsageError {
 public:
  using UsageError::UsageError;
};

class UnsupportedModeError : public UsageError {
 public:
  using UsageError::UsageError;
};

// A configured bound (entailment depth, oracle size) was hit. Exit code 3.
class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// constants and relation symbols
// ---------------------------------------------------------------------------

using ConstId = std::int32_t;
using Tuple = std::vector<ConstId>;

// Tuple entries below zero are wildcards. A single-wildcard tuple uses -1 for
// every '*'; a multi-wildcard tuple uses -k for '*k'.
inline constexpr ConstId kStar = -1;
inline constexpr ConstId kUnset = INT32_MIN;

inline bool is_wild(ConstId v) { return v < 0 && v != kUnset; }
inline int wild_index(ConstId v) { return -v; }
inline ConstId make_wild(int k) { return -k; }

struct TupleHash {
  std::size_t operator()(const std::vector<ConstId>& t) const noexcept {
    return boost::hash_range(t.begin(), t.end());
  }
};

struct TupleHash64 {
  std::size_t operator()(const std::vector<std::int64_t>& t) const noexcept {
    return boost::hash_range(t.begin(), t.end());
  }
};

using TupleSet = std::unordered_set<Tuple, TupleHash>;

enum class ConstKind : std::uint8_t { Named, Null };

inline constexpr std::string_view kNullPrefix = "_:";

class ConstantPool {
 public:
  ConstId named(std::string_view label) {
    if (label.substr(0, kNullPrefix.size()) == kNullPrefix)
      throw UsageError("constant '" + std::string(label) + "' uses the reserved prefix _:");
    return intern(std::string(label), ConstKind::Named);
  }

  std::optional<ConstId> find(std::string_view label) const {
    auto it = by_label_.find(std::string(label));
    if (it == by_label_.end()) return std::nullopt;
    return it->second;
  }

  ConstId fresh_null() {
    for (;;) {
      std::string label = std::string(kNullPrefix) + "g" + std::to_string(++null_counter_);
      if (!by_label_.count(label)) return intern(std::move(label), ConstKind::Null);
    }
  }

  bool is_null(ConstId c) const { return kinds_[static_cast<std::size_t>(c)] == ConstKind::Null; }
  const std::string& label(ConstId c) const { return labels_[static_cast<std::size_t>(c)]; }
  std::size_t size() const { return labels_.size(); }

 private:
  ConstId intern(std::string label, ConstKind kind) {
    auto it = by_label_.find(label);
    if (it != by_label_.end()) return it->second;
    auto id = static_cast<ConstId>(labels_.size());
    by_label_.emplace(label, id);
    labels_.push_back(std::move(label));
    kinds_.push_back(kind);
    return id;
  }

  std::vector<std::string> labels_;
  std::vector<ConstKind> kinds_;
  std::unordered_map<std::string, ConstId> by_label_;
  int null_counter_ = 0;
};

struct RelationSymbol {
  std::string name;
  int arity = 0;
};

class Schema {
 public:
  // Returns the id of `name`, registering it on first sight. A second use
  // with a different arity is an error.
  int intern(const std::string& name, int arity) {
    auto it = by_name_.find(name);
    if (it != by_name_.end()) {
      if (symbols_[static_cast<std::size_t>(it->second)].arity != arity)
        throw UsageError("relation " + name + " used with arity " + std::to_string(arity) +
                         " but declared with arity " +
                         std::to_string(symbols_[static_cast<std::size_t>(it->second)].arity));
      return it->second;
    }
    int id = static_cast<int>(symbols_.size());
    symbols_.push_back({name, arity});
    by_name_.emplace(name, id);
    return id;
  }

  // Registers a symbol whose name must not clash with anything existing.
  int fresh(const std::string& base, int arity) {
    std::string name = base;
    for (int k = 2; by_name_.count(name); ++k) name = base + "#" + std::to_string(k);
    return intern(name, arity);
  }

  std::optional<int> find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  const RelationSymbol& operator[](int id) const { return symbols_[static_cast<std::size_t>(id)]; }
  int arity(int id) const { return symbols_[static_cast<std::size_t>(id)].arity; }
  const std::string& name(int id) const { return symbols_[static_cast<std::size_t>(id)].name; }
  int size() const { return static_cast<int>(symbols_.size()); }

 private:
  std::vector<RelationSymbol> symbols_;
  std::unordered_map<std::string, int> by_name_;
};

// Every object that mentions relations or constants refers to one shared
// vocabulary.
struct Vocabulary {
  Schema rels;
  ConstantPool consts;
};

// ---------------------------------------------------------------------------
// facts and databases
// ---------------------------------------------------------------------------

struct Fact {
  int rel = 0;
  Tuple args;
  friend bool operator==(const Fact&, const Fact&) = default;
  friend auto operator<=>(const Fact&, const Fact&) = default;
};

struct FactHash {
  std::size_t operator()(const Fact& f) const noexcept {
    std::size_t h = std::hash<int>{}(f.rel);
    boost::hash_combine(h, boost::hash_range(f.args.begin(), f.args.end()));
    return h;
  }
};

class Database {
 public:
  // Inserts unless present; returns the index of the fact either way.
  std::pair<int, bool> insert(Fact f) {
    auto it = index_.find(f);
    if (it != index_.end()) return {it->second, false};
    int id = static_cast<int>(facts_.size());
    index_.emplace(f, id);
    facts_.push_back(std::move(f));
    return {id, true};
  }
  bool add(Fact f) { return insert(std::move(f)).second; }

  bool contains(const Fact& f) const { return index_.count(f) != 0; }
  std::optional<int> index_of(const Fact& f) const {
    auto it = index_.find(f);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<Fact>& facts() const { return facts_; }
  const Fact& operator[](int i) const { return facts_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }

  std::vector<ConstId> adom() const {
    std::vector<ConstId> out;
    for (const auto& f : facts_) out.insert(out.end(), f.args.begin(), f.args.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<ConstId> nulls(const ConstantPool& pool) const {
    auto all = adom();
    std::vector<ConstId> out;
    for (ConstId c : all)
      if (pool.is_null(c)) out.push_back(c);
    return out;
  }

  // Total number of symbols, the ||D|| measure used for size comparisons.
  std::size_t weight() const {
    std::size_t w = 0;
    for (const auto& f : facts_) w += 1 + f.args.size();
    return w;
  }

 private:
  std::vector<Fact> facts_;
  std::unordered_map<Fact, int, FactHash> index_;
};

// ---------------------------------------------------------------------------
// queries and rules
// ---------------------------------------------------------------------------

struct Term {
  bool is_var = true;
  std::int32_t id = 0;  // variable index, or ConstId when !is_var

  static Term var(int v) { return {true, v}; }
  static Term constant(ConstId c) { return {false, c}; }
  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;
};

struct Atom {
  int rel = 0;
  std::vector<Term> args;
  friend bool operator==(const Atom&, const Atom&) = default;
  friend auto operator<=>(const Atom&, const Atom&) = default;

  std::vector<int> vars() const {
    std::vector<int> out;
    for (const auto& t : args)
      if (t.is_var && std::find(out.begin(), out.end(), t.id) == out.end()) out.push_back(t.id);
    return out;
  }
};

struct ConjunctiveQuery {
  std::string name = "q";
  std::vector<std::string> var_names;
  std::vector<int> answer_vars;  // may repeat before normalization
  std::vector<Atom> atoms;

  int num_vars() const { return static_cast<int>(var_names.size()); }
  int arity() const { return static_cast<int>(answer_vars.size()); }

  bool is_answer(int v) const {
    return std::find(answer_vars.begin(), answer_vars.end(), v) != answer_vars.end();
  }

  std::vector<int> distinct_answer_vars() const {
    std::vector<int> out;
    for (int v : answer_vars)
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    return out;
  }

  std::vector<int> quantified_vars() const {
    std::vector<bool> used(var_names.size(), false);
    for (const auto& a : atoms)
      for (const auto& t : a.args)
        if (t.is_var) used[static_cast<std::size_t>(t.id)] = true;
    std::vector<int> out;
    for (int v = 0; v < num_vars(); ++v)
      if (used[static_cast<std::size_t>(v)] && !is_answer(v)) out.push_back(v);
    return out;
  }

  bool has_repeated_answer_vars() const {
    return distinct_answer_vars().size() != answer_vars.size();
  }

  bool has_constants() const {
    for (const auto& a : atoms)
      for (const auto& t : a.args)
        if (!t.is_var) return true;
    return false;
  }

  std::vector<ConstId> constants() const {
    std::vector<ConstId> out;
    for (const auto& a : atoms)
      for (const auto& t : a.args)
        if (!t.is_var) out.push_back(t.id);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

struct Tgd {
  std::vector<std::string> var_names;
  std::vector<Atom> body;  // empty body means `true`
  std::vector<Atom> head;
  std::vector<int> frontier;
  std::vector<int> existential;
  int guard = -1;  // index of a body atom holding every body variable, or -1
  bool eli = false;

  bool guarded() const { return body.empty() || guard >= 0; }
  int num_vars() const { return static_cast<int>(var_names.size()); }
};

struct Ontology {
  std::vector<Tgd> rules;

  bool guarded() const {
    return std::all_of(rules.begin(), rules.end(), [](const Tgd& t) { return t.guarded(); });
  }
  bool eli() const {
    return std::all_of(rules.begin(), rules.end(), [](const Tgd& t) { return t.eli; });
  }
  std::vector<int> head_symbols() const {
    std::vector<int> out;
    for (const auto& r : rules)
      for (const auto& a : r.head) out.push_back(a.rel);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  std::vector<int> symbols() const {
    std::vector<int> out;
    for (const auto& r : rules) {
      for (const auto& a : r.body) out.push_back(a.rel);
      for (const auto& a : r.head) out.push_back(a.rel);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

struct Omq {
  Ontology onto;
  std::vector<int> data_schema;  // sorted relation ids
  ConjunctiveQuery query;
};

// Fills frontier / existential / guard / eli from body and head.
inline void analyze_tgd(Tgd& t, const Schema& schema) {
  std::vector<bool> in_body(t.var_names.size(), false), in_head(t.var_names.size(), false);
  for (const auto& a : t.body)
    for (const auto& x : a.args) in_body[static_cast<std::size_t>(x.id)] = true;
  for (const auto& a : t.head)
    for (const auto& x : a.args) in_head[static_cast<std::size_t>(x.id)] = true;
  t.frontier.clear();
  t.existential.clear();
  for (int v = 0; v < t.num_vars(); ++v) {
    if (in_body[static_cast<std::size_t>(v)] && in_head[static_cast<std::size_t>(v)]) t.frontier.push_back(v);
    if (!in_body[static_cast<std::size_t>(v)] && in_head[static_cast<std::size_t>(v)]) t.existential.push_back(v);
  }
  std::vector<int> body_vars;
  for (int v = 0; v < t.num_vars(); ++v)
    if (in_body[static_cast<std::size_t>(v)]) body_vars.push_back(v);
  t.guard = -1;
  for (std::size_t i = 0; i < t.body.size() && t.guard < 0; ++i) {
    auto vs = t.body[i].vars();
    if (std::all_of(body_vars.begin(), body_vars.end(),
                    [&](int v) { return std::find(vs.begin(), vs.end(), v) != vs.end(); }))
      t.guard = static_cast<int>(i);
  }

  // ELI: binary signature, one frontier variable, head a tree without
  // self-loops or parallel edges, connected through the frontier variable.
  bool eli = t.frontier.size() == 1 && t.guard >= 0;
  auto check_tree = [&](const std::vector<Atom>& atoms, int root) {
    for (const auto& a : atoms) {
      if (schema.arity(a.rel) > 2) return false;
      if (a.args.size() == 2 && a.args[0] == a.args[1]) return false;
    }
    std::vector<std::pair<int, int>> edges;
    std::vector<int> nodes;
    for (const auto& a : atoms) {
      for (const auto& x : a.args) nodes.push_back(x.id);
      if (a.args.size() == 2) {
        int u = std::min(a.args[0].id, a.args[1].id), w = std::max(a.args[0].id, a.args[1].id);
        edges.emplace_back(u, w);
      }
    }
    if (root >= 0) nodes.push_back(root);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) return false;
    if (nodes.empty()) return true;
    if (edges.size() + 1 != nodes.size()) return false;
    // connectivity via union-find
    std::unordered_map<int, int> parent;
    for (int n : nodes) parent[n] = n;
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (auto [u, w] : edges) parent[find(u)] = find(w);
    int r = find(nodes.front());
    return std::all_of(nodes.begin(), nodes.end(), [&](int n) { return find(n) == r; });
  };
  if (eli) eli = check_tree(t.head, t.frontier.front()) && check_tree(t.body, t.frontier.front());
  t.eli = eli;
}

// ---------------------------------------------------------------------------
// orders on answer tuples
// ---------------------------------------------------------------------------

inline void require_same_length(const Tuple& a, const Tuple& b) {
  if (a.size() != b.size())
    throw UsageError("tuple length mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
}

// a ⪯ b for single-wildcard tuples.
inline bool wildcard_le(const Tuple& a, const Tuple& b) {
  require_same_length(a, b);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (b[i] != a[i] && !is_wild(b[i])) return false;
  return true;
}

inline bool wildcard_lt(const Tuple& a, const Tuple& b) { return a != b && wildcard_le(a, b); }

// Wildcard indices must first appear as 1, 2, 3, ... from left to right.
inline bool validate_multi_tuple(const Tuple& t) {
  int next = 1;
  for (ConstId v : t) {
    if (v == kUnset) return false;
    if (!is_wild(v)) continue;
    int k = wild_index(v);
    if (k > next) return false;
    if (k == next) ++next;
  }
  return true;
}

// a ⪯ b for multi-wildcard tuples: every constant of a survives in b or is
// replaced by a wildcard, wildcards stay wildcards, and b never identifies two
// positions that a keeps apart.
inline bool multi_le(const Tuple& a, const Tuple& b) {
  require_same_length(a, b);
  if (!validate_multi_tuple(a) || !validate_multi_tuple(b))
    throw ValidationError("malformed multi-wildcard tuple");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (is_wild(a[i]) && !is_wild(b[i])) return false;
    if (!is_wild(a[i]) && b[i] != a[i] && !is_wild(b[i])) return false;
  }
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = i + 1; j < b.size(); ++j)
      if (b[i] == b[j] && a[i] != a[j]) return false;
  return true;
}

inline bool multi_lt(const Tuple& a, const Tuple& b) { return a != b && multi_le(a, b); }

inline Tuple flatten(const Tuple& t) {
  Tuple out = t;
  for (auto& v : out)
    if (is_wild(v)) v = kStar;
  return out;
}

// Renumbers wildcards by first occurrence so the tuple obeys the prefix rule.
inline Tuple canonical_multi(const Tuple& t) {
  Tuple out = t;
  std::vector<std::pair<ConstId, int>> seen;
  int next = 1;
  for (auto& v : out) {
    if (!is_wild(v)) continue;
    auto it = std::find_if(seen.begin(), seen.end(), [&](auto& p) { return p.first == v; });
    if (it == seen.end()) {
      seen.emplace_back(v, next);
      v = make_wild(next++);
    } else {
      v = make_wild(it->second);
    }
  }
  return out;
}

// Replaces nulls by wildcards. `multi` numbers distinct nulls apart.
inline Tuple wildcard_image(const Tuple& values, const ConstantPool& pool, bool multi) {
  Tuple out(values.size());
  std::vector<std::pair<ConstId, int>> seen;
  int next = 1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ConstId c = values[i];
    if (!pool.is_null(c)) {
      out[i] = c;
    } else if (!multi) {
      out[i] = kStar;
    } else {
      auto it = std::find_if(seen.begin(), seen.end(), [&](auto& p) { return p.first == c; });
      if (it == seen.end()) {
        seen.emplace_back(c, next);
        out[i] = make_wild(next++);
      } else {
        out[i] = make_wild(it->second);
      }
    }
  }
  return out;
}

// Every subset of some fact's argument set, each once, sorted.
inline std::vector<std::vector<ConstId>> guarded_sets(const Database& db) {
  std::unordered_set<std::vector<ConstId>, TupleHash> seen;
  std::vector<std::vector<ConstId>> out;
  for (const auto& f : db.facts()) {
    std::vector<ConstId> s = f.args;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    std::size_t n = s.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      std::vector<ConstId> sub;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (std::size_t{1} << i)) sub.push_back(s[i]);
      if (seen.insert(sub).second) out.push_back(std::move(sub));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace omq
