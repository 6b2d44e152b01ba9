#pragma once

// Query-directed chase.
//
//   1. The null-free part is the least fixpoint of a Horn formula whose
//      variables are facts over guarded sets of D and whose clauses say
//      "these facts over S entail that fact over S" (decided by bag
//      saturation).
//   2. The null part grafts, below every existential trigger of the null-free
//      part, the tree of bags produced by the saturator, unfolded to a depth
//      d* that depends only on (ontology, query).
//   3. d* is the largest depth any connected piece of the query ever needs
//      to be realized below a guarded set. It is computed by a search over
//      the finitely many bag types with cycle cutting.

#include <chrono>
#include <climits>
#include <cstdlib>
#include <deque>
#include <array>
#include <map>
#include <queue>
#include <set>

#include "omq/saturation.hpp"

namespace omq {

inline int entail_depth_cap() {
  if (const char* s = std::getenv("OMQ_ENTAIL_DEPTH")) {
    try {
      int v = std::stoi(s);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("OMQ_ENTAIL_DEPTH must be a positive integer");
  }
  return 48;
}

// ---------------------------------------------------------------------------
// Horn formulas
// ---------------------------------------------------------------------------

struct HornClause {
  std::vector<int> body;
  std::vector<int> heads;  // a clause with several heads stands for one clause per head
};

struct HornFormula {
  int num_vars = 0;
  std::vector<int> units;
  std::vector<HornClause> clauses;

  std::size_t size() const {
    std::size_t s = units.size();
    for (const auto& c : clauses) s += c.body.size() + c.heads.size();
    return s;
  }
};

// Counter-based unit propagation: every clause keeps the number of body
// variables not yet derived; each variable is dequeued once and each clause
// is touched once per body occurrence.
inline std::vector<bool> min_model(const HornFormula& f) {
  std::vector<bool> val(static_cast<std::size_t>(f.num_vars), false);
  std::vector<std::vector<int>> occurs(static_cast<std::size_t>(f.num_vars));
  std::vector<int> missing(f.clauses.size());
  std::vector<int> queue;
  auto set = [&](int v) {
    if (!val[static_cast<std::size_t>(v)]) {
      val[static_cast<std::size_t>(v)] = true;
      queue.push_back(v);
    }
  };
  for (std::size_t c = 0; c < f.clauses.size(); ++c) {
    auto body = f.clauses[c].body;
    std::sort(body.begin(), body.end());
    body.erase(std::unique(body.begin(), body.end()), body.end());
    missing[c] = static_cast<int>(body.size());
    for (int v : body) occurs[static_cast<std::size_t>(v)].push_back(static_cast<int>(c));
  }
  for (int u : f.units) set(u);
  for (std::size_t c = 0; c < f.clauses.size(); ++c)
    if (missing[c] == 0)
      for (int h : f.clauses[c].heads) set(h);
  while (!queue.empty()) {
    int v = queue.back();
    queue.pop_back();
    for (int c : occurs[static_cast<std::size_t>(v)])
      if (--missing[static_cast<std::size_t>(c)] == 0)
        for (int h : f.clauses[static_cast<std::size_t>(c)].heads) set(h);
  }
  return val;
}

// Reference least fixpoint by repeated passes.
inline std::vector<bool> naive_fixpoint(const HornFormula& f) {
  std::vector<bool> val(static_cast<std::size_t>(f.num_vars), false);
  for (int u : f.units) val[static_cast<std::size_t>(u)] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& c : f.clauses) {
      bool fire = std::all_of(c.body.begin(), c.body.end(),
                              [&](int v) { return val[static_cast<std::size_t>(v)]; });
      if (!fire) continue;
      for (int h : c.heads)
        if (!val[static_cast<std::size_t>(h)]) {
          val[static_cast<std::size_t>(h)] = true;
          changed = true;
        }
    }
  }
  return val;
}

// ---------------------------------------------------------------------------
// depth search over bag types
// ---------------------------------------------------------------------------

struct PiecePattern {
  int nvars = 0;
  LAtoms atoms;                 // args are pattern variables
  std::vector<uint8_t> kind;    // 0 anywhere, 1 root constants only, 2 nulls only
  std::vector<int> fixed;       // fixed root constant, or -1
  std::vector<uint8_t> distinct;  // two flagged variables never share a null
};

class DepthSearch {
 public:
  static constexpr int kInf = INT_MAX / 4;

  DepthSearch(const TypeSaturator& sat, int cap) : sat_(sat), cap_(cap) {}

  // Calls visit(sigma, depth) for every assignment of the pattern variables
  // to root constants (or -1 = below the root) that is consistent at the
  // root, where depth is the least unfolding depth realizing the rest
  // (kInf when impossible). visit may return false to stop.
  template <class F>
  void root_assignments(int type, const PiecePattern& p, F&& visit) {
    const auto& t = sat_.type(type);
    std::vector<int> sigma(static_cast<std::size_t>(p.nvars), kUnsetLocal);
    bool stop = false;
    std::function<void(int)> rec = [&](int v) {
      if (stop) return;
      if (v == p.nvars) {
        int d = realize_below_root(type, p, sigma);
        if (!visit(sigma, d)) stop = true;
        return;
      }
      auto ok_so_far = [&] {
        for (const auto& a : p.atoms) {
          bool complete = true;
          LAtom m{a.rel, {}};
          for (int x : a.args) {
            int s = sigma[static_cast<std::size_t>(x)];
            if (s < 0) {
              complete = false;
              break;
            }
            m.args.push_back(s);
          }
          if (complete && !std::binary_search(t.atoms.begin(), t.atoms.end(), m)) return false;
        }
        return true;
      };
      const auto vi = static_cast<std::size_t>(v);
      if (p.fixed[vi] >= 0) {
        sigma[vi] = p.fixed[vi];
        if (ok_so_far()) rec(v + 1);
        sigma[vi] = kUnsetLocal;
        return;
      }
      if (p.kind[vi] != 2)
        for (int c = 0; c < t.m && !stop; ++c) {
          sigma[vi] = c;
          if (ok_so_far()) rec(v + 1);
        }
      if (p.kind[vi] != 1 && !stop) {
        sigma[vi] = kDeferred;
        rec(v + 1);
      }
      sigma[vi] = kUnsetLocal;
    };
    rec(0);
  }

  std::size_t state_count() const { return states_.size(); }

 private:
  static constexpr int kDeferred = -1;
  static constexpr int kUnsetLocal = -2;

  // Component: atoms whose args are local constants (>= 0) or deferred
  // variables encoded as -(v+1); flags[v] = distinct flag.
  struct Comp {
    LAtoms atoms;
    std::vector<uint8_t> flags;
  };

  static void canonicalize(Comp& c) {
    for (int round = 0; round < 3; ++round) {
      std::vector<int> ren(c.flags.size(), -1);
      int next = 0;
      for (const auto& a : c.atoms)
        for (int x : a.args)
          if (x < 0 && ren[static_cast<std::size_t>(-x - 1)] < 0) ren[static_cast<std::size_t>(-x - 1)] = next++;
      std::vector<uint8_t> flags(static_cast<std::size_t>(next));
      for (std::size_t v = 0; v < ren.size(); ++v)
        if (ren[v] >= 0) flags[static_cast<std::size_t>(ren[v])] = c.flags[v];
      for (auto& a : c.atoms)
        for (int& x : a.args)
          if (x < 0) x = -ren[static_cast<std::size_t>(-x - 1)] - 1;
      c.flags = std::move(flags);
      normalize_latoms(c.atoms);
    }
  }

  static std::vector<int> key_of(int type, std::uint64_t mask, const Comp& c) {
    std::vector<int> k{type, static_cast<int>(mask & 0xffffffffu), static_cast<int>(mask >> 32),
                       static_cast<int>(c.flags.size())};
    for (auto f : c.flags) k.push_back(f);
    for (const auto& a : c.atoms) {
      k.push_back(a.rel);
      k.push_back(static_cast<int>(a.args.size()));
      k.insert(k.end(), a.args.begin(), a.args.end());
    }
    return k;
  }

  // Splits atoms into components connected through deferred variables.
  static std::vector<Comp> split(const LAtoms& atoms, const std::vector<uint8_t>& flags) {
    const std::size_t n = atoms.size();
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
      return parent[static_cast<std::size_t>(x)] == x ? x
                                                      : parent[static_cast<std::size_t>(x)] =
                                                            find(parent[static_cast<std::size_t>(x)]);
    };
    std::unordered_map<int, int> owner;
    for (std::size_t i = 0; i < n; ++i)
      for (int x : atoms[i].args)
        if (x < 0) {
          auto [it, fresh] = owner.emplace(x, static_cast<int>(i));
          if (!fresh) parent[static_cast<std::size_t>(find(static_cast<int>(i)))] = find(it->second);
        }
    std::map<int, Comp> by_root;
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = by_root[find(static_cast<int>(i))];
      c.atoms.push_back(atoms[i]);
    }
    std::vector<Comp> out;
    for (auto& [r, c] : by_root) {
      c.flags = flags;
      canonicalize(c);
      out.push_back(std::move(c));
    }
    return out;
  }

  static bool owned(const Tgd& rule, const TypeSaturator::Trigger& tr, std::uint64_t mask) {
    for (const auto& a : rule.body)
      for (const auto& t : a.args)
        if (mask >> tr.image[static_cast<std::size_t>(t.id)] & 1u) return true;
    return false;
  }

  // The reachable states (node type, born-constant mask, component still to
  // place) form a finite AND-OR graph: a state is realized at depth 0 if some
  // placement of its deferred variables onto born constants leaves nothing,
  // otherwise at 1 + the best child depth, maximized over the components left.
  struct OrNode {
    std::vector<int> children;  // states, one per applicable trigger
  };
  struct Alternative {
    std::vector<OrNode> parts;
  };
  struct State {
    int type = 0;
    std::uint64_t mask = 0;
    Comp comp;
    bool zero = false;
    std::vector<Alternative> alts;
    int value = kInf;
    bool final = false;
  };

  // Child states reachable through triggers of a node of type `type`; at the
  // root every trigger counts, below it only those touching born constants.
  std::vector<int> trigger_children(int type, std::uint64_t mask, bool root, const Comp& c) {
    const auto& t = sat_.type(type);
    std::vector<int> consts;
    for (const auto& a : c.atoms)
      for (int x : a.args)
        if (x >= 0) consts.push_back(x);
    std::sort(consts.begin(), consts.end());
    consts.erase(std::unique(consts.begin(), consts.end()), consts.end());
    std::vector<int> out;
    for (const auto& tr : t.triggers) {
      const Tgd& rule = sat_.ontology().rules[static_cast<std::size_t>(tr.rule)];
      if (!root && !owned(rule, tr, mask)) continue;
      if (!std::includes(tr.frontier.begin(), tr.frontier.end(), consts.begin(), consts.end())) continue;
      const auto& ct = sat_.type(tr.child);
      std::vector<int> to_child(static_cast<std::size_t>(t.m), -1);
      std::uint64_t cmask = 0;
      for (int i = 0; i < ct.m; ++i) {
        int pc = tr.child_to_parent[static_cast<std::size_t>(i)];
        if (pc < 0)
          cmask |= std::uint64_t{1} << i;
        else
          to_child[static_cast<std::size_t>(pc)] = i;
      }
      Comp cc = c;
      for (auto& a : cc.atoms)
        for (int& x : a.args)
          if (x >= 0) x = to_child[static_cast<std::size_t>(x)];
      normalize_latoms(cc.atoms);
      out.push_back(state_of(tr.child, cmask, std::move(cc)));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  int state_of(int type, std::uint64_t mask, Comp c) {
    auto key = key_of(type, mask, c);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    if (states_.size() >= kMaxStates) throw ResourceLimitError("incomplete: entailment search exceeded its state budget");
    int id = static_cast<int>(states_.size());
    index_.emplace(std::move(key), id);
    states_.push_back(State{type, mask, std::move(c), false, {}, kInf, false});
    pending_.push_back(id);
    return id;
  }

  void expand(int id) {
    const int type = states_[static_cast<std::size_t>(id)].type;
    const std::uint64_t mask = states_[static_cast<std::size_t>(id)].mask;
    const Comp c = states_[static_cast<std::size_t>(id)].comp;
    const auto& t = sat_.type(type);
    const std::size_t nv = c.flags.size();
    std::vector<int> alpha(nv, kDeferred);
    std::vector<int> born;
    for (int i = 0; i < t.m; ++i)
      if (mask >> i & 1u) born.push_back(i);
    bool zero = false;
    std::vector<Alternative> alts;
    std::function<void(std::size_t)> rec = [&](std::size_t v) {
      if (zero) return;
      if (v < nv) {
        alpha[v] = kDeferred;
        rec(v + 1);
        for (int b : born) {
          bool clash = false;
          if (c.flags[v])
            for (std::size_t u = 0; u < v; ++u) clash = clash || (c.flags[u] && alpha[u] == b);
          if (clash) continue;
          alpha[v] = b;
          rec(v + 1);
        }
        alpha[v] = kDeferred;
        return;
      }
      if (++steps_ > kMaxSteps) throw ResourceLimitError("incomplete: entailment search exceeded its step budget");
      LAtoms rest;
      for (const auto& a : c.atoms) {
        LAtom m{a.rel, {}};
        bool complete = true;
        for (int x : a.args) {
          int y = x >= 0 ? x : (alpha[static_cast<std::size_t>(-x - 1)] >= 0 ? alpha[static_cast<std::size_t>(-x - 1)] : x);
          if (y < 0) complete = false;
          m.args.push_back(y);
        }
        if (complete) {
          if (!std::binary_search(t.atoms.begin(), t.atoms.end(), m)) return;
        } else {
          rest.push_back(std::move(m));
        }
      }
      if (rest.empty()) {
        zero = true;
        return;
      }
      Alternative alt;
      for (const auto& comp : split(rest, c.flags)) {
        OrNode node{trigger_children(type, mask, false, comp)};
        if (node.children.empty()) return;
        alt.parts.push_back(std::move(node));
      }
      alts.push_back(std::move(alt));
    };
    rec(0);
    auto& st = states_[static_cast<std::size_t>(id)];
    st.zero = zero;
    if (!zero) st.alts = std::move(alts);
  }

  // Explores every state reachable from the pending ones, then settles their
  // depths in increasing order (states settled earlier keep their values,
  // since their successors were all settled with them).
  void settle() {
    std::vector<int> batch;
    while (!pending_.empty()) {
      int id = pending_.back();
      pending_.pop_back();
      batch.push_back(id);
      expand(id);
    }
    if (batch.empty()) return;
    std::unordered_map<int, std::vector<std::array<int, 3>>> parents;  // child -> (state, alt, part)
    struct AltProgress {
      int missing = 0;
      int value = 0;
    };
    std::unordered_map<long long, int> part_value;
    std::unordered_map<long long, AltProgress> alt_progress;
    auto alt_key = [](int s, int a) { return (static_cast<long long>(s) << 32) | static_cast<unsigned>(a); };
    auto part_key = [](int s, int a, int p) {
      return (static_cast<long long>(s) << 40) | (static_cast<long long>(a) << 20) | static_cast<long long>(p);
    };
    using Entry = std::pair<int, int>;  // value, state
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    std::vector<int> seeded;
    for (int id : batch) {
      const auto& st = states_[static_cast<std::size_t>(id)];
      if (st.zero) queue.emplace(0, id);
      for (std::size_t a = 0; a < st.alts.size(); ++a) {
        alt_progress[alt_key(id, static_cast<int>(a))].missing = static_cast<int>(st.alts[a].parts.size());
        for (std::size_t p = 0; p < st.alts[a].parts.size(); ++p)
          for (int ch : st.alts[a].parts[p].children) {
            parents[ch].push_back({id, static_cast<int>(a), static_cast<int>(p)});
            const auto& cs = states_[static_cast<std::size_t>(ch)];
            if (cs.final && cs.value < kInf) seeded.push_back(ch);
          }
      }
    }
    std::sort(seeded.begin(), seeded.end());
    seeded.erase(std::unique(seeded.begin(), seeded.end()), seeded.end());
    for (int ch : seeded) queue.emplace(states_[static_cast<std::size_t>(ch)].value, ch);
    std::unordered_set<int> done;
    while (!queue.empty()) {
      auto [val, id] = queue.top();
      queue.pop();
      if (!done.insert(id).second) continue;
      auto& st = states_[static_cast<std::size_t>(id)];
      if (!st.final) {
        st.value = val;
        st.final = true;
      }
      auto it = parents.find(id);
      if (it == parents.end()) continue;
      for (const auto& [ps, pa, pp] : it->second) {
        if (states_[static_cast<std::size_t>(ps)].final) continue;
        auto [slot, fresh] = part_value.emplace(part_key(ps, pa, pp), st.value + 1);
        if (!fresh) continue;
        auto& prog = alt_progress[alt_key(ps, pa)];
        prog.value = std::max(prog.value, slot->second);
        if (--prog.missing == 0) queue.emplace(prog.value, ps);
      }
    }
    for (int id : batch) states_[static_cast<std::size_t>(id)].final = true;
  }

  // Least unfolding depth realizing the components left below the root.
  int realize_below_root(int type, const PiecePattern& p, const std::vector<int>& sigma) {
    LAtoms rest;
    for (const auto& a : p.atoms) {
      LAtom m{a.rel, {}};
      bool complete = true;
      for (int x : a.args) {
        int s = sigma[static_cast<std::size_t>(x)];
        if (s < 0) {
          complete = false;
          m.args.push_back(-x - 1);
        } else {
          m.args.push_back(s);
        }
      }
      if (!complete) rest.push_back(std::move(m));
    }
    if (rest.empty()) return 0;
    std::vector<uint8_t> flags(static_cast<std::size_t>(p.nvars));
    for (int v = 0; v < p.nvars; ++v) flags[static_cast<std::size_t>(v)] = p.distinct.empty() ? 0 : p.distinct[static_cast<std::size_t>(v)];
    std::vector<std::vector<int>> roots;
    for (const auto& comp : split(rest, flags)) roots.push_back(trigger_children(type, ~std::uint64_t{0}, true, comp));
    settle();
    int total = 0;
    for (const auto& children : roots) {
      int best = kInf;
      for (int ch : children) best = std::min(best, states_[static_cast<std::size_t>(ch)].value);
      if (best >= kInf) return kInf;
      total = std::max(total, best + 1);
    }
    if (total > cap_)
      throw ResourceLimitError("incomplete: entailment needs depth " + std::to_string(total) + " beyond the cap " +
                               std::to_string(cap_) + " (raise OMQ_ENTAIL_DEPTH)");
    return total;
  }

  struct KeyHash {
    std::size_t operator()(const std::vector<int>& k) const noexcept { return boost::hash_range(k.begin(), k.end()); }
  };

  static constexpr std::size_t kMaxStates = 2'000'000;
  static constexpr std::size_t kMaxSteps = 20'000'000;
  const TypeSaturator& sat_;
  int cap_;
  std::unordered_map<std::vector<int>, int, KeyHash> index_;
  std::vector<State> states_;
  std::vector<int> pending_;
  std::size_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// pieces of the query
// ---------------------------------------------------------------------------

enum class PieceMode { Complete, Partial, Multi };

// Every pattern describing how a connected group of query atoms can sit in
// the null part below one guarded set.
inline std::vector<PiecePattern> query_pieces(const ConjunctiveQuery& q, const Ontology& onto, PieceMode mode) {
  const auto heads = onto.head_symbols();
  // variables: query variables, then one per query constant
  int nv = q.num_vars();
  std::map<ConstId, int> const_var;
  for (const auto& a : q.atoms)
    for (const auto& t : a.args)
      if (!t.is_var && !const_var.count(t.id)) const_var[t.id] = nv++;
  std::vector<LAtom> atoms;
  for (const auto& a : q.atoms) {
    if (!std::binary_search(heads.begin(), heads.end(), a.rel)) continue;
    LAtom l{a.rel, {}};
    for (const auto& t : a.args) l.args.push_back(t.is_var ? t.id : const_var[t.id]);
    atoms.push_back(std::move(l));
  }
  const auto answers = q.distinct_answer_vars();

  // partitions of the answer variables (only the identity unless multi)
  std::vector<std::vector<int>> partitions;  // block id per answer var
  {
    std::vector<int> blk(answers.size(), 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
      if (i == answers.size()) {
        partitions.push_back(blk);
        return;
      }
      for (int b = 0; b <= used; ++b) {
        blk[i] = b;
        rec(i + 1, std::max(used, b + 1));
      }
    };
    if (mode == PieceMode::Multi)
      rec(0, 0);
    else {
      std::iota(blk.begin(), blk.end(), 0);
      partitions.push_back(blk);
    }
  }

  std::set<std::tuple<LAtoms, std::vector<uint8_t>, std::vector<uint8_t>>> seen;
  std::vector<PiecePattern> out;
  for (const auto& blk : partitions) {
    std::vector<int> rep(static_cast<std::size_t>(nv));
    std::iota(rep.begin(), rep.end(), 0);
    std::vector<int> block_size(answers.size() + 1, 0);
    for (int b : blk) ++block_size[static_cast<std::size_t>(b)];
    for (std::size_t i = 0; i < answers.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (blk[i] == blk[j]) {
          rep[static_cast<std::size_t>(answers[i])] = rep[static_cast<std::size_t>(answers[j])];
          break;
        }
    LAtoms merged = atoms;
    for (auto& a : merged)
      for (int& x : a.args) x = rep[static_cast<std::size_t>(x)];
    const std::size_t n = merged.size();
    if (n > 20) throw ResourceLimitError("incomplete: query too large for piece analysis");
    for (std::uint32_t sub = 1; sub < (1u << n); ++sub) {
      LAtoms chosen;
      for (std::size_t i = 0; i < n; ++i)
        if (sub >> i & 1u) chosen.push_back(merged[i]);
      // connected through shared variables?
      std::vector<int> comp(chosen.size(), -1);
      comp[0] = 0;
      for (bool grew = true; grew;) {
        grew = false;
        for (std::size_t i = 0; i < chosen.size(); ++i) {
          if (comp[i] >= 0) continue;
          for (std::size_t j = 0; j < chosen.size() && comp[i] < 0; ++j) {
            if (comp[j] < 0) continue;
            for (int x : chosen[i].args)
              if (std::find(chosen[j].args.begin(), chosen[j].args.end(), x) != chosen[j].args.end()) {
                comp[i] = 0;
                grew = true;
                break;
              }
          }
        }
      }
      if (std::any_of(comp.begin(), comp.end(), [](int c) { return c < 0; })) continue;
      // compact variable numbering
      std::map<int, int> local;
      for (auto& a : chosen)
        for (int& x : a.args) x = local.emplace(x, static_cast<int>(local.size())).first->second;
      PiecePattern p;
      p.nvars = static_cast<int>(local.size());
      p.atoms = chosen;
      p.kind.assign(local.size(), 0);
      p.fixed.assign(local.size(), -1);
      p.distinct.assign(local.size(), 0);
      for (auto [orig, l] : local) {
        const auto li = static_cast<std::size_t>(l);
        bool is_const = orig >= q.num_vars();
        bool is_answer = !is_const && q.is_answer(orig);
        if (is_const) p.kind[li] = 1;
        if (is_answer && mode == PieceMode::Complete) p.kind[li] = 1;
        if (is_answer && mode == PieceMode::Multi) {
          p.distinct[li] = 1;
          std::size_t ai = static_cast<std::size_t>(std::find(answers.begin(), answers.end(), orig) - answers.begin());
          if (block_size[static_cast<std::size_t>(blk[ai])] > 1) p.kind[li] = 2;
        }
      }
      normalize_latoms(p.atoms);
      if (!seen.emplace(p.atoms, p.kind, p.distinct).second) continue;
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// chase result
// ---------------------------------------------------------------------------

enum class FactOrigin : std::uint8_t { Input, Derived, NullPart };

struct ChaseResult {
  Database db;
  std::vector<FactOrigin> origin;                // per fact
  std::vector<int> witness_of;                   // per fact: index of its witness database
  std::vector<std::vector<int>> witnesses;       // fact indices of each witness database
  std::unordered_map<ConstId, int> null_source;  // null -> null-free fact it hangs below
  int depth = 0;                                 // unfolding depth d*
  std::size_t horn_vars = 0;
  std::size_t horn_clauses = 0;
  std::size_t bag_types = 0;
  std::size_t guarded_set_count = 0;

  std::size_t size() const { return db.size(); }
};

namespace detail {

struct GuardedSet {
  std::vector<ConstId> members;  // sorted
  std::vector<int> known;        // fact indices over members
  std::size_t processed = 0;
  bool queued = false;
};

}  // namespace detail

class QueryDirectedChase {
 public:
  QueryDirectedChase(const Ontology& onto, Vocabulary& voc, int depth_cap = entail_depth_cap())
      : onto_(onto), voc_(voc), sat_(onto), cap_(depth_cap) {}

  // The Horn formula and its least model; the model is returned as the list
  // of facts in derivation order (inputs first).
  HornFormula build_formula(const Database& d) {
    reset(d);
    run_worklist();
    return formula_;
  }

  ChaseResult run(const Database& d, const ConjunctiveQuery& q, PieceMode mode, int forced_depth = -1) {
    ChaseResult res;
    reset(d);
    run_worklist();
    // least model of the formula = the facts collected by the worklist
    auto model = min_model(formula_);
    for (std::size_t v = 0; v < model.size(); ++v)
      if (!model[v]) throw std::logic_error("horn layer: worklist fact outside least model");
    res.horn_vars = static_cast<std::size_t>(formula_.num_vars);
    res.horn_clauses = formula_.clauses.size();

    for (std::size_t i = 0; i < facts_.size(); ++i) {
      res.db.insert(facts_[i]);
      res.origin.push_back(i < input_count_ ? FactOrigin::Input : FactOrigin::Derived);
      res.witness_of.push_back(static_cast<int>(i));
      res.witnesses.push_back({static_cast<int>(i)});
    }

    // root triggers, deduplicated by (rule, body image)
    struct RootTrigger {
      int type;
      TypeSaturator::Trigger tr;
      std::vector<ConstId> local_to_global;  // of the owning guarded set
      int guard_fact;
    };
    std::vector<RootTrigger> roots;
    std::set<std::pair<int, std::vector<ConstId>>> seen;
    std::vector<int> root_types;
    for (auto& s : sets_) {
      auto h = saturate_set(s);
      root_types.push_back(h.type);
      std::vector<ConstId> to_global(s.members.size());
      for (std::size_t i = 0; i < s.members.size(); ++i) to_global[static_cast<std::size_t>(h.perm[i])] = s.members[i];
      for (const auto& tr : sat_.type(h.type).triggers) {
        const Tgd& rule = onto_.rules[static_cast<std::size_t>(tr.rule)];
        std::vector<ConstId> img(tr.image.size(), kUnset);
        for (std::size_t v = 0; v < img.size(); ++v)
          if (tr.image[v] >= 0) img[v] = to_global[static_cast<std::size_t>(tr.image[v])];
        if (!seen.emplace(tr.rule, img).second) continue;
        int guard = -1;
        if (rule.guard >= 0) {
          Fact g{rule.body[static_cast<std::size_t>(rule.guard)].rel, {}};
          for (const auto& t : rule.body[static_cast<std::size_t>(rule.guard)].args)
            g.args.push_back(img[static_cast<std::size_t>(t.id)]);
          guard = fact_index_.at(g);
        }
        roots.push_back({h.type, tr, to_global, guard});
      }
    }
    std::sort(root_types.begin(), root_types.end());
    root_types.erase(std::unique(root_types.begin(), root_types.end()), root_types.end());

    res.depth = forced_depth >= 0 ? forced_depth : compute_depth(q, mode, root_types);
    res.bag_types = sat_.size();
    res.guarded_set_count = sets_.size();

    for (const auto& rt : roots) {
      // Triggers with an empty body hang below the first fact so that every
      // witness keeps exactly one null-free fact; only a chase without any
      // null-free fact needs a group of its own.
      int group = rt.guard_fact;
      if (group < 0 && !facts_.empty()) group = 0;
      if (group < 0) {
        group = static_cast<int>(res.witnesses.size());
        res.witnesses.emplace_back();
      }
      std::vector<ConstId> inherited(rt.tr.child_to_parent.size(), kUnset);
      for (std::size_t i = 0; i < inherited.size(); ++i) {
        int pc = rt.tr.child_to_parent[i];
        if (pc >= 0) inherited[i] = rt.local_to_global[static_cast<std::size_t>(pc)];
      }
      unfold(rt.tr.child, inherited, 1, res.depth, group, rt.guard_fact, res);
    }
    return res;
  }

  int compute_depth(const ConjunctiveQuery& q, PieceMode mode, const std::vector<int>& root_types) {
    auto pieces = query_pieces(q, onto_, mode);
    DepthSearch search(sat_, cap_);
    int dstar = 0;
    for (int t : root_types) {
      if (sat_.type(t).triggers.empty()) continue;
      for (const auto& p : pieces)
        search.root_assignments(t, p, [&](const std::vector<int>&, int d) {
          if (d < DepthSearch::kInf) dstar = std::max(dstar, d);
          return true;
        });
    }
    return dstar;
  }

  const TypeSaturator& saturator() const { return sat_; }
  TypeSaturator& saturator() { return sat_; }

 private:
  void reset(const Database& d) {
    facts_.clear();
    fact_index_.clear();
    sets_.clear();
    by_const_.clear();
    formula_ = HornFormula{};
    input_count_ = 0;
    std::map<std::vector<ConstId>, int> set_ids;
    auto add_set = [&](std::vector<ConstId> m) {
      if (set_ids.count(m)) return;
      int id = static_cast<int>(sets_.size());
      set_ids.emplace(m, id);
      for (ConstId c : m) by_const_[c].push_back(id);
      detail::GuardedSet s;
      s.members = std::move(m);
      sets_.push_back(std::move(s));
    };
    add_set({});
    for (const auto& f : d.facts()) {
      std::vector<ConstId> m = f.args;
      std::sort(m.begin(), m.end());
      m.erase(std::unique(m.begin(), m.end()), m.end());
      add_set(std::move(m));
    }
    for (const auto& f : d.facts()) add_fact(f);
    input_count_ = facts_.size();
    // the empty guarded set carries rules with an empty body
    if (!sets_[0].queued) {
      sets_[0].queued = true;
      work_.push_back(0);
    }
    for (std::size_t i = 0; i < input_count_; ++i) formula_.units.push_back(static_cast<int>(i));
  }

  int add_fact(const Fact& f) {
    auto [it, fresh] = fact_index_.emplace(f, static_cast<int>(facts_.size()));
    if (!fresh) return it->second;
    int id = it->second;
    facts_.push_back(f);
    formula_.num_vars = static_cast<int>(facts_.size());
    // register with every guarded set containing all its arguments
    auto enlist = [&](int s) {
      auto& gs = sets_[static_cast<std::size_t>(s)];
      for (ConstId c : f.args)
        if (!std::binary_search(gs.members.begin(), gs.members.end(), c)) return;
      gs.known.push_back(id);
      if (!gs.queued) {
        gs.queued = true;
        work_.push_back(s);
      }
    };
    if (f.args.empty()) {
      for (std::size_t s = 0; s < sets_.size(); ++s) enlist(static_cast<int>(s));
    } else {
      const std::vector<int>* best = nullptr;
      for (ConstId c : f.args) {
        auto bit = by_const_.find(c);
        if (bit == by_const_.end()) return id;
        if (!best || bit->second.size() < best->size()) best = &bit->second;
      }
      for (int s : *best) enlist(s);
    }
    return id;
  }

  TypeSaturator::Handle saturate_set(const detail::GuardedSet& s) {
    LAtoms atoms;
    for (int fi : s.known) {
      const Fact& f = facts_[static_cast<std::size_t>(fi)];
      LAtom a{f.rel, {}};
      for (ConstId c : f.args)
        a.args.push_back(static_cast<int>(std::lower_bound(s.members.begin(), s.members.end(), c) - s.members.begin()));
      atoms.push_back(std::move(a));
    }
    return sat_.saturate(static_cast<int>(s.members.size()), std::move(atoms));
  }

  void run_worklist() {
    while (!work_.empty()) {
      int si = work_.front();
      work_.pop_front();
      sets_[static_cast<std::size_t>(si)].queued = false;
      auto& s0 = sets_[static_cast<std::size_t>(si)];
      if (s0.processed == s0.known.size() && s0.processed > 0) continue;
      s0.processed = s0.known.size();
      auto h = saturate_set(s0);
      std::vector<int> inv(s0.members.size());
      for (std::size_t i = 0; i < inv.size(); ++i) inv[static_cast<std::size_t>(h.perm[i])] = static_cast<int>(i);
      std::vector<Fact> entailed;
      for (const auto& a : sat_.type(h.type).atoms) {
        Fact f{a.rel, {}};
        for (int x : a.args) f.args.push_back(s0.members[static_cast<std::size_t>(inv[static_cast<std::size_t>(x)])]);
        if (!fact_index_.count(f)) entailed.push_back(std::move(f));
      }
      if (entailed.empty()) continue;
      HornClause clause;
      clause.body = sets_[static_cast<std::size_t>(si)].known;
      for (const auto& f : entailed) clause.heads.push_back(add_fact(f));
      formula_.clauses.push_back(std::move(clause));
    }
  }

  void unfold(int type, const std::vector<ConstId>& inherited, int level, int dstar, int group, int source,
              ChaseResult& res) {
    const auto& t = sat_.type(type);
    std::vector<ConstId> g = inherited;
    std::uint64_t born = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] == kUnset) {
        g[i] = voc_.consts.fresh_null();
        born |= std::uint64_t{1} << i;
        res.null_source.emplace(g[i], source);
      }
    for (const auto& a : t.atoms) {
      bool has_born = false;
      for (int x : a.args) has_born |= (born >> x & 1u) != 0;
      if (!has_born) continue;
      Fact f{a.rel, {}};
      for (int x : a.args) f.args.push_back(g[static_cast<std::size_t>(x)]);
      auto [idx, fresh] = res.db.insert(std::move(f));
      if (!fresh) continue;
      res.origin.push_back(FactOrigin::NullPart);
      res.witness_of.push_back(group);
      res.witnesses[static_cast<std::size_t>(group)].push_back(idx);
    }
    if (level >= dstar) return;
    for (const auto& tr : t.triggers) {
      const Tgd& rule = onto_.rules[static_cast<std::size_t>(tr.rule)];
      bool own = false;
      for (const auto& a : rule.body)
        for (const auto& term : a.args) own |= (born >> tr.image[static_cast<std::size_t>(term.id)] & 1u) != 0;
      if (!own) continue;
      std::vector<ConstId> inh(tr.child_to_parent.size(), kUnset);
      for (std::size_t i = 0; i < inh.size(); ++i)
        if (tr.child_to_parent[i] >= 0) inh[i] = g[static_cast<std::size_t>(tr.child_to_parent[i])];
      unfold(tr.child, inh, level + 1, dstar, group, source, res);
    }
  }

  const Ontology& onto_;
  Vocabulary& voc_;
  TypeSaturator sat_;
  int cap_;
  std::vector<Fact> facts_;
  std::unordered_map<Fact, int, FactHash> fact_index_;
  std::size_t input_count_ = 0;
  std::vector<detail::GuardedSet> sets_;
  std::unordered_map<ConstId, std::vector<int>> by_const_;
  std::deque<int> work_;
  HornFormula formula_;
};

inline ChaseResult query_directed_chase(const Omq& q, const Database& d, Vocabulary& voc,
                                        PieceMode mode = PieceMode::Multi, int forced_depth = -1) {
  if (!q.onto.guarded()) throw StructuralError("ontology is not guarded");
  QueryDirectedChase c(q.onto, voc);
  return c.run(d, q.query, mode, forced_depth);
}

inline HornFormula horn_formula(const Database& d, const Omq& q, Vocabulary& voc) {
  if (!q.onto.guarded()) throw StructuralError("ontology is not guarded");
  QueryDirectedChase c(q.onto, voc);
  return c.build_formula(d);
}

// ---------------------------------------------------------------------------
// entailment on a small database
// ---------------------------------------------------------------------------

// True iff every model of onto extending small satisfies p(answer).
inline bool entails_small(const Database& small, const Ontology& onto, const ConjunctiveQuery& p,
                          const Tuple& answer, int depth_cap = entail_depth_cap()) {
  if (!onto.guarded()) throw StructuralError("ontology is not guarded");
  if (answer.size() != p.answer_vars.size()) throw ValidationError("answer tuple has the wrong length");
  std::map<ConstId, int> local;
  for (ConstId c : small.adom()) local.emplace(c, static_cast<int>(local.size()));
  auto local_of = [&](ConstId c) { return local.emplace(c, static_cast<int>(local.size())).first->second; };
  std::vector<int> fixed(static_cast<std::size_t>(p.num_vars()), -1);
  for (std::size_t i = 0; i < answer.size(); ++i) {
    int v = p.answer_vars[i];
    int l = local_of(answer[i]);
    if (fixed[static_cast<std::size_t>(v)] >= 0 && fixed[static_cast<std::size_t>(v)] != l) return false;
    fixed[static_cast<std::size_t>(v)] = l;
  }
  PiecePattern pat;
  pat.nvars = p.num_vars();
  std::map<ConstId, int> const_var;
  for (const auto& a : p.atoms) {
    LAtom l{a.rel, {}};
    for (const auto& t : a.args) {
      if (t.is_var) {
        l.args.push_back(t.id);
      } else {
        auto [it, fresh] = const_var.emplace(t.id, pat.nvars);
        if (fresh) {
          ++pat.nvars;
          fixed.push_back(local_of(t.id));
        }
        l.args.push_back(it->second);
      }
    }
    pat.atoms.push_back(std::move(l));
  }
  pat.kind.assign(static_cast<std::size_t>(pat.nvars), 0);
  pat.distinct.assign(static_cast<std::size_t>(pat.nvars), 0);
  pat.fixed = fixed;
  for (int v = 0; v < pat.nvars; ++v)
    if (fixed[static_cast<std::size_t>(v)] >= 0) pat.kind[static_cast<std::size_t>(v)] = 1;

  LAtoms atoms;
  for (const auto& f : small.facts()) {
    LAtom a{f.rel, {}};
    for (ConstId c : f.args) a.args.push_back(local.at(c));
    atoms.push_back(std::move(a));
  }
  TypeSaturator sat(onto);
  auto h = sat.saturate(static_cast<int>(local.size()), atoms);
  for (auto& f : pat.fixed)
    if (f >= 0) f = h.perm[static_cast<std::size_t>(f)];
  DepthSearch search(sat, depth_cap);
  bool found = false;
  search.root_assignments(h.type, pat, [&](const std::vector<int>&, int d) {
    if (d < DepthSearch::kInf) found = true;
    return !found;
  });
  return found;
}

// ---------------------------------------------------------------------------
// oblivious chase truncated by depth
// ---------------------------------------------------------------------------

inline Database chase_bounded(const Database& d, const Ontology& onto, int depth, ConstantPool& pool,
                              std::size_t max_facts = 2'000'000) {
  if (depth < 0) throw ValidationError("depth must be non-negative");
  Database out;
  std::vector<int> level;
  std::unordered_map<int, std::vector<int>> by_rel;
  auto add = [&](Fact f, int lvl) {
    auto [idx, fresh] = out.insert(std::move(f));
    if (fresh) {
      level.push_back(lvl);
      by_rel[out[idx].rel].push_back(idx);
      if (out.size() > max_facts) throw ResourceLimitError("incomplete: bounded chase exceeded its fact limit");
    }
  };
  for (const auto& f : d.facts()) add(f, 0);
  for (int round = 1; round <= depth; ++round) {
    std::vector<std::pair<int, std::vector<ConstId>>> fire;
    for (std::size_t r = 0; r < onto.rules.size(); ++r) {
      const Tgd& rule = onto.rules[r];
      std::vector<ConstId> sigma(static_cast<std::size_t>(rule.num_vars()), kUnset);
      std::function<void(std::size_t, int)> rec = [&](std::size_t i, int maxlvl) {
        if (i == rule.body.size()) {
          if (std::max(maxlvl, 0) + 1 == round) fire.emplace_back(static_cast<int>(r), sigma);
          return;
        }
        const Atom& b = rule.body[i];
        auto it = by_rel.find(b.rel);
        if (it == by_rel.end()) return;
        const std::vector<int> candidates = it->second;
        for (int fi : candidates) {
          if (level[static_cast<std::size_t>(fi)] >= round) continue;
          const Fact& f = out[fi];
          std::vector<int> bound;
          bool ok = true;
          for (std::size_t p = 0; p < b.args.size() && ok; ++p) {
            auto& s = sigma[static_cast<std::size_t>(b.args[p].id)];
            if (s == kUnset) {
              s = f.args[p];
              bound.push_back(b.args[p].id);
            } else if (s != f.args[p]) {
              ok = false;
            }
          }
          if (ok) rec(i + 1, std::max(maxlvl, level[static_cast<std::size_t>(fi)]));
          for (int v : bound) sigma[static_cast<std::size_t>(v)] = kUnset;
        }
      };
      rec(0, -1);
    }
    for (auto& [r, sigma] : fire) {
      const Tgd& rule = onto.rules[static_cast<std::size_t>(r)];
      for (int z : rule.existential) sigma[static_cast<std::size_t>(z)] = pool.fresh_null();
      for (const auto& h : rule.head) {
        Fact f{h.rel, {}};
        for (const auto& t : h.args) f.args.push_back(sigma[static_cast<std::size_t>(t.id)]);
        add(std::move(f), round);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// cl(Q): connected CQs over the ontology's symbols
// ---------------------------------------------------------------------------

// Connected CQs over the relation symbols of the ontology with variables
// from a pool of size max(|var(q)|, max arity), deduplicated up to variable
// renaming, with every ordered choice of distinct answer variables.
// `cap` bounds the output; exceeding it is a resource error.
inline std::vector<ConjunctiveQuery> cl(const Omq& q, const Schema& schema, std::size_t cap = 200000) {
  const auto syms = q.onto.symbols();
  int pool = q.query.num_vars();
  for (int r : syms) pool = std::max(pool, schema.arity(r));
  std::vector<LAtom> all;
  for (int r : syms) {
    const int ar = schema.arity(r);
    std::vector<int> args(static_cast<std::size_t>(ar), 0);
    for (;;) {
      all.push_back({r, args});
      int i = ar - 1;
      while (i >= 0 && ++args[static_cast<std::size_t>(i)] == pool) args[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
    }
  }
  if (all.size() > 24) throw ResourceLimitError("incomplete: cl(Q) is too large to enumerate");
  std::vector<int> perm(static_cast<std::size_t>(pool));
  std::set<std::pair<std::vector<int>, LAtoms>> seen;  // (answer tuple, atoms)
  std::vector<ConjunctiveQuery> out;
  for (std::uint32_t sub = 1; sub < (1u << all.size()); ++sub) {
    LAtoms atoms;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (sub >> i & 1u) atoms.push_back(all[i]);
    // connectivity over variables; nullary atoms only stand alone
    std::vector<bool> in(atoms.size(), false);
    in[0] = true;
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t i = 0; i < atoms.size(); ++i)
        for (std::size_t j = 0; j < atoms.size() && !in[i]; ++j)
          if (in[j])
            for (int x : atoms[i].args)
              if (std::count(atoms[j].args.begin(), atoms[j].args.end(), x)) {
                in[i] = grew = true;
                break;
              }
    }
    if (std::count(in.begin(), in.end(), false)) continue;
    std::vector<int> used;
    for (const auto& a : atoms) used.insert(used.end(), a.args.begin(), a.args.end());
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    // ordered answer selections: every subset in every order
    std::vector<std::vector<int>> answer_choices;
    for (std::uint32_t m = 0; m < (1u << used.size()); ++m) {
      std::vector<int> sel;
      for (std::size_t i = 0; i < used.size(); ++i)
        if (m >> i & 1u) sel.push_back(used[i]);
      do answer_choices.push_back(sel);
      while (std::next_permutation(sel.begin(), sel.end()));
    }
    for (const auto& ans : answer_choices) {
      std::pair<std::vector<int>, LAtoms> best;
      bool have = false;
      std::iota(perm.begin(), perm.end(), 0);
      do {
        std::pair<std::vector<int>, LAtoms> cand;
        for (int v : ans) cand.first.push_back(perm[static_cast<std::size_t>(v)]);
        cand.second = atoms;
        for (auto& a : cand.second)
          for (int& x : a.args) x = perm[static_cast<std::size_t>(x)];
        std::sort(cand.second.begin(), cand.second.end());
        if (!have || cand < best) {
          best = std::move(cand);
          have = true;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      if (!seen.insert(best).second) continue;
      if (seen.size() > cap) throw ResourceLimitError("incomplete: cl(Q) exceeds the enumeration cap");
    }
  }
  for (const auto& [ans, atoms] : seen) {
    ConjunctiveQuery c;
    for (int v = 0; v < pool; ++v) c.var_names.push_back("v" + std::to_string(v));
    c.answer_vars = ans;
    for (const auto& a : atoms) {
      Atom at;
      at.rel = a.rel;
      for (int x : a.args) at.args.push_back(Term::var(x));
      c.atoms.push_back(std::move(at));
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace omq
