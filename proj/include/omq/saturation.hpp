#pragma once

// Entailment inside guarded bags. A bag is a small set of local constants
// 0..m-1 together with the atoms over them. Its saturation is the set of
// atoms over the bag that every model of the ontology extending the bag must
// contain. Bags are identified up to isomorphism, so the number of distinct
// saturated types depends only on the ontology.

#include <functional>
#include <map>
#include <numeric>

#include "omq/core.hpp"

namespace omq {

struct LAtom {
  int rel = 0;
  std::vector<int> args;
  friend bool operator==(const LAtom&, const LAtom&) = default;
  friend auto operator<=>(const LAtom&, const LAtom&) = default;
};
using LAtoms = std::vector<LAtom>;

inline void normalize_latoms(LAtoms& a) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
}

struct BagKey {
  int m = 0;
  LAtoms atoms;
  friend bool operator==(const BagKey&, const BagKey&) = default;
};

struct BagKeyHash {
  std::size_t operator()(const BagKey& k) const noexcept {
    std::size_t h = std::hash<int>{}(k.m);
    for (const auto& a : k.atoms) {
      boost::hash_combine(h, a.rel);
      boost::hash_combine(h, boost::hash_range(a.args.begin(), a.args.end()));
    }
    return h;
  }
};

// Canonical form under renaming of local constants. Constants are first
// ordered by an isomorphism-invariant signature; only permutations inside
// equal-signature blocks are tried.
inline BagKey canonical_bag(int m, const LAtoms& atoms, std::vector<int>& perm) {
  std::vector<std::vector<std::pair<int, int>>> sig(static_cast<std::size_t>(m));
  for (const auto& a : atoms)
    for (std::size_t p = 0; p < a.args.size(); ++p)
      sig[static_cast<std::size_t>(a.args[p])].emplace_back(a.rel, static_cast<int>(p));
  for (auto& s : sig) std::sort(s.begin(), s.end());
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return sig[static_cast<std::size_t>(x)] < sig[static_cast<std::size_t>(y)];
  });
  // blocks of equal signature, as ranges in `order`
  std::vector<std::pair<int, int>> blocks;
  for (int i = 0; i < m;) {
    int j = i;
    while (j < m && sig[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] ==
                        sig[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])])
      ++j;
    blocks.emplace_back(i, j);
    i = j;
  }
  BagKey best;
  best.m = m;
  bool have = false;
  std::vector<int> cur = order;  // cur[newpos] = old const
  std::vector<int> p(static_cast<std::size_t>(m));
  LAtoms mapped;
  auto evaluate = [&] {
    for (int i = 0; i < m; ++i) p[static_cast<std::size_t>(cur[static_cast<std::size_t>(i)])] = i;
    mapped = atoms;
    for (auto& a : mapped)
      for (auto& x : a.args) x = p[static_cast<std::size_t>(x)];
    std::sort(mapped.begin(), mapped.end());
    if (!have || mapped < best.atoms) {
      best.atoms = mapped;
      perm = p;
      have = true;
    }
  };
  // odometer over permutations of every block
  std::function<void(std::size_t)> rec = [&](std::size_t b) {
    if (b == blocks.size()) {
      evaluate();
      return;
    }
    auto [lo, hi] = blocks[b];
    std::sort(cur.begin() + lo, cur.begin() + hi);
    do {
      rec(b + 1);
    } while (std::next_permutation(cur.begin() + lo, cur.begin() + hi));
  };
  rec(0);
  if (m == 0) {
    best.atoms = atoms;
    std::sort(best.atoms.begin(), best.atoms.end());
    perm.clear();
  }
  best.atoms.erase(std::unique(best.atoms.begin(), best.atoms.end()), best.atoms.end());
  return best;
}

// Enumerates matches of rule-body atoms (over rule variables) inside a bag.
// sigma[v] is the local constant of rule variable v, -1 when unbound.
template <class F>
void match_atoms(const std::vector<Atom>& body, const LAtoms& atoms, std::vector<int>& sigma,
                 std::size_t i, F&& f) {
  if (i == body.size()) {
    f(sigma);
    return;
  }
  const Atom& b = body[i];
  for (const auto& a : atoms) {
    if (a.rel != b.rel) continue;
    std::vector<int> bound;
    bool ok = true;
    for (std::size_t p = 0; p < b.args.size() && ok; ++p) {
      int v = b.args[p].id;
      int& s = sigma[static_cast<std::size_t>(v)];
      if (s < 0) {
        s = a.args[p];
        bound.push_back(v);
      } else if (s != a.args[p]) {
        ok = false;
      }
    }
    if (ok) match_atoms(body, atoms, sigma, i + 1, f);
    for (int v : bound) sigma[static_cast<std::size_t>(v)] = -1;
  }
}

class TypeSaturator {
 public:
  struct Trigger {
    int rule = 0;
    std::vector<int> image;            // rule var -> local const, -1 if not a body var
    int child = -1;                    // child type
    std::vector<int> child_to_parent;  // child const -> parent const, -1 when fresh
    std::vector<int> frontier;         // parent consts reached by the frontier, sorted
  };

  struct Type {
    int m = 0;
    LAtoms atoms;  // saturated, canonical numbering
    std::vector<Trigger> triggers;
  };

  struct Handle {
    int type = -1;
    std::vector<int> perm;  // input local const -> canonical const of `type`
  };

  explicit TypeSaturator(const Ontology& onto, std::size_t max_types = 200000)
      : onto_(onto), max_types_(max_types) {}

  Handle saturate(int m, LAtoms atoms) {
    normalize_latoms(atoms);
    Handle h;
    h.type = intern(m, atoms, h.perm);
    run();
    return h;
  }

  const Type& type(int id) const { return entries_[static_cast<std::size_t>(id)].t; }
  std::size_t size() const { return entries_.size(); }
  const Ontology& ontology() const { return onto_; }

 private:
  struct Entry {
    Type t;
    std::vector<int> dependents;
    bool queued = false;
  };

  int intern(int m, const LAtoms& atoms, std::vector<int>& perm) {
    BagKey key = canonical_bag(m, atoms, perm);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    if (entries_.size() >= max_types_)
      throw ResourceLimitError("incomplete: too many bag types during saturation");
    int id = static_cast<int>(entries_.size());
    Entry e;
    e.t.m = m;
    e.t.atoms = key.atoms;
    entries_.push_back(std::move(e));
    index_.emplace(std::move(key), id);
    enqueue(id);
    return id;
  }

  void enqueue(int id) {
    auto& e = entries_[static_cast<std::size_t>(id)];
    if (e.queued) return;
    e.queued = true;
    queue_.push_back(id);
  }

  void run() {
    while (!queue_.empty()) {
      int id = queue_.back();
      queue_.pop_back();
      entries_[static_cast<std::size_t>(id)].queued = false;
      process(id);
    }
  }

  static bool insert_atom(LAtoms& atoms, const LAtom& a) {
    auto it = std::lower_bound(atoms.begin(), atoms.end(), a);
    if (it != atoms.end() && *it == a) return false;
    atoms.insert(it, a);
    return true;
  }

  void process(int id) {
    LAtoms atoms = entries_[static_cast<std::size_t>(id)].t.atoms;
    const std::size_t before = atoms.size();
    std::vector<Trigger> triggers;
    for (;;) {
      bool grew = false;
      triggers.clear();
      for (std::size_t r = 0; r < onto_.rules.size(); ++r) {
        const Tgd& rule = onto_.rules[r];
        std::vector<int> sigma(static_cast<std::size_t>(rule.num_vars()), -1);
        std::vector<std::vector<int>> matches;
        match_atoms(rule.body, atoms, sigma, 0, [&](const std::vector<int>& s) { matches.push_back(s); });
        for (const auto& s : matches) {
          if (rule.existential.empty()) {
            for (const auto& h : rule.head) {
              LAtom a{h.rel, {}};
              for (const auto& t : h.args) a.args.push_back(s[static_cast<std::size_t>(t.id)]);
              grew |= insert_atom(atoms, a);
            }
            continue;
          }
          Trigger tr;
          tr.rule = static_cast<int>(r);
          tr.image = s;
          // child numbering: frontier images first, then existentials
          std::vector<int> fr;
          for (int v : rule.frontier) {
            int c = s[static_cast<std::size_t>(v)];
            if (std::find(fr.begin(), fr.end(), c) == fr.end()) fr.push_back(c);
          }
          const int mc = static_cast<int>(fr.size() + rule.existential.size());
          std::vector<int> local_of_var(static_cast<std::size_t>(rule.num_vars()), -1);
          for (int v : rule.frontier)
            local_of_var[static_cast<std::size_t>(v)] = static_cast<int>(
                std::find(fr.begin(), fr.end(), s[static_cast<std::size_t>(v)]) - fr.begin());
          for (std::size_t j = 0; j < rule.existential.size(); ++j)
            local_of_var[static_cast<std::size_t>(rule.existential[j])] = static_cast<int>(fr.size() + j);
          LAtoms init;
          for (const auto& h : rule.head) {
            LAtom a{h.rel, {}};
            for (const auto& t : h.args) a.args.push_back(local_of_var[static_cast<std::size_t>(t.id)]);
            init.push_back(std::move(a));
          }
          for (const auto& a : atoms) {
            LAtom b{a.rel, {}};
            bool inside = true;
            for (int x : a.args) {
              auto it = std::find(fr.begin(), fr.end(), x);
              if (it == fr.end()) {
                inside = false;
                break;
              }
              b.args.push_back(static_cast<int>(it - fr.begin()));
            }
            if (inside) init.push_back(std::move(b));
          }
          normalize_latoms(init);
          std::vector<int> perm;
          int child = intern(mc, init, perm);
          auto& deps = entries_[static_cast<std::size_t>(child)].dependents;
          if (std::find(deps.begin(), deps.end(), id) == deps.end()) deps.push_back(id);
          tr.child = child;
          tr.child_to_parent.assign(static_cast<std::size_t>(mc), -1);
          for (std::size_t i = 0; i < fr.size(); ++i) tr.child_to_parent[static_cast<std::size_t>(perm[i])] = fr[i];
          tr.frontier = fr;
          std::sort(tr.frontier.begin(), tr.frontier.end());
          // atoms of the child over inherited constants flow back
          const LAtoms child_atoms = entries_[static_cast<std::size_t>(child)].t.atoms;
          for (const auto& a : child_atoms) {
            LAtom b{a.rel, {}};
            bool inside = true;
            for (int x : a.args) {
              int p = tr.child_to_parent[static_cast<std::size_t>(x)];
              if (p < 0) {
                inside = false;
                break;
              }
              b.args.push_back(p);
            }
            if (inside) grew |= insert_atom(atoms, b);
          }
          triggers.push_back(std::move(tr));
        }
      }
      if (!grew) break;
    }
    auto& e = entries_[static_cast<std::size_t>(id)];
    e.t.atoms = std::move(atoms);
    e.t.triggers = std::move(triggers);
    if (e.t.atoms.size() != before)
      for (int d : e.dependents) enqueue(d);
  }

  const Ontology& onto_;
  std::size_t max_types_;
  std::vector<Entry> entries_;
  std::unordered_map<BagKey, int, BagKeyHash> index_;
  std::vector<int> queue_;
};

}  // namespace omq
