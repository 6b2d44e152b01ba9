#pragma once

// Neighbourhoods of answer tuples under the wildcard orders: the strictly
// weaker tuples of a tuple, the multi-wildcard refinements of a
// single-wildcard tuple, and minimality filters over finite sets.

#include <functional>

#include "omq/core.hpp"

namespace omq {

// Restricted growth strings of length n: labels[i] <= 1 + max(labels[0..i)).
template <class F>
void for_each_set_partition(int n, F&& f) {
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      f(static_cast<const std::vector<int>&>(labels));
      return;
    }
    for (int l = 0; l <= used; ++l) {
      labels[static_cast<std::size_t>(i)] = l;
      rec(i + 1, std::max(used, l + 1));
    }
  };
  if (n == 0) {
    f(static_cast<const std::vector<int>&>(labels));
    return;
  }
  rec(0, 0);
}

inline std::vector<int> wild_positions(const Tuple& t) {
  std::vector<int> out;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (is_wild(t[i])) out.push_back(static_cast<int>(i));
  return out;
}

inline std::vector<int> const_positions(const Tuple& t) {
  std::vector<int> out;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!is_wild(t[i])) out.push_back(static_cast<int>(i));
  return out;
}

// Every multi-wildcard tuple that flattens to `a`, in a fixed order.
inline std::vector<Tuple> multi_ball(const Tuple& a) {
  auto pos = wild_positions(a);
  std::vector<Tuple> out;
  for_each_set_partition(static_cast<int>(pos.size()), [&](const std::vector<int>& labels) {
    Tuple t = a;
    for (std::size_t i = 0; i < pos.size(); ++i) t[static_cast<std::size_t>(pos[i])] = make_wild(labels[i] + 1);
    out.push_back(std::move(t));
  });
  return out;
}

// The union of the balls of all single-wildcard tuples b with a ⪯ b.
inline std::vector<Tuple> multi_cone(const Tuple& a) {
  auto cpos = const_positions(a);
  if (cpos.size() > 20) throw ResourceLimitError("tuple too long for cone enumeration");
  std::vector<Tuple> out;
  for (std::uint32_t mask = 0; mask < (1u << cpos.size()); ++mask) {
    Tuple b = a;
    for (std::size_t i = 0; i < cpos.size(); ++i)
      if (mask >> i & 1u) b[static_cast<std::size_t>(cpos[i])] = kStar;
    auto ball = multi_ball(b);
    out.insert(out.end(), std::make_move_iterator(ball.begin()), std::make_move_iterator(ball.end()));
  }
  return out;
}

// Calls f(c) for every multi-wildcard tuple c with b ≺ c.
template <class F>
void for_each_multi_successor(const Tuple& b, F&& f) {
  auto cpos = const_positions(b);
  if (cpos.size() > 20) throw ResourceLimitError("tuple too long for successor enumeration");
  for (std::uint32_t mask = 0; mask < (1u << cpos.size()); ++mask) {
    std::vector<bool> open(b.size(), false);
    for (std::size_t i = 0; i < b.size(); ++i) open[i] = is_wild(b[i]);
    for (std::size_t i = 0; i < cpos.size(); ++i)
      if (mask >> i & 1u) open[static_cast<std::size_t>(cpos[i])] = true;
    // open positions grouped by their value in b; c may only split groups
    std::vector<std::vector<int>> groups;
    std::vector<ConstId> keys;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!open[i]) continue;
      auto it = std::find(keys.begin(), keys.end(), b[i]);
      if (it == keys.end()) {
        keys.push_back(b[i]);
        groups.push_back({static_cast<int>(i)});
      } else {
        groups[static_cast<std::size_t>(it - keys.begin())].push_back(static_cast<int>(i));
      }
    }
    Tuple c = b;
    int next_label = 1;
    std::function<void(std::size_t)> rec = [&](std::size_t g) {
      if (g == groups.size()) {
        Tuple out = canonical_multi(c);
        if (out != b) f(static_cast<const Tuple&>(out));
        return;
      }
      const auto& grp = groups[g];
      int base = next_label;
      for_each_set_partition(static_cast<int>(grp.size()), [&](const std::vector<int>& labels) {
        int used = 0;
        for (std::size_t i = 0; i < grp.size(); ++i) {
          c[static_cast<std::size_t>(grp[i])] = make_wild(base + labels[i]);
          used = std::max(used, labels[i] + 1);
        }
        next_label = base + used;
        rec(g + 1);
      });
      next_label = base;
    };
    rec(0);
  }
}

// Calls f(c) for every single-wildcard tuple c with b ≺ c.
template <class F>
void for_each_single_successor(const Tuple& b, F&& f) {
  auto cpos = const_positions(b);
  if (cpos.size() > 20) throw ResourceLimitError("tuple too long for successor enumeration");
  for (std::uint32_t mask = 1; mask < (1u << cpos.size()); ++mask) {
    Tuple c = b;
    for (std::size_t i = 0; i < cpos.size(); ++i)
      if (mask >> i & 1u) c[static_cast<std::size_t>(cpos[i])] = kStar;
    f(static_cast<const Tuple&>(c));
  }
}

// Constants before wildcards, constants by id, *i before *j for i < j.
inline bool multi_lex_less(const Tuple& a, const Tuple& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] == b[i]) continue;
    bool wa = is_wild(a[i]), wb = is_wild(b[i]);
    if (wa != wb) return !wa;
    if (!wa) return a[i] < b[i];
    return wild_index(a[i]) < wild_index(b[i]);
  }
  return a.size() < b.size();
}

inline std::vector<Tuple> minimal_single(const TupleSet& s) {
  TupleSet dominated;
  for (const auto& t : s) for_each_single_successor(t, [&](const Tuple& c) { dominated.insert(c); });
  std::vector<Tuple> out;
  for (const auto& t : s)
    if (!dominated.count(t)) out.push_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<Tuple> minimal_multi(const TupleSet& s) {
  TupleSet dominated;
  for (const auto& t : s) for_each_multi_successor(t, [&](const Tuple& c) { dominated.insert(c); });
  std::vector<Tuple> out;
  for (const auto& t : s)
    if (!dominated.count(t)) out.push_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace omq
