#pragma once

// Pull-based answer streams: the progress-tree enumerator for one connected
// component, the product over components, the complete-first interleaving,
// and the multi-wildcard refinement on top of a single-wildcard stream.

#include <list>

#include "omq/testing.hpp"

namespace omq {

class AnswerStream {
 public:
  virtual ~AnswerStream() = default;
  virtual std::optional<Tuple> next() = 0;
};

// ---------------------------------------------------------------------------
// one component
// ---------------------------------------------------------------------------

class PartialEnumerator : public AnswerStream {
 public:
  // With prune off every partial answer is produced, not only minimal ones.
  explicit PartialEnumerator(const PreparedInstance& p, bool prune = true)
      : p_(&p), idx_(build_trees_index(p)), prune_(prune) {
    h_.assign(static_cast<std::size_t>(p.arity), kUnset);
    if (prune_ && p.num_atoms() > 0) subtrees_ = join_subtrees(p.tree);
  }

  std::optional<Tuple> next() override {
    visits_ = 0;
    if (done_) return std::nullopt;
    if (!started_) {
      started_ = true;
      if (p_->empty) {
        done_ = true;
        return std::nullopt;
      }
      stack_.push_back(frame_at(nextat(-1)));
    }
    const int n = p_->num_atoms();
    while (!stack_.empty()) {
      Frame& f = stack_.back();
      if (f.pos == n) {  // end of atoms
        if (f.entered) {
          stack_.pop_back();
          continue;
        }
        f.entered = true;
        Tuple out = h_;
        if (prune_) prune(out);
        return out;
      }
      for (int x : f.assigned) h_[static_cast<std::size_t>(x)] = kUnset;
      f.assigned.clear();
      const int v = p_->tree.preorder[static_cast<std::size_t>(f.pos)];
      if (!f.entered) {
        f.entered = true;
        int l = idx_.find_list(v, pred_values(*p_, v, h_));
        f.cursor = next_live(l < 0 ? -1 : idx_.lists()[static_cast<std::size_t>(l)].head);
      } else {
        f.cursor = next_live(idx_.node(f.cursor).next);
      }
      if (f.cursor < 0) {
        stack_.pop_back();
        continue;
      }
      const auto& g = idx_.node(f.cursor).tree.g;
      for (std::size_t x = 0; x < g.size(); ++x)
        if (g[x] != kUnset && h_[x] == kUnset) {
          h_[x] = g[x];
          f.assigned.push_back(static_cast<int>(x));
        }
      const int pos = f.pos;
      stack_.push_back(frame_at(nextat(pos)));
    }
    done_ = true;
    return std::nullopt;
  }

  // Trees-list nodes touched while producing the last answer.
  std::size_t last_visits() const { return visits_; }
  const TreesIndex& index() const { return idx_; }
  const PreparedInstance& instance() const { return *p_; }

  // First pre-order position after `pos` with an unassigned variable, or
  // num_atoms() for end of atoms.
  int nextat(int pos) const { return nextat(pos, h_); }
  int nextat(int pos, const Tuple& h) const {
    const int n = p_->num_atoms();
    for (int j = pos + 1; j < n; ++j) {
      int v = p_->tree.preorder[static_cast<std::size_t>(j)];
      for (int x : p_->atom_vars[static_cast<std::size_t>(v)])
        if (h[static_cast<std::size_t>(x)] == kUnset) return j;
    }
    return n;
  }

 private:
  struct Frame {
    int pos = 0;
    int cursor = -1;
    bool entered = false;
    std::vector<int> assigned;
  };

  static Frame frame_at(int pos) {
    Frame f;
    f.pos = pos;
    return f;
  }

  int next_live(int n) {
    while (n >= 0) {
      ++visits_;
      if (!idx_.node(n).removed) return n;
      n = idx_.node(n).next;
    }
    return -1;
  }

  void prune(const Tuple& h) {
    const auto& jt = p_->tree;
    for (std::uint32_t mask : subtrees_) {
      int root = tree_root(jt, mask);
      bool pred_ok = true;
      for (int x : jt.pred_vars[static_cast<std::size_t>(root)]) pred_ok &= h[static_cast<std::size_t>(x)] != kStar;
      if (!pred_ok) continue;
      ProgressTree t{mask, Tuple(h.size(), kUnset)};
      std::vector<int> open;
      const auto& preds = jt.pred_vars[static_cast<std::size_t>(root)];
      for (int u = 0; u < p_->num_atoms(); ++u) {
        if (!(mask >> u & 1u)) continue;
        for (int x : p_->atom_vars[static_cast<std::size_t>(u)]) {
          auto& slot = t.g[static_cast<std::size_t>(x)];
          if (slot != kUnset) continue;
          slot = h[static_cast<std::size_t>(x)];
          if (slot != kStar && std::find(preds.begin(), preds.end(), x) == preds.end()) open.push_back(x);
        }
      }
      if (open.size() > 20) throw ResourceLimitError("subtree too wide for pruning");
      for (std::uint32_t s = 1; s < (1u << open.size()); ++s) {
        ProgressTree w = t;
        for (std::size_t i = 0; i < open.size(); ++i)
          if (s >> i & 1u) w.g[static_cast<std::size_t>(open[i])] = kStar;
        ++visits_;
        int node = idx_.locate(w);
        if (node >= 0) idx_.unlink(node);
      }
    }
  }

  const PreparedInstance* p_;
  TreesIndex idx_;
  bool prune_;
  std::vector<std::uint32_t> subtrees_;
  Tuple h_;
  std::vector<Frame> stack_;
  bool started_ = false;
  bool done_ = false;
  std::size_t visits_ = 0;
};

// ---------------------------------------------------------------------------
// combinators
// ---------------------------------------------------------------------------

// Cartesian product of component streams. The first component is streamed
// once; the others are cached during their first sweep and replayed.
class ProductStream : public AnswerStream {
 public:
  ProductStream(std::vector<std::unique_ptr<AnswerStream>> parts, std::vector<std::vector<int>> positions, int arity)
      : parts_(std::move(parts)), positions_(std::move(positions)), arity_(arity) {
    const std::size_t k = parts_.size();
    cache_.resize(k);
    idx_.assign(k, 0);
    exhausted_.assign(k, false);
  }

  std::optional<Tuple> next() override {
    if (finished_) return std::nullopt;
    const std::size_t k = parts_.size();
    if (!started_) {
      started_ = true;
      if (k == 0) {
        finished_ = true;
        return Tuple(static_cast<std::size_t>(arity_), kUnset);
      }
      for (std::size_t i = 0; i < k; ++i) {
        auto t = parts_[i]->next();
        if (!t) {
          finished_ = true;
          return std::nullopt;
        }
        cache_[i].push_back(std::move(*t));
      }
      return compose();
    }
    for (std::size_t i = k; i-- > 1;) {
      if (idx_[i] + 1 < cache_[i].size()) {
        ++idx_[i];
        return compose();
      }
      if (!exhausted_[i]) {
        if (auto t = parts_[i]->next()) {
          cache_[i].push_back(std::move(*t));
          ++idx_[i];
          return compose();
        }
        exhausted_[i] = true;
      }
      idx_[i] = 0;
    }
    auto t = parts_[0]->next();
    if (!t) {
      finished_ = true;
      return std::nullopt;
    }
    cache_[0][0] = std::move(*t);
    return compose();
  }

 private:
  Tuple compose() const {
    Tuple out(static_cast<std::size_t>(arity_), kUnset);
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Tuple& t = cache_[i][idx_[i]];
      for (std::size_t j = 0; j < t.size(); ++j) out[static_cast<std::size_t>(positions_[i][j])] = t[j];
    }
    return out;
  }

  std::vector<std::unique_ptr<AnswerStream>> parts_;
  std::vector<std::vector<int>> positions_;
  int arity_;
  std::vector<std::vector<Tuple>> cache_;  // component 0 keeps only its current tuple
  std::vector<std::size_t> idx_;
  std::vector<bool> exhausted_;
  bool started_ = false;
  bool finished_ = false;
};

// Applies a function to every tuple of a stream.
class MapStream : public AnswerStream {
 public:
  MapStream(std::unique_ptr<AnswerStream> inner, std::function<Tuple(const Tuple&)> f)
      : inner_(std::move(inner)), f_(std::move(f)) {}
  std::optional<Tuple> next() override {
    auto t = inner_->next();
    if (!t) return std::nullopt;
    return f_(*t);
  }

 private:
  std::unique_ptr<AnswerStream> inner_;
  std::function<Tuple(const Tuple&)> f_;
};

// Complete answers first, then the answers with wildcards. Both inputs run in
// lockstep; wildcard answers met meanwhile wait in a holding list.
class CompleteFirstStream : public AnswerStream {
 public:
  CompleteFirstStream(std::unique_ptr<AnswerStream> complete, std::unique_ptr<AnswerStream> partial)
      : complete_(std::move(complete)), partial_(std::move(partial)) {}

  std::optional<Tuple> next() override {
    if (!complete_done_) {
      if (auto c = complete_->next()) {
        step_partial();
        return c;
      }
      complete_done_ = true;
    }
    for (;;) {
      if (held_.empty()) step_partial();
      if (!held_.empty()) {
        Tuple t = std::move(held_.front());
        held_.pop_front();
        step_partial();
        return t;
      }
      if (partial_done_) return std::nullopt;
    }
  }

 private:
  void step_partial() {
    if (partial_done_) return;
    auto t = partial_->next();
    if (!t) {
      partial_done_ = true;
      return;
    }
    if (std::any_of(t->begin(), t->end(), is_wild)) held_.push_back(std::move(*t));
  }

  std::unique_ptr<AnswerStream> complete_, partial_;
  std::deque<Tuple> held_;
  bool complete_done_ = false;
  bool partial_done_ = false;
};

// ---------------------------------------------------------------------------
// multi-wildcard answers
// ---------------------------------------------------------------------------

class MultiEnumerator : public AnswerStream {
 public:
  using Membership = std::function<bool(const Tuple&)>;

  MultiEnumerator(std::unique_ptr<AnswerStream> single, Membership member)
      : single_(std::move(single)), member_(std::move(member)) {}

  std::optional<Tuple> next() override {
    if (!single_done_) {
      if (auto a = single_->next()) return refine(*a);
      single_done_ = true;
    }
    if (pending_.empty()) return std::nullopt;
    Tuple t = std::move(pending_.front());
    where_.erase(t);
    pending_.pop_front();
    return t;
  }

  std::size_t pending_size() const { return pending_.size(); }

 private:
  bool member(const Tuple& t) {
    auto it = memo_.find(t);
    if (it != memo_.end()) return it->second;
    bool r = member_(t);
    memo_.emplace(t, r);
    return r;
  }

  void remove_pending(const Tuple& t) {
    auto it = where_.find(t);
    if (it == where_.end()) return;
    pending_.erase(it->second);
    where_.erase(it);
  }

  Tuple refine(const Tuple& a) {
    for (const Tuple& x : multi_cone(a)) {
      if (seen_.count(x) || !member(x)) continue;
      seen_.insert(x);
      pending_.push_back(x);
      where_.emplace(x, std::prev(pending_.end()));
      for_each_multi_successor(x, [&](const Tuple& b) {
        seen_.insert(b);
        remove_pending(b);
      });
    }
    std::vector<Tuple> in_ball;
    for (const Tuple& x : multi_ball(a))
      if (member(x)) in_ball.push_back(x);
    if (in_ball.empty()) throw std::logic_error("single-wildcard answer without a multi-wildcard refinement");
    const Tuple* best = nullptr;
    for (const auto& x : in_ball) {
      bool minimal = std::none_of(in_ball.begin(), in_ball.end(), [&](const Tuple& y) { return multi_lt(y, x); });
      if (minimal && (!best || multi_lex_less(x, *best))) best = &x;
    }
    Tuple out = *best;
    remove_pending(out);
    return out;
  }

  std::unique_ptr<AnswerStream> single_;
  Membership member_;
  std::unordered_map<Tuple, bool, TupleHash> memo_;
  TupleSet seen_;
  std::list<Tuple> pending_;
  std::unordered_map<Tuple, std::list<Tuple>::iterator, TupleHash> where_;
  bool single_done_ = false;
};

// ---------------------------------------------------------------------------
// end to end
// ---------------------------------------------------------------------------

struct EnumOptions {
  AnswerKind kind = AnswerKind::Single;
  bool complete_first = false;
  bool prune = true;
  int root_atom = -1;
  int forced_depth = -1;
};

// Owns everything a running enumeration needs.
struct Enumeration {
  Pipeline pipeline;
  std::vector<PreparedInstance> complete_parts;  // for complete-first
  std::unique_ptr<MultiImageTester> tester;
  std::vector<PartialEnumerator*> enumerators;
  std::unique_ptr<AnswerStream> stream;

  std::optional<Tuple> next() { return stream->next(); }

  // Sum of per-component trees-list visits for the last answer.
  std::size_t last_visits() const {
    std::size_t s = 0;
    for (auto* e : enumerators) s += e->last_visits();
    return s;
  }
};

inline std::unique_ptr<Enumeration> make_enumeration(const Omq& q, const Database& d, Vocabulary& voc,
                                                     EnumOptions opt = {}) {
  require_guarded(q);
  require_enumerable(q.query);
  if (opt.complete_first && opt.kind != AnswerKind::Single)
    throw UsageError("--complete-first applies to partial answers only");
  auto e = std::make_unique<Enumeration>();
  PipelineOptions po;
  po.kind = opt.kind;
  po.root_atom = opt.root_atom;
  po.forced_depth = opt.forced_depth;
  e->pipeline = build_pipeline(q, d, voc, po);
  auto& pl = e->pipeline;
  const int narity = pl.nq.q.arity();

  auto product = [&](const std::vector<const PreparedInstance*>& preps, bool prune, bool record) {
    std::vector<std::unique_ptr<AnswerStream>> parts;
    std::vector<std::vector<int>> positions;
    for (std::size_t i = 0; i < preps.size(); ++i) {
      auto pe = std::make_unique<PartialEnumerator>(*preps[i], prune);
      if (record) e->enumerators.push_back(pe.get());
      parts.push_back(std::move(pe));
      positions.push_back(pl.comps[i].positions);
    }
    return std::make_unique<ProductStream>(std::move(parts), std::move(positions), narity);
  };
  std::vector<const PreparedInstance*> preps;
  for (const auto& c : pl.comps) preps.push_back(&c.prep);

  const NormalizedQuery* nq = &pl.nq;
  std::unique_ptr<AnswerStream> s;
  switch (opt.kind) {
    case AnswerKind::Complete:
      s = product(preps, false, true);
      break;
    case AnswerKind::Single:
      s = product(preps, opt.prune, true);
      if (opt.complete_first) {
        for (const auto& c : pl.comps) {
          PrepareOptions pr;
          pr.drop_nulls = true;
          e->complete_parts.push_back(build_q1_d1(c.q, pl.chase, voc.consts, &voc, pr));
        }
        std::vector<const PreparedInstance*> cp;
        for (const auto& c : e->complete_parts) cp.push_back(&c);
        s = std::make_unique<CompleteFirstStream>(product(cp, false, false), std::move(s));
      }
      break;
    case AnswerKind::Multi: {
      e->tester = std::make_unique<MultiImageTester>(pl);
      auto* tester = e->tester.get();
      s = std::make_unique<MultiEnumerator>(product(preps, true, true),
                                            [tester](const Tuple& t) { return tester->test(t); });
      break;
    }
  }
  const bool multi = opt.kind == AnswerKind::Multi;
  e->stream = std::make_unique<MapStream>(std::move(s), [nq, multi](const Tuple& t) {
    Tuple out = nq->expand_tuple(t);
    return multi ? canonical_multi(out) : out;
  });
  return e;
}

// Drains an enumeration into a vector (tests and the oracle comparison).
inline std::vector<Tuple> collect(Enumeration& e, std::size_t limit = SIZE_MAX) {
  std::vector<Tuple> out;
  while (out.size() < limit) {
    auto t = e.next();
    if (!t) break;
    out.push_back(std::move(*t));
  }
  return out;
}

}  // namespace omq
