#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "omq/core.hpp"

namespace omq {

struct SourceSpan {
  std::string file;
  int line = 1;
  int column = 1;
};

class ParseError : public UsageError {
 public:
  ParseError(SourceSpan span, const std::string& msg)
      : UsageError(span.file + ":" + std::to_string(span.line) + ":" + std::to_string(span.column) +
                   ": " + msg),
        span_(std::move(span)) {}
  const SourceSpan& span() const { return span_; }

 private:
  SourceSpan span_;
};

namespace detail {

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '\'' || c == '-';
}
inline bool const_start(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Character cursor over a whole text with line/column tracking and `%`
// comments treated as whitespace.
class Lexer {
 public:
  Lexer(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

  SourceSpan span() const { return {file_, line_, col_}; }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(span(), msg); }

  // Skips blanks and comments. When `stop_at_newline` is set, newlines are
  // not consumed.
  void skip(bool stop_at_newline = false) {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == '\n') {
        if (stop_at_newline) return;
        advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  bool eof() { return pos_ >= text_.size(); }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  char peek2() const { return pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0'; }
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  bool accept(char c) {
    if (peek() != c) return false;
    advance();
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  bool accept_word(std::string_view w) {
    if (text_.substr(pos_, w.size()) != w) return false;
    if (pos_ + w.size() < text_.size() && ident_char(text_[pos_ + w.size()])) return false;
    for (std::size_t i = 0; i < w.size(); ++i) advance();
    return true;
  }
  bool accept_str(std::string_view w) {
    if (text_.substr(pos_, w.size()) != w) return false;
    for (std::size_t i = 0; i < w.size(); ++i) advance();
    return true;
  }

  std::string identifier() {
    if (!ident_start(peek())) fail("expected identifier");
    std::string out;
    while (ident_char(peek())) {
      out += peek();
      advance();
    }
    return out;
  }

  // A term is a bare word or a double-quoted string. `quoted` reports which.
  std::string term(bool& quoted) {
    quoted = false;
    std::string out;
    if (peek() == '"') {
      quoted = true;
      advance();
      while (peek() != '"') {
        if (eof() || peek() == '\n') fail("unterminated string");
        if (peek() == '\\') {
          advance();
          if (eof()) fail("unterminated string");
        }
        out += peek();
        advance();
      }
      advance();
      return out;
    }
    if (peek() == '_' && peek2() == ':') fail("the prefix _: is reserved for nulls");
    if (!const_start(peek())) fail("expected a term");
    while (ident_char(peek())) {
      out += peek();
      advance();
    }
    return out;
  }

 private:
  std::string_view text_;
  std::string file_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct RawTerm {
  std::string text;
  bool quoted = false;
  SourceSpan span;
};

struct RawAtom {
  std::string rel;
  std::vector<RawTerm> args;
  SourceSpan span;
};

inline RawAtom raw_atom(Lexer& lx) {
  RawAtom a;
  lx.skip(true);
  a.span = lx.span();
  a.rel = lx.identifier();
  lx.skip(true);
  lx.expect('(');
  lx.skip(true);
  if (!lx.accept(')')) {
    for (;;) {
      lx.skip(true);
      RawTerm t;
      t.span = lx.span();
      t.text = lx.term(t.quoted);
      a.args.push_back(std::move(t));
      lx.skip(true);
      if (lx.accept(')')) break;
      lx.expect(',');
    }
  }
  return a;
}

inline std::vector<RawAtom> raw_atom_list(Lexer& lx) {
  std::vector<RawAtom> out;
  for (;;) {
    out.push_back(raw_atom(lx));
    lx.skip(true);
    if (!lx.accept(',')) break;
  }
  return out;
}

inline int rel_id(Vocabulary& voc, const RawAtom& a) {
  try {
    return voc.rels.intern(a.rel, static_cast<int>(a.args.size()));
  } catch (const UsageError& e) {
    throw ParseError(a.span, e.what());
  }
}

inline void parse_schema_line(Lexer& lx, Vocabulary& voc, std::vector<int>* schema) {
  for (;;) {
    lx.skip(true);
    auto sp = lx.span();
    std::string name = lx.identifier();
    lx.expect('/');
    std::string digits;
    while (std::isdigit(static_cast<unsigned char>(lx.peek()))) {
      digits += lx.peek();
      lx.advance();
    }
    if (digits.empty()) lx.fail("expected arity");
    int id;
    try {
      id = voc.rels.intern(name, std::stoi(digits));
    } catch (const UsageError& e) {
      throw ParseError(sp, e.what());
    }
    if (schema) schema->push_back(id);
    lx.skip(true);
    if (!lx.accept(',')) break;
  }
}

inline bool is_variable_token(const RawTerm& t) { return !t.quoted && ident_start(t.text[0]); }

}  // namespace detail

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

struct ParsedDatabase {
  Database db;
  std::optional<std::vector<int>> declared_schema;
};

inline ParsedDatabase parse_database_full(std::string_view text, Vocabulary& voc,
                                          const std::string& file = "<database>") {
  ParsedDatabase out;
  detail::Lexer lx(text, file);
  for (;;) {
    lx.skip();
    if (lx.eof()) break;
    if (lx.accept('@')) {
      if (!lx.accept_word("schema")) lx.fail("unknown directive");
      if (!out.declared_schema) out.declared_schema.emplace();
      detail::parse_schema_line(lx, voc, &*out.declared_schema);
      continue;
    }
    auto a = detail::raw_atom(lx);
    int rel = detail::rel_id(voc, a);
    Fact f;
    f.rel = rel;
    for (const auto& t : a.args) {
      try {
        f.args.push_back(voc.consts.named(t.text));
      } catch (const UsageError& e) {
        throw ParseError(t.span, e.what());
      }
    }
    out.db.add(std::move(f));
    lx.skip(true);
    lx.accept('.');
    lx.skip(true);
    if (!lx.eof() && lx.peek() != '\n' && !std::isalpha(static_cast<unsigned char>(lx.peek())) &&
        lx.peek() != '@')
      lx.fail("unexpected character after fact");
  }
  if (out.declared_schema) {
    auto& s = *out.declared_schema;
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return out;
}

inline Database parse_database(std::string_view text, Vocabulary& voc,
                               const std::string& file = "<database>") {
  return parse_database_full(text, voc, file).db;
}

inline Ontology parse_ontology(std::string_view text, Vocabulary& voc,
                               const std::string& file = "<ontology>") {
  Ontology onto;
  detail::Lexer lx(text, file);
  for (;;) {
    lx.skip();
    if (lx.eof()) break;
    Tgd t;
    std::unordered_map<std::string, int> vars;
    auto var_of = [&](const detail::RawTerm& rt) {
      if (!detail::is_variable_token(rt))
        throw ParseError(rt.span, "constants are not allowed in rules: " + rt.text);
      auto it = vars.find(rt.text);
      if (it != vars.end()) return it->second;
      int id = static_cast<int>(t.var_names.size());
      t.var_names.push_back(rt.text);
      vars.emplace(rt.text, id);
      return id;
    };
    auto convert = [&](const std::vector<detail::RawAtom>& raws, std::vector<Atom>& dst) {
      for (const auto& ra : raws) {
        Atom a;
        a.rel = detail::rel_id(voc, ra);
        for (const auto& rt : ra.args) a.args.push_back(Term::var(var_of(rt)));
        dst.push_back(std::move(a));
      }
    };
    auto rule_span = lx.span();
    if (!lx.accept_word("true")) convert(detail::raw_atom_list(lx), t.body);
    lx.skip(true);
    if (!lx.accept_str("->")) lx.fail("expected '->'");
    lx.skip(true);
    std::vector<std::string> declared;
    std::vector<detail::RawTerm> declared_raw;
    if (lx.accept_word("exists")) {
      for (;;) {
        lx.skip(true);
        detail::RawTerm rt;
        rt.span = lx.span();
        rt.text = lx.identifier();
        declared_raw.push_back(rt);
        lx.skip(true);
        if (!lx.accept(',')) break;
      }
      lx.skip(true);
      lx.expect('.');
    }
    std::unordered_map<std::string, int> body_vars = vars;
    for (const auto& rt : declared_raw) {
      if (body_vars.count(rt.text))
        throw ParseError(rt.span, "existential variable " + rt.text + " occurs in the body");
      var_of(rt);
    }
    auto head_raw = detail::raw_atom_list(lx);
    for (const auto& ra : head_raw)
      for (const auto& rt : ra.args)
        if (detail::is_variable_token(rt) && !vars.count(rt.text))
          throw ParseError(rt.span, "head variable " + rt.text +
                                        " is neither a frontier variable nor declared existential");
    convert(head_raw, t.head);
    if (t.head.empty()) throw ParseError(rule_span, "empty head");
    analyze_tgd(t, voc.rels);
    for (const auto& rt : declared_raw) {
      int v = vars.at(rt.text);
      if (std::find(t.existential.begin(), t.existential.end(), v) == t.existential.end())
        throw ParseError(rt.span, "existential variable " + rt.text + " does not occur in the head");
    }
    onto.rules.push_back(std::move(t));
    lx.skip(true);
    lx.accept('.');
    lx.skip(true);
    if (!lx.eof() && lx.peek() != '\n') lx.fail("expected end of line after rule");
  }
  return onto;
}

inline ConjunctiveQuery parse_query(std::string_view text, Vocabulary& voc,
                                    const std::string& file = "<query>") {
  ConjunctiveQuery q;
  detail::Lexer lx(text, file);
  std::unordered_map<std::string, int> vars;
  auto var_of = [&](const std::string& name) {
    auto it = vars.find(name);
    if (it != vars.end()) return it->second;
    int id = static_cast<int>(q.var_names.size());
    q.var_names.push_back(name);
    vars.emplace(name, id);
    return id;
  };
  lx.skip();
  auto head_span = lx.span();
  if (lx.eof()) lx.fail("empty query");
  q.name = lx.identifier();
  lx.skip(true);
  lx.expect('(');
  lx.skip(true);
  std::vector<std::pair<std::string, SourceSpan>> head_vars;
  if (!lx.accept(')')) {
    for (;;) {
      lx.skip(true);
      auto sp = lx.span();
      if (!detail::ident_start(lx.peek())) lx.fail("answer positions must be variables");
      head_vars.emplace_back(lx.identifier(), sp);
      lx.skip(true);
      if (lx.accept(')')) break;
      lx.expect(',');
    }
  }
  lx.skip();
  if (!lx.accept_str("<-") && !lx.accept_str(":-")) lx.fail("expected '<-'");
  lx.skip();
  for (const auto& [name, sp] : head_vars) q.answer_vars.push_back(var_of(name));
  auto body = detail::raw_atom_list(lx);
  for (const auto& ra : body) {
    Atom a;
    a.rel = detail::rel_id(voc, ra);
    for (const auto& rt : ra.args) {
      if (detail::is_variable_token(rt)) {
        a.args.push_back(Term::var(var_of(rt.text)));
      } else {
        try {
          a.args.push_back(Term::constant(voc.consts.named(rt.text)));
        } catch (const UsageError& e) {
          throw ParseError(rt.span, e.what());
        }
      }
    }
    q.atoms.push_back(std::move(a));
  }
  lx.skip();
  lx.accept('.');
  lx.skip();
  if (!lx.eof()) lx.fail("trailing input after query");
  std::vector<bool> used(q.var_names.size(), false);
  for (const auto& a : q.atoms)
    for (const auto& t : a.args)
      if (t.is_var) used[static_cast<std::size_t>(t.id)] = true;
  for (std::size_t i = 0; i < head_vars.size(); ++i)
    if (!used[static_cast<std::size_t>(q.answer_vars[i])])
      throw ParseError(head_vars[i].second,
                       "answer variable " + head_vars[i].first + " does not occur in the body");
  (void)head_span;
  return q;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// printing
// ---------------------------------------------------------------------------

inline std::string quote_constant(const std::string& label) {
  bool bare = !label.empty() && detail::const_start(label[0]) && label.substr(0, 2) != "_:";
  for (char c : label) bare = bare && detail::ident_char(c);
  if (bare) return label;
  std::string out = "\"";
  for (char c : label) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline std::string constant_text(const Vocabulary& voc, ConstId c) {
  if (voc.consts.is_null(c)) return voc.consts.label(c);
  return quote_constant(voc.consts.label(c));
}

inline std::string print_fact(const Vocabulary& voc, const Fact& f) {
  std::string out = voc.rels.name(f.rel) + "(";
  for (std::size_t i = 0; i < f.args.size(); ++i) {
    if (i) out += ",";
    out += constant_text(voc, f.args[i]);
  }
  return out + ")";
}

inline std::string print_database(const Vocabulary& voc, const Database& db) {
  std::string out;
  for (const auto& f : db.facts()) out += print_fact(voc, f) + ".\n";
  return out;
}

namespace detail {
inline std::string term_text(const Vocabulary& voc, const std::vector<std::string>& names,
                             const Term& t) {
  if (t.is_var) return names[static_cast<std::size_t>(t.id)];
  const auto& label = voc.consts.label(t.id);
  // In rule and query syntax, bare words starting with a letter are variables.
  if (!label.empty() && ident_start(label[0])) {
    std::string out = "\"";
    for (char c : label) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }
  return quote_constant(label);
}
}  // namespace detail

inline std::string print_atom(const Vocabulary& voc, const std::vector<std::string>& names,
                              const Atom& a) {
  std::string out = voc.rels.name(a.rel) + "(";
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ",";
    out += detail::term_text(voc, names, a.args[i]);
  }
  return out + ")";
}

inline std::string print_tgd(const Vocabulary& voc, const Tgd& t) {
  std::string out;
  if (t.body.empty()) out = "true";
  for (std::size_t i = 0; i < t.body.size(); ++i) {
    if (i) out += ", ";
    out += print_atom(voc, t.var_names, t.body[i]);
  }
  out += " -> ";
  if (!t.existential.empty()) {
    out += "exists ";
    for (std::size_t i = 0; i < t.existential.size(); ++i) {
      if (i) out += ",";
      out += t.var_names[static_cast<std::size_t>(t.existential[i])];
    }
    out += " . ";
  }
  for (std::size_t i = 0; i < t.head.size(); ++i) {
    if (i) out += ", ";
    out += print_atom(voc, t.var_names, t.head[i]);
  }
  return out;
}

inline std::string print_ontology(const Vocabulary& voc, const Ontology& o) {
  std::string out;
  for (const auto& t : o.rules) out += print_tgd(voc, t) + "\n";
  return out;
}

inline std::string print_query(const Vocabulary& voc, const ConjunctiveQuery& q) {
  std::string out = q.name + "(";
  for (std::size_t i = 0; i < q.answer_vars.size(); ++i) {
    if (i) out += ",";
    out += q.var_names[static_cast<std::size_t>(q.answer_vars[i])];
  }
  out += ") <- ";
  for (std::size_t i = 0; i < q.atoms.size(); ++i) {
    if (i) out += ", ";
    out += print_atom(voc, q.var_names, q.atoms[i]);
  }
  return out + ".";
}

enum class AnswerKind { Complete, Single, Multi };

inline const char* mode_name(AnswerKind k) {
  switch (k) {
    case AnswerKind::Complete: return "complete";
    case AnswerKind::Single: return "partial";
    case AnswerKind::Multi: return "multi";
  }
  return "?";
}

inline std::string print_answer(const Vocabulary& voc, const Tuple& t, AnswerKind kind) {
  std::string out = "(";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ", ";
    if (is_wild(t[i])) {
      out += "*";
      if (kind == AnswerKind::Multi) out += std::to_string(wild_index(t[i]));
    } else {
      out += constant_text(voc, t[i]);
    }
  }
  return out + ")";
}

inline nlohmann::json answer_json(const Vocabulary& voc, const Tuple& t, AnswerKind kind) {
  auto arr = nlohmann::json::array();
  for (ConstId v : t) {
    if (is_wild(v))
      arr.push_back({{"wild", kind == AnswerKind::Multi ? wild_index(v) : 0}});
    else
      arr.push_back({{"const", voc.consts.label(v)}});
  }
  return arr;
}

// Reads `(a, *, b)` / `(a, *1, *2)`. Unknown constants map to nullopt since
// they cannot be answers over the database.
inline std::optional<Tuple> parse_tuple(std::string_view text, const Vocabulary& voc,
                                        AnswerKind kind) {
  detail::Lexer lx(text, "<tuple>");
  lx.skip();
  lx.expect('(');
  Tuple out;
  bool unknown = false;
  lx.skip();
  if (!lx.accept(')')) {
    for (;;) {
      lx.skip();
      if (lx.accept('*')) {
        std::string digits;
        while (std::isdigit(static_cast<unsigned char>(lx.peek()))) {
          digits += lx.peek();
          lx.advance();
        }
        if (kind == AnswerKind::Complete) lx.fail("wildcards are not allowed in complete mode");
        if (kind == AnswerKind::Single) {
          if (!digits.empty()) lx.fail("numbered wildcard in single-wildcard mode");
          out.push_back(kStar);
        } else {
          if (digits.empty()) lx.fail("multi-wildcard mode needs numbered wildcards");
          out.push_back(make_wild(std::stoi(digits)));
        }
      } else {
        bool quoted;
        std::string label = lx.term(quoted);
        auto id = voc.consts.find(label);
        if (!id || voc.consts.is_null(*id)) {
          unknown = true;
          out.push_back(0);
        } else {
          out.push_back(*id);
        }
      }
      lx.skip();
      if (lx.accept(')')) break;
      lx.expect(',');
    }
  }
  lx.skip();
  if (!lx.eof()) lx.fail("trailing input after tuple");
  if (unknown) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------
// loading an OMQ with its database
// ---------------------------------------------------------------------------

struct OmqInput {
  Omq omq;
  Database db;
};

// The data schema is the one declared in the database file, or else the set
// of relations occurring in it.
inline OmqInput parse_omq(std::string_view facts, std::string_view tgd, std::string_view cq, Vocabulary& voc,
                          const std::string& facts_file = "<database>",
                          const std::string& tgd_file = "<ontology>", const std::string& cq_file = "<query>") {
  OmqInput in;
  in.omq.onto = parse_ontology(tgd, voc, tgd_file);
  in.omq.query = parse_query(cq, voc, cq_file);
  auto pd = parse_database_full(facts, voc, facts_file);
  in.db = std::move(pd.db);
  if (pd.declared_schema) {
    in.omq.data_schema = *pd.declared_schema;
  } else {
    for (std::size_t i = 0; i < in.db.size(); ++i) in.omq.data_schema.push_back(in.db[static_cast<int>(i)].rel);
    std::sort(in.omq.data_schema.begin(), in.omq.data_schema.end());
    in.omq.data_schema.erase(std::unique(in.omq.data_schema.begin(), in.omq.data_schema.end()),
                             in.omq.data_schema.end());
  }
  return in;
}

inline OmqInput load_omq(const std::string& facts, const std::string& tgd, const std::string& cq, Vocabulary& voc) {
  return parse_omq(read_file(facts), read_file(tgd), read_file(cq), voc, facts, tgd, cq);
}

}  // namespace omq
