#pragma once

// Reproducible instance families for benchmarks and tests, produced as
// source text in the same format as the input files.

#include <random>
#include <sstream>
#include <string>

namespace omq {

struct InstanceText {
  std::string facts;
  std::string tgd;
  std::string cq;
};

inline const char* kExample1Tgd =
    "Researcher(x) -> exists y . HasOffice(x,y)\n"
    "HasOffice(x,y) -> Office(y)\n"
    "Office(x) -> exists y . InBuilding(x,y)\n";

inline const char* kExample1Cq = "q(x1,x2,x3) <- HasOffice(x1,x2), InBuilding(x2,x3).\n";

// n researchers; roughly half have a known office, and roughly half of those
// offices have a known building out of a pool of n/100 + 1 buildings.
inline InstanceText example1_family(std::size_t n, unsigned seed = 1) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution coin(0.5);
  const std::size_t buildings = n / 100 + 1;
  std::uniform_int_distribution<std::size_t> pick(0, buildings - 1);
  std::ostringstream out;
  for (std::size_t i = 0; i < n; ++i) {
    out << "Researcher(r" << i << ").\n";
    if (!coin(rng)) continue;
    out << "HasOffice(r" << i << ", o" << i << ").\n";
    if (coin(rng)) out << "InBuilding(o" << i << ", b" << pick(rng) << ").\n";
  }
  return {out.str(), kExample1Tgd, kExample1Cq};
}

inline const char* kAppendixFacts[] = {"A(a)", "E(a)", "B(b)", "C(b)", "R(b,a)",
                                        "R(c,b)", "B(d)", "R(d,a)", "E(e)", "R(e,a)"};

inline const char* kAppendixTgd =
    "A(x) -> exists y1,y2 . R(y1,y2), R(y2,x), C(y1)\n"
    "B(x) -> exists y1,y2 . R(y1,x), R(y2,x), C(y1)\n"
    "E(x) -> exists y1 . R(x,y1)\n"
    "R(x,y) -> L(x,x), L(y,y)\n";

inline const char* kAppendixCq =
    "q(x1,x2,x3,x4,x5) <- L(y1,x1), R(x1,x2), R(x2,x3), R(x4,x3), R(x5,x4), L(y5,x5), C(x1).\n";

// `copies` disjoint renamed copies of the small appendix database.
inline InstanceText appendix_family(std::size_t copies) {
  std::ostringstream out;
  for (std::size_t k = 0; k < copies; ++k)
    for (const char* f : kAppendixFacts) {
      std::string s = f;
      std::string renamed;
      for (std::size_t i = 0; i < s.size(); ++i) {
        renamed += s[i];
        bool constant = (s[i] >= 'a' && s[i] <= 'e') && (s[i - 1] == '(' || s[i - 1] == ',');
        if (constant && copies > 1) renamed += "_" + std::to_string(k);
      }
      out << renamed << ".\n";
    }
  return {out.str(), kAppendixTgd, kAppendixCq};
}

}  // namespace omq
