// Reference solver for tests. Deliberately shares no search or linearization
// code with solve_maxsmt: atom roots are found by probing the DSL evaluator,
// and clause truth is computed by a separate walker.

#include <algorithm>
#include <map>
#include <set>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/error.hpp"
#include "prefprog/params/partial_eval.hpp"
#include "prefprog/params/solver.hpp"

namespace prefprog::params {

namespace {

struct OracleAtom {
  const dsl::Cond* cond;
  std::string hole;  // empty for constant atoms
  int slot = -1;     // index of `hole` among the searched holes
  bool constant_value = false;
  std::vector<bool> truth;  // per candidate of `hole`
};

// Flat clause representation: node kind 0 const-false, 1 const-true, 2 atom,
// 3 not, 4 and, 5 or.
struct Flat {
  int kind;
  int atom;
  std::vector<int> kids;
};

class OracleClause {
 public:
  OracleClause(const dsl::Cond& cond, std::map<const dsl::Cond*, int>& atom_ids,
               std::vector<OracleAtom>& atoms) {
    root_ = flatten(cond, atom_ids, atoms);
  }

  bool value(const std::vector<OracleAtom>& atoms, const std::vector<int>& chosen) const {
    return walk(root_, atoms, chosen);
  }

 private:
  int flatten(const dsl::Cond& c, std::map<const dsl::Cond*, int>& atom_ids, std::vector<OracleAtom>& atoms) {
    Flat f{0, -1, {}};
    if (const auto* b = std::get_if<dsl::BoolLit>(&c.node)) {
      f.kind = b->value ? 1 : 0;
    } else if (std::holds_alternative<dsl::Atom>(c.node)) {
      f.kind = 2;
      auto it = atom_ids.find(&c);
      if (it == atom_ids.end()) {
        it = atom_ids.emplace(&c, static_cast<int>(atoms.size())).first;
        atoms.push_back({&c, "", -1, false, {}});
      }
      f.atom = it->second;
    } else if (const auto* n = std::get_if<dsl::Not>(&c.node)) {
      f.kind = 3;
      f.kids.push_back(flatten(*n->arg, atom_ids, atoms));
    } else if (const auto* a = std::get_if<dsl::And>(&c.node)) {
      f.kind = 4;
      for (const auto& k : a->args) f.kids.push_back(flatten(*k, atom_ids, atoms));
    } else {
      f.kind = 5;
      for (const auto& k : std::get<dsl::Or>(c.node).args) f.kids.push_back(flatten(*k, atom_ids, atoms));
    }
    nodes_.push_back(std::move(f));
    return static_cast<int>(nodes_.size()) - 1;
  }

  bool walk(int i, const std::vector<OracleAtom>& atoms, const std::vector<int>& chosen) const {
    const Flat& f = nodes_[i];
    switch (f.kind) {
      case 0: return false;
      case 1: return true;
      case 2: {
        const auto& a = atoms[f.atom];
        return a.hole.empty() ? a.constant_value : a.truth[chosen[a.slot]];
      }
      case 3: return !walk(f.kids[0], atoms, chosen);
      case 4:
        for (int k : f.kids) {
          if (!walk(k, atoms, chosen)) return false;
        }
        return true;
      default:
        for (int k : f.kids) {
          if (walk(k, atoms, chosen)) return true;
        }
        return false;
    }
  }

  std::vector<Flat> nodes_;
  int root_ = -1;
};

const scene::Scene& probe_scene() {
  static const scene::Scene s = [] {
    scene::Scene x;
    x.id = "probe";
    x.width = 1;
    x.height = 1;
    x.terrain = {"none"};
    return x;
  }();
  return s;
}

// lhs - rhs of a comparator atom under hole = x.
double gap(const dsl::Atom& a, const std::string& hole, double x) {
  static const library::ConceptLibrary builtins;
  dsl::Evaluator ev(probe_scene(), builtins, dsl::default_perception());
  dsl::Assignment as{{hole, x}};
  dsl::Frame frame{{0, 0}, &as, nullptr};
  return std::get<double>(ev.term(*a.args[0], frame)) - std::get<double>(ev.term(*a.args[1], frame));
}

}  // namespace

SolveResult brute_force_oracle(const WeightedFormula& wf, double epsilon) {
  std::map<const dsl::Cond*, int> atom_ids;
  std::vector<OracleAtom> atoms;
  std::vector<OracleClause> clauses;
  for (const auto& c : wf.clauses) clauses.emplace_back(*c.formula, atom_ids, atoms);

  std::map<std::string, std::set<double>> roots;
  std::map<std::string, std::pair<double, double>> bounds = wf.holes;
  for (auto& a : atoms) {
    auto holes = dsl::free_holes(*a.cond);
    if (holes.size() > 1) throw Error(ErrorCode::kUnsupportedAtom, "atom mentions several holes");
    if (holes.empty()) {
      a.constant_value = evaluate_residual_condition(*a.cond, {});
      continue;
    }
    a.hole = *holes.begin();
    const auto& atom = std::get<dsl::Atom>(a.cond->node);
    if (atom.args.size() != 2) throw Error(ErrorCode::kUnsupportedAtom, "non-comparison atom");
    double f0 = gap(atom, a.hole, 0.0);
    double slope = gap(atom, a.hole, 1.0) - f0;
    if (slope != 0.0) roots[a.hole].insert(-f0 / slope);
    if (bounds.count(a.hole) == 0) bounds[a.hole] = {dsl::kDefaultHoleLo, dsl::kDefaultHoleHi};
  }
  // Candidate values per hole that appears in some atom.
  std::vector<std::string> names;
  std::vector<std::vector<double>> candidates;
  for (const auto& a : atoms) {
    if (!a.hole.empty() && std::find(names.begin(), names.end(), a.hole) == names.end()) names.push_back(a.hole);
  }
  std::sort(names.begin(), names.end());
  if (names.size() > 3) throw Error(ErrorCode::kTooManyHoles, "oracle handles at most 3 holes");
  for (const auto& n : names) {
    auto [lo, hi] = bounds.at(n);
    std::vector<double> cs;
    std::vector<double> rs;
    for (double r : roots[n]) {
      if (r >= lo && r <= hi) rs.push_back(r);
    }
    if (rs.empty()) {
      cs.push_back(lo);
    } else {
      cs.push_back(std::max(lo, rs.front() - epsilon));
      for (std::size_t i = 0; i < rs.size(); ++i) {
        cs.push_back(rs[i]);
        if (i + 1 < rs.size()) cs.push_back(0.5 * (rs[i] + rs[i + 1]));
      }
      cs.push_back(std::min(hi, rs.back() + epsilon));
    }
    candidates.push_back(std::move(cs));
  }
  for (auto& a : atoms) {
    if (a.hole.empty()) continue;
    a.slot = static_cast<int>(std::find(names.begin(), names.end(), a.hole) - names.begin());
    for (double v : candidates[a.slot]) {
      a.truth.push_back(evaluate_residual_condition(*a.cond, {{a.hole, v}}));
    }
  }

  SolveResult best;
  best.total_weight = wf.total_weight();
  best.satisfied_weight = -1;
  std::vector<int> chosen(names.size(), 0);
  while (true) {
    int w = 0;
    for (std::size_t i = 0; i < clauses.size(); ++i) {
      if (clauses[i].value(atoms, chosen)) w += wf.clauses[i].weight;
    }
    if (w > best.satisfied_weight) {
      best.satisfied_weight = w;
      best.assignment.clear();
      for (const auto& [name, b] : bounds) best.assignment[name] = b.first;
      for (std::size_t i = 0; i < names.size(); ++i) best.assignment[names[i]] = candidates[i][chosen[i]];
      best.unsat_origins.clear();
      for (std::size_t i = 0; i < clauses.size(); ++i) {
        if (!clauses[i].value(atoms, chosen)) best.unsat_origins.push_back(wf.clauses[i].origin);
      }
    }
    // Odometer increment over the candidate product.
    std::size_t k = 0;
    for (; k < names.size(); ++k) {
      if (++chosen[k] < static_cast<int>(candidates[k].size())) break;
      chosen[k] = 0;
    }
    if (k == names.size()) break;
  }
  std::sort(best.unsat_origins.begin(), best.unsat_origins.end());
  return best;
}

}  // namespace prefprog::params
