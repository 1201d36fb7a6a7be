#include "prefprog/params/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"

namespace prefprog::params {

std::vector<std::string> SolveResult::unsat_demos() const {
  std::set<std::string> ids;
  for (const auto& o : unsat_origins) ids.insert(origin_demo(o));
  return {ids.begin(), ids.end()};
}

namespace {

constexpr double kEqTolerance = 1e-9;

enum class Op { kLt, kLe, kEq, kGe, kGt };

Op op_from(std::string_view s) {
  if (s == "<") return Op::kLt;
  if (s == "<=") return Op::kLe;
  if (s == "=") return Op::kEq;
  if (s == ">=") return Op::kGe;
  return Op::kGt;
}

Op mirror(Op op) {
  switch (op) {
    case Op::kLt: return Op::kGt;
    case Op::kLe: return Op::kGe;
    case Op::kGe: return Op::kLe;
    case Op::kGt: return Op::kLt;
    case Op::kEq: return Op::kEq;
  }
  return op;
}

bool holds(Op op, double x, double t) {
  switch (op) {
    case Op::kLt: return x < t;
    case Op::kLe: return x <= t;
    case Op::kEq: return std::abs(x - t) <= kEqTolerance;
    case Op::kGe: return x >= t;
    case Op::kGt: return x > t;
  }
  return false;
}

// a * hole + b
struct Lin {
  std::string hole;
  double a = 0.0;
  double b = 0.0;
};

[[noreturn]] void unsupported(const std::string& what) {
  throw Error(ErrorCode::kUnsupportedAtom, "atom outside the single-hole linear fragment: " + what);
}

Lin linearize(const dsl::Term& t) {
  if (const auto* n = std::get_if<dsl::NumberLit>(&t.node)) return {"", 0.0, n->value};
  if (const auto* h = std::get_if<dsl::Hole>(&t.node)) return {h->name, 1.0, 0.0};
  const auto* c = std::get_if<dsl::Call>(&t.node);
  if (c == nullptr || c->args.size() != 2) unsupported(dsl::print_term(t));
  Lin l = linearize(*c->args[0]);
  Lin r = linearize(*c->args[1]);
  auto merge_hole = [&](const Lin& x, const Lin& y) {
    if (!x.hole.empty() && !y.hole.empty() && x.hole != y.hole) unsupported(dsl::print_term(t));
    return x.hole.empty() ? y.hole : x.hole;
  };
  if (c->name == "+") return {merge_hole(l, r), l.a + r.a, l.b + r.b};
  if (c->name == "-") return {merge_hole(l, r), l.a - r.a, l.b - r.b};
  if (c->name == "*") {
    if (l.a == 0.0) return {r.hole, r.a * l.b, r.b * l.b};
    if (r.a == 0.0) return {l.hole, l.a * r.b, l.b * r.b};
    unsupported(dsl::print_term(t));
  }
  if (c->name == "/" && r.a == 0.0 && r.b != 0.0) return {l.hole, l.a / r.b, l.b / r.b};
  unsupported(dsl::print_term(t));
}

struct LinearAtom {
  int hole = -1;
  Op op = Op::kLt;
  double threshold = 0.0;
  auto key() const { return std::make_tuple(hole, static_cast<int>(op), threshold); }
};

struct CNode {
  enum Kind { kConst, kAtom, kNot, kAnd, kOr } kind = kConst;
  bool value = false;
  int atom = -1;
  std::vector<int> kids;
};

// A candidate interval of one hole's domain on which every atom over that hole
// has constant truth.
struct HoleCell {
  double rep;        // representative value, strictly inside
  double left;       // true extent
  double right;
  double tie_left;   // extent used for margin tie-breaking
  double tie_right;
  bool closed_left;
  bool closed_right;

  bool contains(double x) const {
    return (x > left || (closed_left && x == left)) && (x < right || (closed_right && x == right));
  }
};

struct HoleInfo {
  std::string name;
  double lo;
  double hi;
  std::vector<HoleCell> cells;
};

class Problem {
 public:
  Problem(const WeightedFormula& wf, double eps) {
    std::map<std::string, std::pair<double, double>> bounds = wf.holes;
    // Holes appearing in atoms, named in sorted order.
    std::set<std::string> names;
    for (const auto& c : wf.clauses) collect_holes(*c.formula, names, bounds);
    for (const auto& n : names) {
      auto [lo, hi] = bounds.at(n);
      hole_index_[n] = static_cast<int>(holes_.size());
      holes_.push_back({n, lo, hi, {}});
    }
    for (const auto& c : wf.clauses) {
      roots_.push_back(compile(*c.formula));
      weights_.push_back(c.weight);
      origins_.push_back(c.origin);
    }
    build_cells(eps);
  }

  int hole_count() const { return static_cast<int>(holes_.size()); }
  int cell_count(int h) const { return static_cast<int>(holes_[h].cells.size()); }
  const HoleInfo& hole(int h) const { return holes_[h]; }
  std::size_t clause_count() const { return roots_.size(); }
  int weight(std::size_t i) const { return weights_[i]; }
  const std::string& origin(std::size_t i) const { return origins_[i]; }

  // 0 false, 1 true, 2 unknown; cells[h] < 0 means unassigned.
  int eval(int node, const std::vector<int>& cells) const {
    const CNode& n = nodes_[node];
    switch (n.kind) {
      case CNode::kConst: return n.value ? 1 : 0;
      case CNode::kAtom: {
        const LinearAtom& a = atoms_[n.atom];
        int cell = cells[a.hole];
        if (cell < 0) return 2;
        return truth_[n.atom][cell] ? 1 : 0;
      }
      case CNode::kNot: {
        int v = eval(n.kids[0], cells);
        return v == 2 ? 2 : 1 - v;
      }
      case CNode::kAnd:
      case CNode::kOr: {
        int absorbing = n.kind == CNode::kAnd ? 0 : 1;
        bool unknown = false;
        for (int k : n.kids) {
          int v = eval(k, cells);
          if (v == absorbing) return absorbing;
          unknown = unknown || v == 2;
        }
        return unknown ? 2 : 1 - absorbing;
      }
    }
    return 2;
  }

  int clause_value(std::size_t i, const std::vector<int>& cells) const { return eval(roots_[i], cells); }

  std::vector<char> satisfied(const std::vector<int>& cells) const {
    std::vector<char> out(roots_.size());
    for (std::size_t i = 0; i < roots_.size(); ++i) out[i] = eval(roots_[i], cells) == 1 ? 1 : 0;
    return out;
  }

  int weight_of(const std::vector<char>& sat) const {
    int w = 0;
    for (std::size_t i = 0; i < sat.size(); ++i) w += sat[i] ? weights_[i] : 0;
    return w;
  }

 private:
  static void collect_holes(const dsl::Cond& c, std::set<std::string>& names,
                            std::map<std::string, std::pair<double, double>>& bounds) {
    for (const auto& h : dsl::free_holes(c)) names.insert(h);
    // Bounds of holes not declared in the formula come from the hole terms.
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, dsl::Atom>) {
            for (const auto& a : n.args) collect_term_bounds(*a, bounds);
          } else if constexpr (std::is_same_v<T, dsl::Not>) {
            collect_holes(*n.arg, names, bounds);
          } else if constexpr (std::is_same_v<T, dsl::And> || std::is_same_v<T, dsl::Or>) {
            for (const auto& a : n.args) collect_holes(*a, names, bounds);
          }
        },
        c.node);
  }

  static void collect_term_bounds(const dsl::Term& t, std::map<std::string, std::pair<double, double>>& bounds) {
    if (const auto* h = std::get_if<dsl::Hole>(&t.node)) bounds.emplace(h->name, std::make_pair(h->lo, h->hi));
    if (const auto* c = std::get_if<dsl::Call>(&t.node)) {
      for (const auto& a : c->args) collect_term_bounds(*a, bounds);
    }
  }

  int add(CNode n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int compile(const dsl::Cond& c) {
    return std::visit(
        [&](const auto& n) -> int {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, dsl::BoolLit>) {
            return add({CNode::kConst, n.value, -1, {}});
          } else if constexpr (std::is_same_v<T, dsl::Not>) {
            int k = compile(*n.arg);
            return add({CNode::kNot, false, -1, {k}});
          } else if constexpr (std::is_same_v<T, dsl::And> || std::is_same_v<T, dsl::Or>) {
            std::vector<int> kids;
            for (const auto& a : n.args) kids.push_back(compile(*a));
            return add({std::is_same_v<T, dsl::And> ? CNode::kAnd : CNode::kOr, false, -1, std::move(kids)});
          } else {
            return compile_atom(n, c);
          }
        },
        c.node);
  }

  int compile_atom(const dsl::Atom& a, const dsl::Cond& whole) {
    if (!dsl::is_comparator(a.head) || a.args.size() != 2) unsupported(dsl::print_condition(whole));
    Lin l = linearize(*a.args[0]);
    Lin r = linearize(*a.args[1]);
    if (!l.hole.empty() && !r.hole.empty() && l.hole != r.hole) unsupported(dsl::print_condition(whole));
    std::string h = l.hole.empty() ? r.hole : l.hole;
    double k = l.a - r.a;  // k*h (op) r.b - l.b
    double m = r.b - l.b;
    Op op = op_from(a.head);
    if (h.empty() || k == 0.0) return add({CNode::kConst, holds(op, 0.0, m), -1, {}});
    if (k < 0) op = mirror(op);
    LinearAtom atom{hole_index_.at(h), op, m / k};
    auto [it, inserted] = atom_index_.emplace(atom.key(), static_cast<int>(atoms_.size()));
    if (inserted) atoms_.push_back(atom);
    return add({CNode::kAtom, false, it->second, {}});
  }

  void build_cells(double eps) {
    for (std::size_t h = 0; h < holes_.size(); ++h) {
      auto& info = holes_[h];
      std::set<double> ts;
      for (const auto& a : atoms_) {
        if (a.hole == static_cast<int>(h) && a.threshold >= info.lo && a.threshold <= info.hi) ts.insert(a.threshold);
      }
      std::vector<double> b(ts.begin(), ts.end());
      auto& cells = info.cells;
      if (b.empty()) {
        cells.push_back({info.lo, info.lo, info.hi, info.lo, info.lo, true, true});
        continue;
      }
      if (info.lo < b.front()) {
        double rep = std::max(info.lo, b.front() - eps);
        cells.push_back({rep, info.lo, b.front(), rep, b.front(), true, false});
      }
      for (std::size_t j = 0; j < b.size(); ++j) {
        cells.push_back({b[j], b[j], b[j], b[j], b[j], true, true});
        if (j + 1 < b.size()) {
          double mid = 0.5 * (b[j] + b[j + 1]);
          cells.push_back({mid, b[j], b[j + 1], b[j], b[j + 1], false, false});
        }
      }
      if (b.back() < info.hi) {
        double rep = std::min(info.hi, b.back() + eps);
        cells.push_back({rep, b.back(), info.hi, b.back(), rep, false, true});
      }
    }
    truth_.resize(atoms_.size());
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      for (const auto& cell : holes_[a.hole].cells) truth_[i].push_back(holds(a.op, cell.rep, a.threshold));
    }
  }

  std::vector<HoleInfo> holes_;
  std::map<std::string, int> hole_index_;
  std::vector<LinearAtom> atoms_;
  std::map<std::tuple<int, int, double>, int> atom_index_;
  std::vector<std::vector<bool>> truth_;
  std::vector<CNode> nodes_;
  std::vector<int> roots_;
  std::vector<int> weights_;
  std::vector<std::string> origins_;
};

using Tuple = std::vector<int>;

void exhaustive(const Problem& p, std::size_t depth, Tuple& cells, int& best, std::vector<Tuple>& maximizers) {
  int ub = 0;
  bool complete = depth == static_cast<std::size_t>(p.hole_count());
  for (std::size_t i = 0; i < p.clause_count(); ++i) {
    int v = p.clause_value(i, cells);
    if (v != 0) ub += p.weight(i);
  }
  if (ub < best) return;
  if (complete) {
    if (ub > best) {
      best = ub;
      maximizers.clear();
    }
    maximizers.push_back(cells);
    return;
  }
  for (int c = 0; c < p.cell_count(static_cast<int>(depth)); ++c) {
    cells[depth] = c;
    exhaustive(p, depth + 1, cells, best, maximizers);
  }
  cells[depth] = -1;
}

// Coordinate ascent on (weight, satisfied vector) from several starts.
Tuple greedy(const Problem& p, const SolverOptions& options, std::vector<Tuple>& neighbourhood) {
  std::mt19937_64 rng(options.seed);
  Tuple best;
  std::vector<char> best_sat;
  int best_w = -1;
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Tuple cur(static_cast<std::size_t>(p.hole_count()));
    for (int h = 0; h < p.hole_count(); ++h) {
      cur[h] = r == 0 ? 0 : static_cast<int>(rng() % static_cast<std::uint64_t>(p.cell_count(h)));
    }
    auto sat = p.satisfied(cur);
    int w = p.weight_of(sat);
    for (bool improved = true; improved;) {
      improved = false;
      for (int h = 0; h < p.hole_count(); ++h) {
        for (int c = 0; c < p.cell_count(h); ++c) {
          if (c == cur[h]) continue;
          Tuple cand = cur;
          cand[h] = c;
          auto s = p.satisfied(cand);
          int cw = p.weight_of(s);
          if (cw > w || (cw == w && s > sat)) {
            cur = std::move(cand);
            sat = std::move(s);
            w = cw;
            improved = true;
          }
        }
      }
    }
    if (w > best_w || (w == best_w && sat > best_sat)) {
      best = cur;
      best_sat = sat;
      best_w = w;
    }
  }
  neighbourhood.clear();
  neighbourhood.push_back(best);
  for (int h = 0; h < p.hole_count(); ++h) {
    for (int c = 0; c < p.cell_count(h); ++c) {
      if (c == best[h]) continue;
      Tuple cand = best;
      cand[h] = c;
      if (p.satisfied(cand) == best_sat) neighbourhood.push_back(std::move(cand));
    }
  }
  return best;
}

// Keeps the tuples whose satisfied set is lexicographically greatest, then
// fixes holes one at a time at the midpoint of the widest run of cells.
std::vector<double> tie_break(const Problem& p, std::vector<Tuple> tuples, Tuple& chosen) {
  std::vector<char> top;
  std::vector<std::vector<char>> sats;
  for (const auto& t : tuples) {
    sats.push_back(p.satisfied(t));
    if (sats.back() > top) top = sats.back();
  }
  std::vector<Tuple> kept;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (sats[i] == top) kept.push_back(std::move(tuples[i]));
  }

  std::vector<double> values(static_cast<std::size_t>(p.hole_count()));
  for (int h = 0; h < p.hole_count(); ++h) {
    const auto& cells = p.hole(h).cells;
    std::set<int> present;
    for (const auto& t : kept) present.insert(t[h]);
    int best_first = -1;
    int best_last = -1;
    double best_width = -1.0;
    for (auto it = present.begin(); it != present.end();) {
      int first = *it;
      int last = first;
      ++it;
      while (it != present.end() && *it == last + 1) last = *it++;
      double width = cells[last].tie_right - cells[first].tie_left;
      if (width > best_width) {
        best_width = width;
        best_first = first;
        best_last = last;
      }
    }
    double mid = 0.5 * (cells[best_first].tie_left + cells[best_last].tie_right);
    // The midpoint lies strictly inside the run (or is the run's only point),
    // so some cell of the run contains it.
    int cell = -1;
    for (int c = best_first; c <= best_last && cell < 0; ++c) {
      if (cells[c].contains(mid)) cell = c;
    }
    if (cell < 0) {
      cell = best_first;
      mid = cells[cell].rep;
    }
    values[h] = mid;
    std::vector<Tuple> next;
    for (auto& t : kept) {
      if (t[h] == cell) next.push_back(std::move(t));
    }
    kept = std::move(next);
  }
  chosen = kept.front();
  return values;
}

}  // namespace

SolveResult solve_maxsmt(const WeightedFormula& wf, const SolverOptions& options) {
  SolveResult result;
  result.total_weight = wf.total_weight();
  for (const auto& [name, b] : wf.holes) result.assignment[name] = b.first;

  Problem p(wf, options.epsilon);
  std::vector<Tuple> maximizers;
  if (p.hole_count() <= options.exhaustive_max_holes) {
    Tuple cells(static_cast<std::size_t>(p.hole_count()), -1);
    int best = -1;
    exhaustive(p, 0, cells, best, maximizers);
  } else {
    greedy(p, options, maximizers);
    result.optimal = false;
  }

  Tuple chosen;
  std::vector<double> values = tie_break(p, std::move(maximizers), chosen);
  for (int h = 0; h < p.hole_count(); ++h) result.assignment[p.hole(h).name] = values[h];
  auto sat = p.satisfied(chosen);
  result.satisfied_weight = p.weight_of(sat);
  for (std::size_t i = 0; i < sat.size(); ++i) {
    if (!sat[i]) result.unsat_origins.push_back(p.origin(i));
  }
  std::sort(result.unsat_origins.begin(), result.unsat_origins.end());
  return result;
}

SynthResult param_synth(const dsl::Sketch& sketch, const std::vector<Demonstration>& demos,
                        const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                        const scene::PerceptionProvider& provider, const SolverOptions& options) {
  WeightedFormula wf = build_constraint(sketch, demos, lib, labels, provider);
  SolveResult solved = solve_maxsmt(wf, options);
  dsl::Program program = dsl::Program::from_sketch(dsl::substitute(sketch, solved.assignment));
  return SynthResult{std::move(program), std::move(solved), std::move(wf)};
}

}  // namespace prefprog::params
