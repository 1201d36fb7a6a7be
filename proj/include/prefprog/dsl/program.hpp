#pragma once

#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "prefprog/dsl/ast.hpp"

namespace prefprog::dsl {

// The finite preference space P. Order matters: the first label is the
// positive class for IOU, the last one is the fallback leaf of merged
// sketches.
class LabelSet {
 public:
  LabelSet() : LabelSet(binary()) {}
  explicit LabelSet(std::vector<std::string> labels);
  LabelSet(std::initializer_list<std::string> labels)
      : LabelSet(std::vector<std::string>(labels)) {}

  static LabelSet binary() { return LabelSet(std::vector<std::string>{"good", "bad"}); }
  static LabelSet boolean() { return LabelSet(std::vector<std::string>{"true", "false"}); }

  bool contains(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  const std::string& positive() const { return labels_.front(); }
  const std::string& fallback() const { return labels_.back(); }
  std::size_t index_of(std::string_view label) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

std::set<std::string> free_holes(const Sketch& sketch);
std::set<std::string> free_holes(const Cond& cond);
std::set<std::string> free_holes(const Term& term);

// Declared bounds of every hole in the sketch.
std::map<std::string, std::pair<double, double>> hole_bounds(const Sketch& sketch);

// Replaces every hole covered by `assignment`; uncovered holes stay. Throws
// kHoleBounds when a value lies outside the hole's declared bounds.
Sketch substitute(const Sketch& sketch, const Assignment& assignment);
CondPtr substitute(const CondPtr& cond, const Assignment& assignment);

// Labels of all leaves, in left-to-right order.
std::vector<std::string> leaf_labels(const Sketch& sketch);

// A hole-free sketch.
class Program {
 public:
  // Throws kUnboundHole if the sketch still contains holes.
  static Program from_sketch(Sketch sketch);

  const Sketch& sketch() const { return sketch_; }
  const Node& root() const { return *sketch_.root; }

  bool operator==(const Program& other) const { return sketch_ == other.sketch_; }

 private:
  explicit Program(Sketch sketch) : sketch_(std::move(sketch)) {}
  Sketch sketch_;
};

}  // namespace prefprog::dsl
