#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "synkbqa/kb.hpp"

namespace synkbqa::qg {

/// Main-path node a constraint hangs off. kMid exists only on two-hop paths.
enum class NodeRef : std::uint8_t { kAnswer, kMid };

enum class CompareOp : std::uint8_t { kEq, kLt, kGt };
enum class SortOrder : std::uint8_t { kAscending, kDescending };

/// Virtual predicates: comparisons for time constraints, sort order plus
/// rank for ordinal constraints.
struct Compare {
  CompareOp op = CompareOp::kEq;
  auto operator<=>(const Compare&) const = default;
};
struct Ordinal {
  SortOrder order = SortOrder::kDescending;
  int rank = 1;  // >= 1
  auto operator<=>(const Ordinal&) const = default;
};
using VirtualPredicate = std::variant<Compare, Ordinal>;

/// Token span [begin, end) over the question, 0-based.
struct Span {
  int begin = 0;
  int end = 0;
  bool overlaps(const Span& o) const { return begin < o.end && o.begin < end; }
  int length() const { return end - begin; }
  auto operator<=>(const Span&) const = default;
};

enum class LinkKind : std::uint8_t { kEntity, kType, kTime, kOrdinal };

/// Which focus link produced a graph element (index into that kind's list).
struct LinkRef {
  LinkKind kind = LinkKind::kEntity;
  int index = 0;
  auto operator<=>(const LinkRef&) const = default;
};

struct EntityConstraint {
  NodeRef node = NodeRef::kAnswer;
  kb::PredicateRef predicate;
  kb::EntityId entity = 0;
  auto operator<=>(const EntityConstraint&) const = default;
};

struct TypeConstraint {
  std::string label;
  auto operator<=>(const TypeConstraint&) const = default;
};

/// node -predicate-> t with t compared against `year` (or the inclusive
/// range [year, year_end] for `==` on a year range).
struct TimeConstraint {
  NodeRef node = NodeRef::kAnswer;
  kb::PredicateRef predicate;
  Compare compare;
  int year = 0;
  std::optional<int> year_end;
  auto operator<=>(const TimeConstraint&) const = default;
};

/// Keep the node value ranked `rank` when sorted by node -predicate-> key.
struct OrdinalConstraint {
  NodeRef node = NodeRef::kAnswer;
  kb::PredicateRef predicate;
  Ordinal ordinal;
  auto operator<=>(const OrdinalConstraint&) const = default;
};

using ConstraintKind =
    std::variant<EntityConstraint, TypeConstraint, TimeConstraint, OrdinalConstraint>;

struct Constraint {
  ConstraintKind kind;
  LinkRef source;
};

/// Main path from the grounded entity (one or two hops) to the answer node,
/// plus constraints on main-path nodes.
struct QueryGraph {
  kb::EntityId focus = 0;
  LinkRef focus_source;
  std::vector<kb::PredicateRef> path;
  std::vector<Constraint> constraints;
};

/// Canonical text of the graph's structure: provenance excluded, constraints
/// sorted with repeats dropped. Equal keys mean equal semantics.
std::string structural_key(const kb::TripleStore& store, const QueryGraph& graph);

/// Human-readable one-line rendering.
std::string describe(const kb::TripleStore& store, const QueryGraph& graph);

/// Throws Error when the graph is malformed or names unregistered symbols.
void validate(const kb::TripleStore& store, const QueryGraph& graph);

}  // namespace synkbqa::qg

namespace synkbqa::kb {

/// Answers of a query graph: values reached by the main path from the focus
/// entity, filtered by entity, type and time constraints, then narrowed by
/// ordinal constraints in order (ties by value ascending). Throws Error for a
/// malformed graph or unregistered symbols.
std::set<Value> execute(const TripleStore& store, const qg::QueryGraph& graph);

}  // namespace synkbqa::kb
