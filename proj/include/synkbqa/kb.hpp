#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace synkbqa::kb {

using EntityId = std::uint32_t;
using PredicateId = std::uint32_t;

struct EntityRef {
  EntityId id = 0;
  auto operator<=>(const EntityRef&) const = default;
};

/// Year in [1000, 2999].
struct Year {
  int value = 0;
  auto operator<=>(const Year&) const = default;
};

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;
  auto operator<=>(const Date&) const = default;
};

/// Object of a triple. Alternatives order values of different kinds.
using Value = std::variant<EntityRef, std::string, std::int64_t, Year, Date>;

bool valid_year(int y);
bool valid_date(int y, int m, int d);
/// Calendar year of a Year or Date value.
std::optional<int> year_of(const Value& v);
/// Sort key for ordinal constraints; present for Integer, Year and Date.
std::optional<double> numeric_key(const Value& v);

/// A predicate traversed forwards (subject -> object) or backwards.
struct PredicateRef {
  PredicateId id = 0;
  bool inverse = false;
  auto operator<=>(const PredicateRef&) const = default;
};

struct Triple {
  EntityId subject = 0;
  PredicateId predicate = 0;
  Value object;
  auto operator<=>(const Triple&) const = default;
};

/// (predicate, value) reached from an entity.
struct Hop {
  PredicateRef predicate;
  Value value;
  auto operator<=>(const Hop&) const = default;
};

struct TwoHop {
  PredicateRef first;
  EntityId mid = 0;
  PredicateRef second;
  Value value;
  auto operator<=>(const TwoHop&) const = default;
};

class TripleStoreBuilder;

/// Immutable, indexed set of facts. Entity and predicate ids follow the
/// lexicographic order of their keys, so results never depend on the order
/// in which facts were loaded.
class TripleStore {
 public:
  std::size_t entity_count() const { return entities_.size(); }
  std::size_t predicate_count() const { return predicates_.size(); }
  std::size_t triple_count() const { return triples_.size(); }
  std::span<const Triple> triples() const { return triples_; }

  std::optional<EntityId> find_entity(std::string_view key) const;
  std::optional<PredicateId> find_predicate(std::string_view name) const;
  const std::string& entity_key(EntityId id) const { return entities_.at(id).key; }
  const std::string& predicate_name(PredicateId id) const { return predicates_.at(id); }
  /// Never empty: an entity without `@alias` lines uses its key with
  /// underscores turned into spaces.
  const std::vector<std::string>& aliases(EntityId id) const { return entities_.at(id).aliases; }
  const std::vector<std::string>& types(EntityId id) const { return entities_.at(id).types; }
  bool has_type(EntityId id, std::string_view label) const;
  /// Every type label in the store, sorted.
  const std::vector<std::string>& type_labels() const { return type_labels_; }

  /// Facts with `id` as subject, sorted by (predicate, object).
  std::span<const Hop> outgoing(EntityId id) const { return outgoing_.at(id); }
  /// Facts with `id` as entity object, as inverse hops sorted by (predicate, subject).
  std::span<const Hop> incoming(EntityId id) const { return incoming_.at(id); }

  /// Renders a value: entity key, text, integer, year, or yyyy-mm-dd.
  std::string render(const Value& v) const;
  /// Renders `name` or `name^-1`.
  std::string render(const PredicateRef& p) const;
  /// Interprets a gold-answer string: a registered entity key, else a
  /// yyyy-mm-dd date, else a year in range, else an integer, else text.
  Value parse_answer(std::string_view text) const;

  void check_entity(EntityId id) const;
  void check_predicate(PredicateId id) const;

 private:
  friend class TripleStoreBuilder;
  struct Entity {
    std::string key;
    std::vector<std::string> aliases;
    std::vector<std::string> types;
  };

  std::vector<Entity> entities_;
  std::vector<std::string> predicates_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, PredicateId> predicate_index_;
  std::vector<Triple> triples_;
  std::vector<std::vector<Hop>> outgoing_;
  std::vector<std::vector<Hop>> incoming_;
  std::vector<std::string> type_labels_;
};

/// Object value before entity ids are assigned.
struct RawObject {
  enum class Kind { kEntity, kText, kInt, kYear, kDate } kind = Kind::kText;
  std::string text;
  std::int64_t number = 0;
  Date date;
};

class TripleStoreBuilder {
 public:
  void add_entity(std::string key);
  void add_alias(std::string entity, std::string surface);
  void add_type(std::string entity, std::string label);
  void add_triple(std::string subject, std::string predicate, RawObject object);
  /// Convenience for entity-valued objects.
  void add_link(std::string subject, std::string predicate, std::string object);

  /// Assigns ids, deduplicates facts, builds both indexes.
  TripleStore build() const;

 private:
  struct RawTriple {
    std::string subject;
    std::string predicate;
    RawObject object;
  };
  std::vector<std::string> entities_;
  std::vector<std::pair<std::string, std::string>> aliases_;
  std::vector<std::pair<std::string, std::string>> types_;
  std::vector<RawTriple> triples_;
};

/// Parses the triple TSV:
///   subject TAB predicate TAB object TAB objtype   (entity|text|int|year|date)
///   @alias TAB entity TAB surface
///   @type TAB entity TAB label
/// Blank lines and lines starting with '#' are ignored. Throws ParseError
/// with the line number for an unknown objtype or a malformed value.
TripleStore parse_triples(std::string_view text);
TripleStore load_triples(const std::string& path);

/// All (p, o) for facts (e, p, o) plus (p^-1, s) for facts (s, p, e),
/// ordered by (predicate id, direction, value). Throws Error for an
/// unregistered entity.
std::vector<Hop> one_hop(const TripleStore& store, EntityId e);

/// Length-2 chains e -p-> m -q-> v through entity midpoints m, in the order
/// of one_hop applied twice, truncated to the first `limit` chains.
std::vector<TwoHop> two_hop(const TripleStore& store, EntityId e, std::size_t limit = 10000);

}  // namespace synkbqa::kb
