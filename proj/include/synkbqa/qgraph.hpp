#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "synkbqa/embedding_table.hpp"
#include "synkbqa/kb.hpp"
#include "synkbqa/query_graph.hpp"

namespace synkbqa::qg {

struct EntityLink {
  Span span;
  kb::EntityId entity = 0;
  double score = 0.0;
};

struct TypeLink {
  Span span;
  std::string label;
  double score = 0.0;
};

struct TimeLink {
  Span span;
  Compare compare;
  int year = 0;
  std::optional<int> year_end;  // set for `YYYY-YYYY`
};

struct OrdinalLink {
  Span span;
  Ordinal ordinal;
};

struct FocusLinks {
  std::vector<EntityLink> entities;
  std::vector<TypeLink> types;
  std::vector<TimeLink> times;
  std::vector<OrdinalLink> ordinals;

  Span span(LinkRef ref) const;
  std::size_t size() const {
    return entities.size() + types.size() + times.size() + ordinals.size();
  }
};

inline constexpr std::size_t kMaxTypeLinks = 10;
inline constexpr std::size_t kMaxConstraints = 4;

bool is_stopword(std::string_view lowered);

/// Alias-dictionary linking. A span links to an entity when its lower-cased
/// tokens form a contiguous run of one of the entity's aliases; the score is
/// span length / alias length. Spans must contain a non-stopword and no
/// punctuation. Longer spans win and overlapping shorter spans are dropped;
/// several entities on one span are all kept (score descending, then id).
std::vector<EntityLink> link_entities(std::span<const std::string> tokens,
                                      const kb::TripleStore& store);

/// Mean word vector of the words found in the table; nullopt when none is.
std::optional<std::vector<double>> mean_vector(std::span<const std::string> words,
                                               const EmbeddingTable& table);

/// Words of a type label or relation name: split on `_` and `.`, lower-cased.
std::vector<std::string> name_words(std::string_view name);

/// Top-10 (span of 1..3 non-punctuation tokens, type label) pairs by cosine
/// between mean word vectors; ties by (span start, label, span length).
std::vector<TypeLink> link_types(std::span<const std::string> tokens,
                                 std::span<const std::string> type_labels,
                                 const EmbeddingTable& words);

/// Years 1000..2999 (`in`/`before`/`after` set ==, <, >) and `YYYY-YYYY`
/// ranges. The span covers the year token only.
std::vector<TimeLink> link_time(std::span<const std::string> tokens);

/// Superlatives with their sort direction, optionally preceded by an ordinal
/// (`second` .. `tenth`, `2nd`, ...) that sets the rank.
std::vector<OrdinalLink> link_ordinal(std::span<const std::string> tokens);

/// Sort direction of a superlative, nullopt when the word is not one.
std::optional<SortOrder> superlative_order(std::string_view lowered);

FocusLinks link_all(std::span<const std::string> tokens, const kb::TripleStore& store,
                    const EmbeddingTable& words);

/// Main paths from an entity: distinct one-hop predicates, then distinct
/// two-hop predicate pairs through entity midpoints.
std::vector<std::vector<kb::PredicateRef>> main_paths(const kb::TripleStore& store,
                                                      kb::EntityId focus,
                                                      std::size_t two_hop_limit = 10000);

/// Every constraint attachable to the main path of `base` (no constraints
/// yet) from links whose span does not overlap the focus span, each keeping
/// the main path's answer set non-empty on its own. Deterministic order.
std::vector<Constraint> constraint_options(const kb::TripleStore& store, const QueryGraph& base,
                                           const FocusLinks& links);

/// True when the constraints may share one graph: distinct links, pairwise
/// disjoint spans, at most one ordinal, at most kMaxConstraints.
bool compatible(const FocusLinks& links, std::span<const Constraint> constraints);

/// Candidate graphs: every main path of every entity link, extended by every
/// compatible subset of its constraint options whose execution stays
/// non-empty. Deduplicated by structural key, first occurrence kept.
std::vector<QueryGraph> generate_candidates(const kb::TripleStore& store,
                                            const FocusLinks& links);

/// F1 of predicted vs gold; 0 for an empty prediction. Throws on empty gold.
double f1_score(const std::set<kb::Value>& predicted, const std::set<kb::Value>& gold);

inline constexpr double kPositiveThreshold = 0.5;
inline constexpr std::size_t kNegativesPerPositive = 20;

struct LabeledCandidate {
  QueryGraph graph;
  std::set<kb::Value> answers;
  double f1 = 0.0;
  bool positive = false;
};

struct LabelResult {
  std::vector<LabeledCandidate> candidates;
  std::size_t dropped = 0;  // candidates whose execution failed
};

LabelResult label_candidates(std::vector<QueryGraph> candidates, const kb::TripleStore& store,
                             const std::set<kb::Value>& gold,
                             double threshold = kPositiveThreshold);

struct CandidatePair {
  std::size_t positive = 0;
  std::size_t negative = 0;
  bool operator==(const CandidatePair&) const = default;
};

/// Each positive with the n hardest negatives (f1 descending, then
/// generation order).
std::vector<CandidatePair> training_pairs(std::span<const LabeledCandidate> candidates,
                                          std::size_t negatives = kNegativesPerPositive);

}  // namespace synkbqa::qg
