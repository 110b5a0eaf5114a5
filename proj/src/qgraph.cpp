#include "synkbqa/qgraph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>

#include "synkbqa/deptree.hpp"
#include "synkbqa/error.hpp"
#include "synkbqa/numcore/kernels.hpp"

namespace synkbqa::qg {

namespace {

std::vector<std::string> lowered(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(dep::to_lower(t));
  return out;
}

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(dep::to_lower(s.substr(i, j - i)));
    i = j;
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(num::kernels::dot(a, a));
  const double nb = std::sqrt(num::kernels::dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return num::kernels::dot(a, b) / (na * nb);
}

std::optional<int> four_digit_year(std::string_view s) {
  if (s.size() != 4) return std::nullopt;
  int y = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + 4, y);
  if (ec != std::errc() || ptr != s.data() + 4 || !kb::valid_year(y)) return std::nullopt;
  return y;
}

std::optional<int> ordinal_rank(std::string_view w) {
  static const std::map<std::string_view, int> kWords = {
      {"second", 2}, {"third", 3}, {"fourth", 4}, {"fifth", 5}, {"sixth", 6},
      {"seventh", 7}, {"eighth", 8}, {"ninth", 9}, {"tenth", 10}};
  if (auto it = kWords.find(w); it != kWords.end()) return it->second;
  if (w.size() < 3) return std::nullopt;
  const std::string_view suffix = w.substr(w.size() - 2);
  if (suffix != "st" && suffix != "nd" && suffix != "rd" && suffix != "th") return std::nullopt;
  int n = 0;
  auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size() - 2, n);
  if (ec != std::errc() || ptr != w.data() + w.size() - 2 || n < 1) return std::nullopt;
  return n;
}

const char* compare_name(CompareOp op) {
  switch (op) {
    case CompareOp::kEq: return "==";
    case CompareOp::kLt: return "<";
    case CompareOp::kGt: return ">";
  }
  return "?";
}

const char* node_name(NodeRef n) { return n == NodeRef::kAnswer ? "ans" : "mid"; }

std::string constraint_text(const kb::TripleStore& store, const ConstraintKind& kind) {
  if (const auto* e = std::get_if<EntityConstraint>(&kind)) {
    return std::string("entity(") + node_name(e->node) + ", " + store.render(e->predicate) +
           ", " + store.entity_key(e->entity) + ")";
  }
  if (const auto* t = std::get_if<TypeConstraint>(&kind)) return "type(" + t->label + ")";
  if (const auto* t = std::get_if<TimeConstraint>(&kind)) {
    std::string year = std::to_string(t->year);
    if (t->year_end) year += "-" + std::to_string(*t->year_end);
    return std::string("time(") + node_name(t->node) + ", " + store.render(t->predicate) + " " +
           compare_name(t->compare.op) + " " + year + ")";
  }
  const auto& o = std::get<OrdinalConstraint>(kind);
  return std::string("ordinal(") + node_name(o.node) + ", " + store.render(o.predicate) + ", " +
         (o.ordinal.order == SortOrder::kDescending ? "desc" : "asc") + ", " +
         std::to_string(o.ordinal.rank) + ")";
}

// Distinct node entities reached by the main path, keyed by node.
struct PathNodes {
  std::set<kb::EntityId> answer;
  std::set<kb::EntityId> mid;
};

PathNodes path_nodes(const kb::TripleStore& store, const QueryGraph& g) {
  PathNodes out;
  auto step = [&](kb::EntityId e, const kb::PredicateRef& p, std::set<kb::EntityId>& into) {
    for (const kb::Hop& h : p.inverse ? store.incoming(e) : store.outgoing(e)) {
      if (h.predicate != p) continue;
      if (const auto* r = std::get_if<kb::EntityRef>(&h.value)) into.insert(r->id);
    }
  };
  if (g.path.size() == 1) {
    step(g.focus, g.path[0], out.answer);
  } else {
    step(g.focus, g.path[0], out.mid);
    for (kb::EntityId m : out.mid) step(m, g.path[1], out.answer);
  }
  return out;
}

bool is_time_value(const kb::Value& v) { return kb::year_of(v).has_value(); }
bool is_sortable(const kb::Value& v) { return kb::numeric_key(v).has_value(); }

// Forward predicates of the node entities whose values pass `accept`.
std::vector<kb::PredicateRef> value_predicates(const kb::TripleStore& store,
                                               const std::set<kb::EntityId>& nodes,
                                               bool (*accept)(const kb::Value&)) {
  std::set<kb::PredicateRef> preds;
  for (kb::EntityId e : nodes) {
    for (const kb::Hop& h : store.outgoing(e)) {
      if (accept(h.value)) preds.insert(h.predicate);
    }
  }
  return {preds.begin(), preds.end()};
}

}  // namespace

Span FocusLinks::span(LinkRef ref) const {
  const auto i = static_cast<std::size_t>(ref.index);
  switch (ref.kind) {
    case LinkKind::kEntity: return entities.at(i).span;
    case LinkKind::kType: return types.at(i).span;
    case LinkKind::kTime: return times.at(i).span;
    case LinkKind::kOrdinal: return ordinals.at(i).span;
  }
  throw Error("bad link kind");
}

bool is_stopword(std::string_view w) {
  static const std::set<std::string_view> kStop = {
      "a",    "an",    "the",   "of",   "in",   "on",   "at",   "to",    "for",   "by",
      "with", "from",  "is",    "was",  "are",  "were", "be",   "been",  "did",   "does",
      "do",   "and",   "or",    "what", "who",  "whom", "whose", "which", "where", "when",
      "why",  "how",   "that",  "this", "it",   "its",  "as",   "name",  "has",   "have",
      "had",  "s",     "'s"};
  return kStop.contains(w);
}

std::vector<EntityLink> link_entities(std::span<const std::string> tokens,
                                      const kb::TripleStore& store) {
  const auto words = lowered(tokens);
  struct Occurrence {
    kb::EntityId entity;
    std::size_t alias;
    std::size_t pos;
  };
  std::vector<std::vector<std::vector<std::string>>> aliases(store.entity_count());
  std::unordered_map<std::string, std::vector<Occurrence>> index;
  for (kb::EntityId e = 0; e < store.entity_count(); ++e) {
    for (const std::string& a : store.aliases(e)) {
      aliases[e].push_back(split_spaces(a));
      const auto& toks = aliases[e].back();
      for (std::size_t p = 0; p < toks.size(); ++p) {
        index[toks[p]].push_back({e, aliases[e].size() - 1, p});
      }
    }
  }

  // (span, entity) -> best score
  std::map<std::pair<Span, kb::EntityId>, double> found;
  const int n = static_cast<int>(words.size());
  for (int i = 0; i < n; ++i) {
    auto it = index.find(words[i]);
    if (it == index.end()) continue;
    for (const Occurrence& occ : it->second) {
      const auto& alias = aliases[occ.entity][occ.alias];
      bool content = false;
      for (int j = i; j < n; ++j) {
        const std::size_t ap = occ.pos + static_cast<std::size_t>(j - i);
        if (ap >= alias.size() || alias[ap] != words[j] || dep::is_punctuation(words[j])) break;
        content = content || !is_stopword(words[j]);
        if (!content) continue;
        const double score = static_cast<double>(j - i + 1) / static_cast<double>(alias.size());
        auto& best = found[{Span{i, j + 1}, occ.entity}];
        best = std::max(best, score);
      }
    }
  }

  std::vector<Span> spans;
  for (const auto& [key, score] : found) spans.push_back(key.first);
  std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
    if (a.length() != b.length()) return a.length() > b.length();
    return a.begin < b.begin;
  });
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  std::vector<Span> accepted;
  for (const Span& s : spans) {
    if (std::none_of(accepted.begin(), accepted.end(), [&](const Span& a) { return a.overlaps(s); })) {
      accepted.push_back(s);
    }
  }

  std::vector<EntityLink> out;
  for (const auto& [key, score] : found) {
    if (std::find(accepted.begin(), accepted.end(), key.first) != accepted.end()) {
      out.push_back({key.first, key.second, score});
    }
  }
  std::sort(out.begin(), out.end(), [](const EntityLink& a, const EntityLink& b) {
    if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  return out;
}

std::optional<std::vector<double>> mean_vector(std::span<const std::string> words,
                                               const EmbeddingTable& table) {
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t hits = 0;
  for (const std::string& w : words) {
    if (auto id = table.find(w)) {
      num::kernels::axpy(1.0, table.row(*id), sum);
      ++hits;
    }
  }
  if (hits == 0) return std::nullopt;
  for (double& v : sum) v /= static_cast<double>(hits);
  return sum;
}

std::vector<std::string> name_words(std::string_view name) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : name) {
    if (c == '_' || c == '.') {
      if (!cur.empty()) out.push_back(dep::to_lower(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(dep::to_lower(cur));
  return out;
}

std::vector<TypeLink> link_types(std::span<const std::string> tokens,
                                 std::span<const std::string> type_labels,
                                 const EmbeddingTable& words) {
  std::vector<std::pair<std::string, std::vector<double>>> labels;
  for (const std::string& label : type_labels) {
    if (auto v = mean_vector(name_words(label), words)) labels.emplace_back(label, std::move(*v));
  }
  const auto lw = lowered(tokens);
  const int n = static_cast<int>(lw.size());
  std::vector<TypeLink> all;
  for (int i = 0; i < n; ++i) {
    for (int len = 1; len <= 3 && i + len <= n; ++len) {
      if (dep::is_punctuation(lw[i + len - 1])) break;
      auto v = mean_vector(std::span(lw).subspan(i, len), words);
      if (!v) continue;
      for (const auto& [label, lv] : labels) {
        all.push_back({Span{i, i + len}, label, cosine(*v, lv)});
      }
    }
  }
  std::sort(all.begin(), all.end(), [](const TypeLink& a, const TypeLink& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
    if (a.label != b.label) return a.label < b.label;
    return a.span.length() < b.span.length();
  });
  if (all.size() > kMaxTypeLinks) all.resize(kMaxTypeLinks);
  return all;
}

std::vector<TimeLink> link_time(std::span<const std::string> tokens) {
  const auto lw = lowered(tokens);
  std::vector<TimeLink> out;
  for (std::size_t i = 0; i < lw.size(); ++i) {
    const std::string& w = lw[i];
    TimeLink link;
    link.span = Span{static_cast<int>(i), static_cast<int>(i) + 1};
    if (auto y = four_digit_year(w)) {
      link.year = *y;
      if (i > 0 && lw[i - 1] == "before") link.compare.op = CompareOp::kLt;
      if (i > 0 && lw[i - 1] == "after") link.compare.op = CompareOp::kGt;
      out.push_back(link);
    } else if (w.size() == 9 && w[4] == '-') {
      auto a = four_digit_year(std::string_view(w).substr(0, 4));
      auto b = four_digit_year(std::string_view(w).substr(5, 4));
      if (a && b && *a <= *b) {
        link.year = *a;
        link.year_end = *b;
        out.push_back(link);
      }
    }
  }
  return out;
}

std::optional<SortOrder> superlative_order(std::string_view w) {
  static const std::map<std::string_view, SortOrder> kLexicon = {
      {"largest", SortOrder::kDescending},  {"smallest", SortOrder::kAscending},
      {"highest", SortOrder::kDescending},  {"lowest", SortOrder::kAscending},
      {"latest", SortOrder::kDescending},   {"earliest", SortOrder::kAscending},
      {"first", SortOrder::kAscending},     {"last", SortOrder::kDescending},
      {"most", SortOrder::kDescending},     {"least", SortOrder::kAscending},
      {"biggest", SortOrder::kDescending},  {"oldest", SortOrder::kAscending},
      {"youngest", SortOrder::kDescending}, {"newest", SortOrder::kDescending},
      {"longest", SortOrder::kDescending},  {"shortest", SortOrder::kAscending},
      {"best", SortOrder::kDescending},     {"worst", SortOrder::kAscending},
      {"fastest", SortOrder::kDescending},  {"slowest", SortOrder::kAscending}};
  if (auto it = kLexicon.find(w); it != kLexicon.end()) return it->second;
  return std::nullopt;
}

std::vector<OrdinalLink> link_ordinal(std::span<const std::string> tokens) {
  const auto lw = lowered(tokens);
  std::vector<OrdinalLink> out;
  for (std::size_t i = 0; i < lw.size(); ++i) {
    auto order = superlative_order(lw[i]);
    if (!order) continue;
    OrdinalLink link;
    link.ordinal.order = *order;
    link.span = Span{static_cast<int>(i), static_cast<int>(i) + 1};
    if (i > 0) {
      if (auto rank = ordinal_rank(lw[i - 1])) {
        link.ordinal.rank = *rank;
        link.span.begin -= 1;
      }
    }
    out.push_back(link);
  }
  return out;
}

FocusLinks link_all(std::span<const std::string> tokens, const kb::TripleStore& store,
                    const EmbeddingTable& words) {
  FocusLinks links;
  links.entities = link_entities(tokens, store);
  links.types = link_types(tokens, store.type_labels(), words);
  links.times = link_time(tokens);
  links.ordinals = link_ordinal(tokens);
  return links;
}

std::vector<std::vector<kb::PredicateRef>> main_paths(const kb::TripleStore& store,
                                                      kb::EntityId focus,
                                                      std::size_t two_hop_limit) {
  std::vector<std::vector<kb::PredicateRef>> out;
  std::set<kb::PredicateRef> one;
  for (const kb::Hop& h : kb::one_hop(store, focus)) one.insert(h.predicate);
  for (const auto& p : one) out.push_back({p});
  std::set<std::pair<kb::PredicateRef, kb::PredicateRef>> two;
  for (const kb::TwoHop& h : kb::two_hop(store, focus, two_hop_limit)) {
    two.emplace(h.first, h.second);
  }
  for (const auto& [p, q] : two) out.push_back({p, q});
  return out;
}

std::vector<Constraint> constraint_options(const kb::TripleStore& store, const QueryGraph& base,
                                           const FocusLinks& links) {
  const Span focus_span = links.span(base.focus_source);
  const PathNodes nodes = path_nodes(store, base);
  std::vector<std::pair<NodeRef, const std::set<kb::EntityId>*>> slots = {
      {NodeRef::kAnswer, &nodes.answer}};
  if (base.path.size() == 2) slots.push_back({NodeRef::kMid, &nodes.mid});

  std::vector<Constraint> raw;
  for (std::size_t i = 0; i < links.entities.size(); ++i) {
    const EntityLink& link = links.entities[i];
    if (link.span.overlaps(focus_span)) continue;
    for (const auto& [node, entities] : slots) {
      std::set<kb::PredicateRef> preds;
      for (kb::EntityId e : *entities) {
        for (const kb::Hop& h : kb::one_hop(store, e)) {
          if (h.value == kb::Value{kb::EntityRef{link.entity}}) preds.insert(h.predicate);
        }
      }
      for (const auto& p : preds) {
        raw.push_back({EntityConstraint{node, p, link.entity},
                       LinkRef{LinkKind::kEntity, static_cast<int>(i)}});
      }
    }
  }
  for (std::size_t i = 0; i < links.types.size(); ++i) {
    if (links.types[i].span.overlaps(focus_span)) continue;
    raw.push_back({TypeConstraint{links.types[i].label}, LinkRef{LinkKind::kType, static_cast<int>(i)}});
  }
  for (std::size_t i = 0; i < links.times.size(); ++i) {
    const TimeLink& link = links.times[i];
    if (link.span.overlaps(focus_span)) continue;
    for (const auto& [node, entities] : slots) {
      for (const auto& p : value_predicates(store, *entities, is_time_value)) {
        raw.push_back({TimeConstraint{node, p, link.compare, link.year, link.year_end},
                       LinkRef{LinkKind::kTime, static_cast<int>(i)}});
      }
    }
  }
  for (std::size_t i = 0; i < links.ordinals.size(); ++i) {
    const OrdinalLink& link = links.ordinals[i];
    if (link.span.overlaps(focus_span)) continue;
    for (const auto& [node, entities] : slots) {
      for (const auto& p : value_predicates(store, *entities, is_sortable)) {
        raw.push_back({OrdinalConstraint{node, p, link.ordinal},
                       LinkRef{LinkKind::kOrdinal, static_cast<int>(i)}});
      }
    }
  }

  std::vector<Constraint> out;
  for (Constraint& c : raw) {
    QueryGraph g = base;
    g.constraints = {c};
    if (!kb::execute(store, g).empty()) out.push_back(std::move(c));
  }
  return out;
}

bool compatible(const FocusLinks& links, std::span<const Constraint> constraints) {
  if (constraints.size() > kMaxConstraints) return false;
  int ordinals = 0;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    if (std::holds_alternative<OrdinalConstraint>(constraints[i].kind) && ++ordinals > 1) return false;
    for (std::size_t j = 0; j < i; ++j) {
      if (constraints[i].source == constraints[j].source) return false;
      if (links.span(constraints[i].source).overlaps(links.span(constraints[j].source))) return false;
    }
  }
  return true;
}

std::vector<QueryGraph> generate_candidates(const kb::TripleStore& store,
                                            const FocusLinks& links) {
  std::vector<QueryGraph> out;
  std::set<std::string> seen;
  auto emit = [&](const QueryGraph& g) {
    if (seen.insert(structural_key(store, g)).second) out.push_back(g);
  };

  for (std::size_t li = 0; li < links.entities.size(); ++li) {
    const EntityLink& link = links.entities[li];
    for (auto& path : main_paths(store, link.entity)) {
      QueryGraph base;
      base.focus = link.entity;
      base.focus_source = LinkRef{LinkKind::kEntity, static_cast<int>(li)};
      base.path = std::move(path);
      if (kb::execute(store, base).empty()) continue;
      const auto options = constraint_options(store, base, links);

      // Depth-first over option subsets in index order. An empty or
      // incompatible subset cannot be rescued by adding constraints.
      QueryGraph g = base;
      std::function<void(std::size_t)> extend = [&](std::size_t from) {
        emit(g);
        for (std::size_t k = from; k < options.size(); ++k) {
          g.constraints.push_back(options[k]);
          if (compatible(links, g.constraints) && !kb::execute(store, g).empty()) extend(k + 1);
          g.constraints.pop_back();
        }
      };
      extend(0);
    }
  }
  return out;
}

double f1_score(const std::set<kb::Value>& predicted, const std::set<kb::Value>& gold) {
  if (gold.empty()) throw Error("f1: empty gold answer set");
  if (predicted.empty()) return 0.0;
  std::size_t hit = 0;
  for (const kb::Value& v : predicted) hit += gold.count(v);
  if (hit == 0) return 0.0;
  const double p = static_cast<double>(hit) / static_cast<double>(predicted.size());
  const double r = static_cast<double>(hit) / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

LabelResult label_candidates(std::vector<QueryGraph> candidates, const kb::TripleStore& store,
                             const std::set<kb::Value>& gold, double threshold) {
  LabelResult result;
  for (QueryGraph& g : candidates) {
    LabeledCandidate c;
    try {
      c.answers = kb::execute(store, g);
    } catch (const Error&) {
      ++result.dropped;
      continue;
    }
    c.f1 = f1_score(c.answers, gold);
    c.positive = c.f1 > threshold;
    c.graph = std::move(g);
    result.candidates.push_back(std::move(c));
  }
  return result;
}

std::vector<CandidatePair> training_pairs(std::span<const LabeledCandidate> candidates,
                                          std::size_t negatives) {
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].positive) neg.push_back(i);
  }
  std::stable_sort(neg.begin(), neg.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].f1 > candidates[b].f1;
  });
  if (neg.size() > negatives) neg.resize(negatives);
  std::vector<CandidatePair> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].positive) continue;
    for (std::size_t j : neg) out.push_back({i, j});
  }
  return out;
}

std::string structural_key(const kb::TripleStore& store, const QueryGraph& graph) {
  std::string key = store.entity_key(graph.focus) + " :";
  for (const auto& p : graph.path) key += " " + store.render(p);
  std::vector<std::string> parts;
  for (const Constraint& c : graph.constraints) parts.push_back(constraint_text(store, c.kind));
  std::sort(parts.begin(), parts.end());
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  for (const auto& p : parts) key += " | " + p;
  return key;
}

std::string describe(const kb::TripleStore& store, const QueryGraph& graph) {
  std::string out = store.entity_key(graph.focus);
  for (const auto& p : graph.path) out += " -" + store.render(p) + "->";
  out += " ?x";
  for (const Constraint& c : graph.constraints) out += " ; " + constraint_text(store, c.kind);
  return out;
}

void validate(const kb::TripleStore& store, const QueryGraph& graph) {
  store.check_entity(graph.focus);
  if (graph.path.empty() || graph.path.size() > 2) {
    throw Error("query graph: main path must have 1 or 2 hops, has " +
                std::to_string(graph.path.size()));
  }
  for (const auto& p : graph.path) store.check_predicate(p.id);
  for (const Constraint& c : graph.constraints) {
    auto check_node = [&](NodeRef node) {
      if (node == NodeRef::kMid && graph.path.size() != 2) {
        throw Error("query graph: constraint on the middle node of a one-hop path");
      }
    };
    if (const auto* e = std::get_if<EntityConstraint>(&c.kind)) {
      check_node(e->node);
      store.check_predicate(e->predicate.id);
      store.check_entity(e->entity);
    } else if (const auto* t = std::get_if<TypeConstraint>(&c.kind)) {
      if (t->label.empty()) throw Error("query graph: empty type label");
    } else if (const auto* t = std::get_if<TimeConstraint>(&c.kind)) {
      check_node(t->node);
      store.check_predicate(t->predicate.id);
      if (t->year_end && (t->compare.op != CompareOp::kEq || *t->year_end < t->year)) {
        throw Error("query graph: malformed year range");
      }
    } else {
      const auto& o = std::get<OrdinalConstraint>(c.kind);
      check_node(o.node);
      store.check_predicate(o.predicate.id);
      if (o.ordinal.rank < 1) throw Error("query graph: ordinal rank must be >= 1");
    }
  }
}

}  // namespace synkbqa::qg
