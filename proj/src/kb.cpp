#include "synkbqa/kb.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "synkbqa/error.hpp"
#include "synkbqa/query_graph.hpp"

namespace synkbqa::kb {

bool valid_year(int y) { return y >= 1000 && y <= 2999; }

bool valid_date(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  const int limit = (m == 2 && leap) ? 29 : kDays[m - 1];
  return d <= limit;
}

std::optional<int> year_of(const Value& v) {
  if (const auto* y = std::get_if<Year>(&v)) return y->value;
  if (const auto* d = std::get_if<Date>(&v)) return d->year;
  return std::nullopt;
}

std::optional<double> numeric_key(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* y = std::get_if<Year>(&v)) return static_cast<double>(y->value);
  if (const auto* d = std::get_if<Date>(&v)) {
    return d->year + (d->month - 1) / 12.0 + (d->day - 1) / 372.0;
  }
  return std::nullopt;
}

namespace {

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  Date d;
  if (!parse_int(s.substr(0, 4), d.year) || !parse_int(s.substr(5, 2), d.month) ||
      !parse_int(s.substr(8, 2), d.day)) {
    return std::nullopt;
  }
  if (!valid_year(d.year) || !valid_date(d.year, d.month, d.day)) return std::nullopt;
  return d;
}

std::string pad2(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void sort_unique(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

bool TripleStore::has_type(EntityId id, std::string_view label) const {
  const auto& t = types(id);
  return std::binary_search(t.begin(), t.end(), label);
}

std::optional<EntityId> TripleStore::find_entity(std::string_view key) const {
  auto it = entity_index_.find(std::string(key));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<PredicateId> TripleStore::find_predicate(std::string_view name) const {
  auto it = predicate_index_.find(std::string(name));
  if (it == predicate_index_.end()) return std::nullopt;
  return it->second;
}

void TripleStore::check_entity(EntityId id) const {
  if (id >= entities_.size()) throw Error("unregistered entity id " + std::to_string(id));
}

void TripleStore::check_predicate(PredicateId id) const {
  if (id >= predicates_.size()) throw Error("unregistered predicate id " + std::to_string(id));
}

std::string TripleStore::render(const Value& v) const {
  struct Visitor {
    const TripleStore& store;
    std::string operator()(const EntityRef& e) const { return store.entity_key(e.id); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(const Year& y) const { return std::to_string(y.value); }
    std::string operator()(const Date& d) const {
      return std::to_string(d.year) + "-" + pad2(d.month) + "-" + pad2(d.day);
    }
  };
  return std::visit(Visitor{*this}, v);
}

std::string TripleStore::render(const PredicateRef& p) const {
  return predicate_name(p.id) + (p.inverse ? "^-1" : "");
}

Value TripleStore::parse_answer(std::string_view text) const {
  if (auto e = find_entity(text)) return EntityRef{*e};
  if (auto d = parse_date(text)) return *d;
  int year = 0;
  if (text.size() == 4 && parse_int(text, year) && valid_year(year)) return Year{year};
  std::int64_t i = 0;
  if (parse_int(text, i)) return i;
  return std::string(text);
}

void TripleStoreBuilder::add_entity(std::string key) { entities_.push_back(std::move(key)); }

void TripleStoreBuilder::add_alias(std::string entity, std::string surface) {
  entities_.push_back(entity);
  aliases_.emplace_back(std::move(entity), std::move(surface));
}

void TripleStoreBuilder::add_type(std::string entity, std::string label) {
  entities_.push_back(entity);
  types_.emplace_back(std::move(entity), std::move(label));
}

void TripleStoreBuilder::add_triple(std::string subject, std::string predicate,
                                    RawObject object) {
  entities_.push_back(subject);
  if (object.kind == RawObject::Kind::kEntity) entities_.push_back(object.text);
  triples_.push_back({std::move(subject), std::move(predicate), std::move(object)});
}

void TripleStoreBuilder::add_link(std::string subject, std::string predicate,
                                  std::string object) {
  RawObject o;
  o.kind = RawObject::Kind::kEntity;
  o.text = std::move(object);
  add_triple(std::move(subject), std::move(predicate), std::move(o));
}

TripleStore TripleStoreBuilder::build() const {
  TripleStore s;
  std::vector<std::string> keys = entities_;
  sort_unique(keys);
  std::vector<std::string> preds;
  for (const RawTriple& t : triples_) preds.push_back(t.predicate);
  sort_unique(preds);

  for (std::size_t i = 0; i < keys.size(); ++i) {
    s.entity_index_.emplace(keys[i], static_cast<EntityId>(i));
    s.entities_.push_back({keys[i], {}, {}});
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    s.predicate_index_.emplace(preds[i], static_cast<PredicateId>(i));
  }
  s.predicates_ = preds;

  for (const auto& [entity, surface] : aliases_) {
    s.entities_[s.entity_index_.at(entity)].aliases.push_back(surface);
  }
  for (const auto& [entity, label] : types_) {
    s.entities_[s.entity_index_.at(entity)].types.push_back(label);
    s.type_labels_.push_back(label);
  }
  sort_unique(s.type_labels_);
  for (auto& e : s.entities_) {
    sort_unique(e.aliases);
    sort_unique(e.types);
    if (e.aliases.empty()) {
      std::string alias = e.key;
      std::replace(alias.begin(), alias.end(), '_', ' ');
      e.aliases.push_back(std::move(alias));
    }
  }

  for (const RawTriple& raw : triples_) {
    Triple t;
    t.subject = s.entity_index_.at(raw.subject);
    t.predicate = s.predicate_index_.at(raw.predicate);
    switch (raw.object.kind) {
      case RawObject::Kind::kEntity: t.object = EntityRef{s.entity_index_.at(raw.object.text)}; break;
      case RawObject::Kind::kText: t.object = raw.object.text; break;
      case RawObject::Kind::kInt: t.object = raw.object.number; break;
      case RawObject::Kind::kYear: t.object = Year{static_cast<int>(raw.object.number)}; break;
      case RawObject::Kind::kDate: t.object = raw.object.date; break;
    }
    s.triples_.push_back(std::move(t));
  }
  std::sort(s.triples_.begin(), s.triples_.end());
  s.triples_.erase(std::unique(s.triples_.begin(), s.triples_.end()), s.triples_.end());

  s.outgoing_.assign(s.entities_.size(), {});
  s.incoming_.assign(s.entities_.size(), {});
  for (const Triple& t : s.triples_) {
    s.outgoing_[t.subject].push_back({{t.predicate, false}, t.object});
    if (const auto* e = std::get_if<EntityRef>(&t.object)) {
      s.incoming_[e->id].push_back({{t.predicate, true}, EntityRef{t.subject}});
    }
  }
  for (auto& v : s.outgoing_) std::sort(v.begin(), v.end());
  for (auto& v : s.incoming_) std::sort(v.begin(), v.end());
  return s;
}

TripleStore parse_triples(std::string_view text) {
  TripleStoreBuilder b;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto cols = split_tabs(line);
    if (cols[0] == "@alias" || cols[0] == "@type") {
      if (cols.size() != 3 || cols[1].empty() || cols[2].empty()) {
        throw ParseError(std::string(cols[0]) + " line needs 3 tab-separated fields", line_no);
      }
      if (cols[0] == "@alias") {
        b.add_alias(std::string(cols[1]), std::string(cols[2]));
      } else {
        b.add_type(std::string(cols[1]), std::string(cols[2]));
      }
      continue;
    }
    if (cols.size() != 4) {
      throw ParseError("expected 4 tab-separated fields, found " + std::to_string(cols.size()),
                       line_no);
    }
    if (cols[0].empty() || cols[1].empty()) throw ParseError("empty subject or predicate", line_no);
    RawObject o;
    const std::string_view type = cols[3];
    const std::string_view obj = cols[2];
    if (type == "entity") {
      if (obj.empty()) throw ParseError("empty entity object", line_no);
      o.kind = RawObject::Kind::kEntity;
      o.text = std::string(obj);
    } else if (type == "text") {
      o.kind = RawObject::Kind::kText;
      o.text = std::string(obj);
    } else if (type == "int") {
      o.kind = RawObject::Kind::kInt;
      if (!parse_int(obj, o.number)) throw ParseError("malformed integer '" + std::string(obj) + "'", line_no);
    } else if (type == "year") {
      o.kind = RawObject::Kind::kYear;
      int y = 0;
      if (!parse_int(obj, y) || !valid_year(y)) {
        throw ParseError("malformed year '" + std::string(obj) + "' (expected 1000-2999)", line_no);
      }
      o.number = y;
    } else if (type == "date") {
      o.kind = RawObject::Kind::kDate;
      auto d = parse_date(obj);
      if (!d) throw ParseError("malformed date '" + std::string(obj) + "' (expected yyyy-mm-dd)", line_no);
      o.date = *d;
    } else {
      throw ParseError("unknown object type '" + std::string(type) + "'", line_no);
    }
    b.add_triple(std::string(cols[0]), std::string(cols[1]), std::move(o));
  }
  return b.build();
}

TripleStore load_triples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open triples file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_triples(buf.str());
}

std::vector<Hop> one_hop(const TripleStore& store, EntityId e) {
  store.check_entity(e);
  std::vector<Hop> out(store.outgoing(e).begin(), store.outgoing(e).end());
  out.insert(out.end(), store.incoming(e).begin(), store.incoming(e).end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<TwoHop> two_hop(const TripleStore& store, EntityId e, std::size_t limit) {
  std::vector<TwoHop> out;
  for (const Hop& first : one_hop(store, e)) {
    const auto* mid = std::get_if<EntityRef>(&first.value);
    if (!mid) continue;
    for (const Hop& second : one_hop(store, mid->id)) {
      if (out.size() >= limit) return out;
      out.push_back({first.predicate, mid->id, second.predicate, second.value});
    }
  }
  return out;
}

namespace {

std::vector<Value> follow(const TripleStore& store, EntityId e, const PredicateRef& p) {
  std::vector<Value> out;
  for (const Hop& h : p.inverse ? store.incoming(e) : store.outgoing(e)) {
    if (h.predicate == p) out.push_back(h.value);
  }
  return out;
}

struct Binding {
  std::optional<EntityId> mid;
  Value answer;
};

std::optional<EntityId> node_entity(const Binding& b, qg::NodeRef node) {
  if (node == qg::NodeRef::kMid) return b.mid;
  if (const auto* e = std::get_if<EntityRef>(&b.answer)) return e->id;
  return std::nullopt;
}

bool compare_year(int y, const qg::TimeConstraint& c) {
  switch (c.compare.op) {
    case qg::CompareOp::kEq: return c.year_end ? (y >= c.year && y <= *c.year_end) : y == c.year;
    case qg::CompareOp::kLt: return y < c.year;
    case qg::CompareOp::kGt: return y > c.year;
  }
  return false;
}

bool satisfies(const TripleStore& store, const Binding& b, const qg::ConstraintKind& kind) {
  if (const auto* ec = std::get_if<qg::EntityConstraint>(&kind)) {
    auto e = node_entity(b, ec->node);
    if (!e) return false;
    for (const Value& v : follow(store, *e, ec->predicate)) {
      if (v == Value{EntityRef{ec->entity}}) return true;
    }
    return false;
  }
  if (const auto* tc = std::get_if<qg::TypeConstraint>(&kind)) {
    auto e = node_entity(b, qg::NodeRef::kAnswer);
    return e && store.has_type(*e, tc->label);
  }
  if (const auto* time = std::get_if<qg::TimeConstraint>(&kind)) {
    auto e = node_entity(b, time->node);
    if (!e) return false;
    for (const Value& v : follow(store, *e, time->predicate)) {
      if (auto y = year_of(v); y && compare_year(*y, *time)) return true;
    }
    return false;
  }
  return true;
}

}  // namespace

std::set<Value> execute(const TripleStore& store, const qg::QueryGraph& graph) {
  qg::validate(store, graph);
  std::vector<Binding> bindings;
  for (const Value& v : follow(store, graph.focus, graph.path[0])) {
    if (graph.path.size() == 1) {
      bindings.push_back({std::nullopt, v});
      continue;
    }
    const auto* mid = std::get_if<EntityRef>(&v);
    if (!mid) continue;
    for (const Value& a : follow(store, mid->id, graph.path[1])) bindings.push_back({mid->id, a});
  }

  for (const qg::Constraint& c : graph.constraints) {
    if (std::holds_alternative<qg::OrdinalConstraint>(c.kind)) continue;
    std::erase_if(bindings, [&](const Binding& b) { return !satisfies(store, b, c.kind); });
  }

  for (const qg::Constraint& c : graph.constraints) {
    const auto* oc = std::get_if<qg::OrdinalConstraint>(&c.kind);
    if (!oc) continue;
    const bool descending = oc->ordinal.order == qg::SortOrder::kDescending;
    // Best sort key per candidate node value.
    std::map<EntityId, double> keys;
    for (const Binding& b : bindings) {
      auto e = node_entity(b, oc->node);
      if (!e || keys.contains(*e)) continue;
      std::optional<double> best;
      for (const Value& v : follow(store, *e, oc->predicate)) {
        auto k = numeric_key(v);
        if (k && (!best || (descending ? *k > *best : *k < *best))) best = k;
      }
      if (best) keys.emplace(*e, *best);
    }
    std::vector<std::pair<double, EntityId>> ranked;
    for (const auto& [e, k] : keys) ranked.emplace_back(k, e);
    std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& x, const auto& y) {
      if (x.first != y.first) return descending ? x.first > y.first : x.first < y.first;
      return x.second < y.second;
    });
    const auto rank = static_cast<std::size_t>(oc->ordinal.rank);
    if (ranked.size() < rank) {
      bindings.clear();
      break;
    }
    const EntityId chosen = ranked[rank - 1].second;
    std::erase_if(bindings, [&](const Binding& b) { return node_entity(b, oc->node) != chosen; });
  }

  std::set<Value> answers;
  for (const Binding& b : bindings) answers.insert(b.answer);
  return answers;
}

}  // namespace synkbqa::kb
