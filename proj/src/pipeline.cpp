#include "synkbqa/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "synkbqa/encoders.hpp"
#include "synkbqa/error.hpp"

namespace synkbqa::pipe {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    out.emplace_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) return out;
    start = at + 1;
  }
}

json value_json(const kb::TripleStore& store, const kb::Value& v) {
  if (const auto* e = std::get_if<kb::EntityRef>(&v)) return {"e", store.entity_key(e->id)};
  if (const auto* s = std::get_if<std::string>(&v)) return {"s", *s};
  if (const auto* i = std::get_if<std::int64_t>(&v)) return {"i", *i};
  if (const auto* y = std::get_if<kb::Year>(&v)) return {"y", y->value};
  const auto& d = std::get<kb::Date>(v);
  return {"d", d.year, d.month, d.day};
}

kb::Value value_from(const kb::TripleStore& store, const json& j) {
  const std::string tag = j.at(0);
  if (tag == "e") {
    auto id = store.find_entity(j.at(1).get<std::string>());
    if (!id) throw Error("cache: unknown entity");
    return kb::EntityRef{*id};
  }
  if (tag == "s") return j.at(1).get<std::string>();
  if (tag == "i") return j.at(1).get<std::int64_t>();
  if (tag == "y") return kb::Year{j.at(1).get<int>()};
  return kb::Date{j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

json pred_json(const kb::TripleStore& store, const kb::PredicateRef& p) {
  return {store.predicate_name(p.id), p.inverse};
}

kb::PredicateRef pred_from(const kb::TripleStore& store, const json& j) {
  auto id = store.find_predicate(j.at(0).get<std::string>());
  if (!id) throw Error("cache: unknown predicate");
  return {*id, j.at(1).get<bool>()};
}

json span_json(qg::Span s) { return {s.begin, s.end}; }
qg::Span span_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json graph_json(const kb::TripleStore& store, const qg::QueryGraph& g) {
  json out;
  out["focus"] = store.entity_key(g.focus);
  out["source"] = {static_cast<int>(g.focus_source.kind), g.focus_source.index};
  out["path"] = json::array();
  for (const auto& p : g.path) out["path"].push_back(pred_json(store, p));
  out["constraints"] = json::array();
  for (const qg::Constraint& c : g.constraints) {
    json cj;
    cj["source"] = {static_cast<int>(c.source.kind), c.source.index};
    if (const auto* e = std::get_if<qg::EntityConstraint>(&c.kind)) {
      cj["entity"] = {static_cast<int>(e->node), pred_json(store, e->predicate), store.entity_key(e->entity)};
    } else if (const auto* t = std::get_if<qg::TypeConstraint>(&c.kind)) {
      cj["type"] = t->label;
    } else if (const auto* t = std::get_if<qg::TimeConstraint>(&c.kind)) {
      cj["time"] = {static_cast<int>(t->node), pred_json(store, t->predicate),
                    static_cast<int>(t->compare.op), t->year, t->year_end.value_or(-1)};
    } else {
      const auto& o = std::get<qg::OrdinalConstraint>(c.kind);
      cj["ordinal"] = {static_cast<int>(o.node), pred_json(store, o.predicate),
                       static_cast<int>(o.ordinal.order), o.ordinal.rank};
    }
    out["constraints"].push_back(cj);
  }
  return out;
}

qg::LinkRef link_from(const json& j) {
  return {static_cast<qg::LinkKind>(j.at(0).get<int>()), j.at(1).get<int>()};
}

qg::QueryGraph graph_from(const kb::TripleStore& store, const json& j) {
  qg::QueryGraph g;
  auto focus = store.find_entity(j.at("focus").get<std::string>());
  if (!focus) throw Error("cache: unknown entity");
  g.focus = *focus;
  g.focus_source = link_from(j.at("source"));
  for (const auto& p : j.at("path")) g.path.push_back(pred_from(store, p));
  for (const auto& cj : j.at("constraints")) {
    qg::Constraint c;
    c.source = link_from(cj.at("source"));
    if (cj.contains("entity")) {
      const auto& e = cj["entity"];
      auto ent = store.find_entity(e.at(2).get<std::string>());
      if (!ent) throw Error("cache: unknown entity");
      c.kind = qg::EntityConstraint{static_cast<qg::NodeRef>(e.at(0).get<int>()), pred_from(store, e.at(1)), *ent};
    } else if (cj.contains("type")) {
      c.kind = qg::TypeConstraint{cj["type"].get<std::string>()};
    } else if (cj.contains("time")) {
      const auto& t = cj["time"];
      qg::TimeConstraint tc{static_cast<qg::NodeRef>(t.at(0).get<int>()), pred_from(store, t.at(1)),
                            qg::Compare{static_cast<qg::CompareOp>(t.at(2).get<int>())}, t.at(3).get<int>(),
                            std::nullopt};
      if (t.at(4).get<int>() >= 0) tc.year_end = t.at(4).get<int>();
      c.kind = tc;
    } else {
      const auto& o = cj.at("ordinal");
      c.kind = qg::OrdinalConstraint{static_cast<qg::NodeRef>(o.at(0).get<int>()), pred_from(store, o.at(1)),
                                     qg::Ordinal{static_cast<qg::SortOrder>(o.at(2).get<int>()), o.at(3).get<int>()}};
    }
    g.constraints.push_back(std::move(c));
  }
  return g;
}

json links_json(const kb::TripleStore& store, const qg::FocusLinks& l) {
  json out;
  out["entities"] = json::array();
  for (const auto& e : l.entities) out["entities"].push_back({span_json(e.span), store.entity_key(e.entity), e.score});
  out["types"] = json::array();
  for (const auto& t : l.types) out["types"].push_back({span_json(t.span), t.label, t.score});
  out["times"] = json::array();
  for (const auto& t : l.times) {
    out["times"].push_back({span_json(t.span), static_cast<int>(t.compare.op), t.year, t.year_end.value_or(-1)});
  }
  out["ordinals"] = json::array();
  for (const auto& o : l.ordinals) {
    out["ordinals"].push_back({span_json(o.span), static_cast<int>(o.ordinal.order), o.ordinal.rank});
  }
  return out;
}

qg::FocusLinks links_from(const kb::TripleStore& store, const json& j) {
  qg::FocusLinks l;
  for (const auto& e : j.at("entities")) {
    auto id = store.find_entity(e.at(1).get<std::string>());
    if (!id) throw Error("cache: unknown entity");
    l.entities.push_back({span_from(e.at(0)), *id, e.at(2).get<double>()});
  }
  for (const auto& t : j.at("types")) l.types.push_back({span_from(t.at(0)), t.at(1).get<std::string>(), t.at(2).get<double>()});
  for (const auto& t : j.at("times")) {
    qg::TimeLink tl{span_from(t.at(0)), qg::Compare{static_cast<qg::CompareOp>(t.at(1).get<int>())},
                    t.at(2).get<int>(), std::nullopt};
    if (t.at(3).get<int>() >= 0) tl.year_end = t.at(3).get<int>();
    l.times.push_back(tl);
  }
  for (const auto& o : j.at("ordinals")) {
    l.ordinals.push_back({span_from(o.at(0)), qg::Ordinal{static_cast<qg::SortOrder>(o.at(1).get<int>()), o.at(2).get<int>()}});
  }
  return l;
}

json question_json(const kb::TripleStore& store, const PreparedQuestion& q) {
  json out;
  out["id"] = q.id;
  out["links"] = links_json(store, q.links);
  out["dropped"] = q.dropped;
  out["candidates"] = json::array();
  for (const auto& c : q.candidates) {
    json answers = json::array();
    for (const auto& v : c.answers) answers.push_back(value_json(store, v));
    out["candidates"].push_back({{"graph", graph_json(store, c.graph)}, {"answers", answers},
                                 {"f1", c.f1}, {"positive", c.positive}});
  }
  return out;
}

}  // namespace

std::vector<DatasetRecord> parse_dataset(std::string_view text) {
  std::vector<DatasetRecord> out;
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
    const auto cols = split(line, '\t');
    if (cols.size() != 4) {
      throw ParseError("dataset record needs 4 tab-separated fields, found " + std::to_string(cols.size()), line_no);
    }
    DatasetRecord r{cols[0], cols[1], cols[2], {}, line_no};
    if (r.id.empty()) throw ParseError("empty question id", line_no);
    for (auto& a : split(cols[3], '|')) {
      if (!a.empty()) r.answers.push_back(std::move(a));
    }
    if (r.answers.empty()) throw ParseError("question " + r.id + " has no gold answers", line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<DatasetRecord> load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

PreparedQuestion prepare(std::string id, std::string text, dep::DepTree tree,
                         const std::set<kb::Value>& gold, const kb::TripleStore& store,
                         const EmbeddingTable& words) {
  PreparedQuestion q;
  q.id = std::move(id);
  q.text = std::move(text);
  q.tokens = tree.forms();
  q.tree = std::move(tree);
  q.gold = gold;
  q.links = qg::link_all(q.tokens, store, words);
  auto graphs = qg::generate_candidates(store, q.links);
  if (gold.empty()) {
    for (auto& g : graphs) {
      qg::LabeledCandidate c;
      c.answers = kb::execute(store, g);
      c.graph = std::move(g);
      q.candidates.push_back(std::move(c));
    }
  } else {
    auto labeled = qg::label_candidates(std::move(graphs), store, gold);
    q.candidates = std::move(labeled.candidates);
    q.dropped = labeled.dropped;
  }
  return q;
}

std::string fingerprint_files(const std::vector<std::string>& paths) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& p : paths) {
    for (unsigned char c : read_file(p)) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::vector<PreparedQuestion> prepare_dataset(const std::vector<DatasetRecord>& records,
                                              const std::vector<dep::ConlluSentence>& parses,
                                              const kb::TripleStore& store,
                                              const EmbeddingTable& words,
                                              const std::optional<std::string>& cache_dir,
                                              std::string_view fingerprint) {
  std::map<std::string, const dep::ConlluSentence*> by_id;
  for (const auto& s : parses) by_id.emplace(s.id, &s);
  std::vector<const dep::ConlluSentence*> trees;
  for (const auto& r : records) {
    auto it = by_id.find(r.parse_ref);
    if (it == by_id.end()) {
      throw Error("question " + r.id + ": no parse with sent_id '" + r.parse_ref + "'");
    }
    trees.push_back(it->second);
  }

  std::optional<std::filesystem::path> cache_file;
  if (cache_dir) {
    cache_file = std::filesystem::path(*cache_dir) / ("candidates-" + std::string(fingerprint) + ".json");
  }
  if (cache_file && std::filesystem::exists(*cache_file)) {
    const json j = json::parse(read_file(cache_file->string()));
    if (j.at("questions").size() == records.size()) {
      std::vector<PreparedQuestion> out;
      for (std::size_t i = 0; i < records.size(); ++i) {
        const json& qj = j["questions"][i];
        PreparedQuestion q;
        q.id = records[i].id;
        q.text = records[i].question;
        q.tree = trees[i]->tree;
        q.tokens = q.tree.forms();
        for (const auto& a : records[i].answers) q.gold.insert(store.parse_answer(a));
        q.links = links_from(store, qj.at("links"));
        q.dropped = qj.at("dropped").get<std::size_t>();
        for (const auto& cj : qj.at("candidates")) {
          qg::LabeledCandidate c;
          c.graph = graph_from(store, cj.at("graph"));
          for (const auto& v : cj.at("answers")) c.answers.insert(value_from(store, v));
          c.f1 = cj.at("f1").get<double>();
          c.positive = cj.at("positive").get<bool>();
          q.candidates.push_back(std::move(c));
        }
        out.push_back(std::move(q));
      }
      spdlog::debug("loaded {} prepared questions from {}", out.size(), cache_file->string());
      return out;
    }
  }

  std::vector<PreparedQuestion> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::set<kb::Value> gold;
    for (const auto& a : records[i].answers) gold.insert(store.parse_answer(a));
    out.push_back(prepare(records[i].id, records[i].question, trees[i]->tree, gold, store, words));
    if (out.back().dropped > 0) {
      spdlog::warn("question {}: {} candidates failed to execute", records[i].id, out.back().dropped);
    }
  }
  if (cache_file) {
    json j;
    j["questions"] = json::array();
    for (const auto& q : out) j["questions"].push_back(question_json(store, q));
    std::filesystem::create_directories(cache_file->parent_path());
    std::ofstream f(*cache_file, std::ios::binary);
    f << j.dump() << "\n";
  }
  return out;
}

match::QuestionInput question_input(const PreparedQuestion& q) {
  match::QuestionInput in;
  in.tree = q.tree;
  in.anonymized = enc::anonymize(q.tokens, q.links);
  in.masked = enc::mask_tokens(q.tokens, q.links);
  in.focus = enc::focus_words(q.tree, q.links);
  in.answer = dep::answer_word(q.tree);
  return in;
}

match::GraphInput graph_input(const kb::TripleStore& store, const qg::FocusLinks& links,
                              const qg::LabeledCandidate& c) {
  match::GraphInput g;
  g.subpaths = match::split_subpaths(store, c.graph);
  g.features.link_score = links.entities.at(static_cast<std::size_t>(c.graph.focus_source.index)).score;
  g.features.constraints = c.graph.constraints.size();
  g.features.path_length = c.graph.path.size();
  g.features.answers = c.answers.size();
  return g;
}

match::TrainQuestion train_question(const kb::TripleStore& store, const PreparedQuestion& q) {
  match::TrainQuestion t;
  t.question = question_input(q);
  for (const auto& c : q.candidates) t.graphs.push_back(graph_input(store, q.links, c));
  t.pairs = qg::training_pairs(q.candidates);
  return t;
}

match::ModelKeys collect_keys(const kb::TripleStore& store,
                              const std::vector<PreparedQuestion>& train,
                              const EmbeddingTable& words, const EmbeddingTable* edges) {
  match::ModelKeys keys;
  keys.words = words.keys();
  std::set<std::string> labels;
  std::set<std::string> relations;
  for (const auto& q : train) {
    for (const auto& t : q.tree.tokens()) labels.insert(t.deprel);
    for (const auto& c : q.candidates) {
      for (auto& s : match::split_subpaths(store, c.graph)) relations.insert(std::move(s));
    }
  }
  keys.labels.assign(labels.begin(), labels.end());
  keys.relations.assign(relations.begin(), relations.end());
  if (edges) keys.edges = edges->keys();
  return keys;
}

}  // namespace synkbqa::pipe
