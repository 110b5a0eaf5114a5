#include "synkbqa/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "synkbqa/error.hpp"
#include "synkbqa/numcore/init.hpp"
#include "synkbqa/numcore/optim.hpp"

namespace synkbqa::match {

using num::Tape;
using num::Tensor;
using num::Var;

namespace {

std::string relation_name(const kb::TripleStore& store, const kb::PredicateRef& p) {
  return store.predicate_name(p.id);
}

std::string on_node(const kb::TripleStore& store, const qg::QueryGraph& g, qg::NodeRef node,
                    std::string tail) {
  if (node == qg::NodeRef::kMid) return relation_name(store, g.path[1]) + ".." + tail;
  return tail;
}

const char* compare_token(qg::CompareOp op) {
  switch (op) {
    case qg::CompareOp::kEq: return "cmp_eq";
    case qg::CompareOp::kLt: return "cmp_lt";
    case qg::CompareOp::kGt: return "cmp_gt";
  }
  return "cmp_eq";
}

constexpr const char* kFeatureNames[kFeatureCount] = {"semantic", "link_score", "constraints",
                                                      "path_length", "answer_count"};

}  // namespace

std::vector<std::string> split_subpaths(const kb::TripleStore& store, const qg::QueryGraph& graph) {
  std::vector<std::string> out;
  std::string main;
  for (const auto& p : graph.path) main += (main.empty() ? "" : "..") + relation_name(store, p);
  out.push_back(main);
  for (const qg::Constraint& c : graph.constraints) {
    if (const auto* e = std::get_if<qg::EntityConstraint>(&c.kind)) {
      out.push_back(on_node(store, graph, e->node, relation_name(store, e->predicate)));
    } else if (const auto* t = std::get_if<qg::TypeConstraint>(&c.kind)) {
      out.push_back(t->label);
    } else if (const auto* t = std::get_if<qg::TimeConstraint>(&c.kind)) {
      out.push_back(on_node(store, graph, t->node,
                            relation_name(store, t->predicate) + ".." + compare_token(t->compare.op)));
    } else {
      const auto& o = std::get<qg::OrdinalConstraint>(c.kind);
      const char* dir = o.ordinal.order == qg::SortOrder::kDescending ? "ord_desc" : "ord_asc";
      out.push_back(on_node(store, graph, o.node, relation_name(store, o.predicate) + ".." + dir));
    }
  }
  return out;
}

Var encode_subpath(Tape& tape, std::string_view relation, const SubPathTables& tables) {
  if (relation.empty()) throw Error("sub-path: empty relation string");
  Var id = tape.row(*tables.relations, tables.relation_vocab->id(relation));
  std::vector<Var> words;
  for (const std::string& w : qg::name_words(relation)) {
    words.push_back(tape.row(*tables.words, tables.word_vocab->id(w)));
  }
  if (words.empty()) words.push_back(tape.row(*tables.words, tables.word_vocab->unk()));
  return tape.add(id, words.size() == 1 ? words[0] : tape.mean(words));
}

Var encode_graph(Tape& tape, std::span<const std::string> subpaths, const SubPathTables& tables) {
  if (subpaths.empty()) throw Error("graph encoding: no sub-paths");
  std::vector<Var> sp;
  for (const std::string& s : subpaths) sp.push_back(encode_subpath(tape, s, tables));
  return sp.size() == 1 ? sp[0] : tape.maxpool(sp);
}

Var semantic_score(Tape& tape, Var question, Var graph) { return tape.cosine(question, graph); }

std::array<double, kFeatureCount - 1> aux_features(const GraphFeatures& f) {
  return {f.link_score, static_cast<double>(f.constraints) / 4.0,
          static_cast<double>(f.path_length) - 1.0,
          std::log10(1.0 + static_cast<double>(f.answers))};
}

ScoreBreakdown total_score(double s_rm, const GraphFeatures& features,
                           std::span<const double> weights) {
  if (weights.size() != kFeatureCount) throw Error("score: expected 5 weights");
  ScoreBreakdown b;
  const auto aux = aux_features(features);
  b.features[0] = s_rm;
  std::copy(aux.begin(), aux.end(), b.features.begin() + 1);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!std::isfinite(b.features[i])) {
      throw Error(std::string("score: non-finite feature ") + kFeatureNames[i]);
    }
    b.weights[i] = weights[i];
    b.total += weights[i] * b.features[i];
  }
  return b;
}

Var total_score(Tape& tape, Var s_rm, const GraphFeatures& features, Var weights) {
  const auto aux = aux_features(features);
  for (std::size_t i = 0; i < aux.size(); ++i) {
    if (!std::isfinite(aux[i])) throw Error(std::string("score: non-finite feature ") + kFeatureNames[i + 1]);
  }
  if (!std::isfinite(tape.scalar(s_rm))) throw Error("score: non-finite feature semantic");
  const Var parts[] = {s_rm, tape.constant(std::vector<double>(aux.begin(), aux.end()))};
  return tape.dot(weights, tape.concat(parts));
}

double hinge_loss(double pos, double neg, double margin) {
  return std::max(0.0, (neg + margin) - pos);
}

Var hinge_loss(Tape& tape, Var pos, Var neg, double margin) {
  return tape.relu(tape.sub(tape.add(tape.constant(std::vector<double>{margin}), neg), pos));
}

std::string ModelConfig::flags() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (on) out += (out.empty() ? "" : ",") + std::string(name);
  };
  add(sdp, "sdp");
  add(tpf, "tpf");
  add(treegru, "treegru");
  return out.empty() ? "none" : out;
}

void ModelConfig::set_flags(std::string_view list) {
  sdp = tpf = treegru = false;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t comma = list.find(',', pos);
    if (comma == std::string_view::npos) comma = list.size();
    std::string_view item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "sdp") {
      sdp = true;
    } else if (item == "tpf") {
      tpf = true;
    } else if (item == "treegru") {
      treegru = true;
    } else if (!item.empty() && item != "none") {
      throw Error("unknown syntax flag '" + std::string(item) + "' (expected sdp, tpf, treegru)");
    }
    pos = comma + 1;
  }
}

Model::Model(const ModelConfig& config, ModelKeys keys, std::uint64_t seed) : config_(config) {
  if (config_.word_dim == 0 || config_.word_dim != 2 * config_.hidden) {
    throw Error("model: word dimension must equal twice the hidden size");
  }
  for (std::string_view extra : {enc::kEntityMask, enc::kTimeMask}) {
    if (std::find(keys.words.begin(), keys.words.end(), extra) == keys.words.end()) {
      keys.words.emplace_back(extra);
    }
  }
  words_ = enc::Vocabulary(std::move(keys.words));
  labels_ = enc::Vocabulary(std::move(keys.labels));
  relations_ = enc::Vocabulary(std::move(keys.relations));

  num::Rng rng(seed);
  const std::size_t d = config_.word_dim;
  params_.add("emb.word", num::xavier_uniform({words_.size(), d}, rng));
  params_.add("emb.rel", num::xavier_uniform({relations_.size(), d}, rng));
  enc::add_gru(params_, "que.fw", d, config_.hidden, rng);
  enc::add_gru(params_, "que.bw", d, config_.hidden, rng);
  if (config_.sdp) {
    params_.add("emb.label", num::xavier_uniform({labels_.size(), d}, rng));
    enc::add_gru(params_, "sdp.fw", d, config_.hidden, rng);
    enc::add_gru(params_, "sdp.bw", d, config_.hidden, rng);
  }
  if (config_.tpf) {
    params_.add("emb.pos",
                num::xavier_uniform({static_cast<std::size_t>(config_.max_depth) + 2, config_.pos_dim}, rng));
    enc::add_gru(params_, "tpf.fw", d + config_.pos_dim, config_.hidden, rng);
    enc::add_gru(params_, "tpf.bw", d + config_.pos_dim, config_.hidden, rng);
  }
  if (config_.treegru) {
    if (keys.edges.empty() || config_.edge_dim == 0) {
      throw Error("model: the treegru encoder needs edge embeddings");
    }
    edges_ = edgevec::EdgeVocab::from_keys(keys.edges);
    params_.add("emb.edge", num::xavier_uniform({edges_->size(), config_.edge_dim}, rng));
    params_.add("emb.edge_root", num::xavier_uniform({config_.edge_dim}, rng));
    enc::add_tree_gru(params_, "tree.up", config_.edge_dim, config_.tree_hidden, rng);
    enc::add_tree_gru(params_, "tree.down", config_.edge_dim, config_.tree_hidden, rng);
    enc::add_gru(params_, "tree.fw", d + 2 * config_.tree_hidden, config_.hidden, rng);
    enc::add_gru(params_, "tree.bw", d + 2 * config_.tree_hidden, config_.hidden, rng);
  }
  Tensor w({kFeatureCount});
  w[0] = 1.0;
  params_.add("score.w", std::move(w));
  for (auto& [name, p] : params_) p.enable_grad();
}

void Model::set_word_vectors(const EmbeddingTable& table) {
  if (table.dim() != config_.word_dim) {
    throw Error("model: word vectors have dimension " + std::to_string(table.dim()) + ", expected " +
                std::to_string(config_.word_dim));
  }
  Tensor& e = params_.at("emb.word");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (auto r = table.find(words_.keys()[i])) {
      std::copy_n(table.row(*r).begin(), config_.word_dim, e.row(i).begin());
    }
  }
}

void Model::set_edge_vectors(const EmbeddingTable& table) {
  if (!edges_) return;
  if (table.dim() != config_.edge_dim) throw Error("model: edge vector dimension mismatch");
  Tensor& e = params_.at("emb.edge");
  for (std::size_t i = 0; i < edges_->size(); ++i) {
    if (auto r = table.find(edges_->key(i))) {
      std::copy_n(table.row(*r).begin(), config_.edge_dim, e.row(i).begin());
    }
  }
}

namespace {

void write_section(std::ostream& out, const char* name, const std::vector<std::string>& keys) {
  out << "[" << name << "]\n";
  for (const auto& k : keys) out << k << "\n";
}

}  // namespace

void Model::save(const std::string& path) const {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    num::write_matrices(out, params_);
  }
  std::ofstream out(path + ".manifest", std::ios::binary);
  if (!out) throw Error("cannot write manifest " + path + ".manifest");
  out << "word_dim = " << config_.word_dim << "\n"
      << "hidden = " << config_.hidden << "\n"
      << "tree_hidden = " << config_.tree_hidden << "\n"
      << "pos_dim = " << config_.pos_dim << "\n"
      << "edge_dim = " << config_.edge_dim << "\n"
      << "max_depth = " << config_.max_depth << "\n"
      << "dropout = " << num::format_double(config_.dropout) << "\n"
      << "flags = " << config_.flags() << "\n";
  write_section(out, "words", words_.keys());
  write_section(out, "labels", labels_.keys());
  write_section(out, "relations", relations_.keys());
  if (edges_) write_section(out, "edges", edges_->keys());
}

Model Model::load(const std::string& path) {
  std::ifstream in(path + ".manifest", std::ios::binary);
  if (!in) throw Error("cannot open manifest " + path + ".manifest");
  ModelConfig config;
  ModelKeys keys;
  std::vector<std::string>* section = nullptr;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (section == nullptr || (line.size() > 2 && line.front() == '[' && line.back() == ']')) {
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        const std::string name = line.substr(1, line.size() - 2);
        if (name == "words") section = &keys.words;
        else if (name == "labels") section = &keys.labels;
        else if (name == "relations") section = &keys.relations;
        else if (name == "edges") section = &keys.edges;
        else throw ParseError("unknown manifest section '" + name + "'", line_no);
        continue;
      }
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 3);
      try {
        if (key == "word_dim") config.word_dim = std::stoul(value);
        else if (key == "hidden") config.hidden = std::stoul(value);
        else if (key == "tree_hidden") config.tree_hidden = std::stoul(value);
        else if (key == "pos_dim") config.pos_dim = std::stoul(value);
        else if (key == "edge_dim") config.edge_dim = std::stoul(value);
        else if (key == "max_depth") config.max_depth = std::stoi(value);
        else if (key == "dropout") config.dropout = num::parse_double(value);
        else if (key == "flags") config.set_flags(value);
        else throw ParseError("unknown manifest key '" + key + "'", line_no);
      } catch (const std::logic_error&) {
        throw ParseError("bad value for '" + key + "'", line_no);
      }
      continue;
    }
    section->push_back(line);
  }
  Model model(config, std::move(keys), 0);
  std::ifstream matrices(path, std::ios::binary);
  if (!matrices) throw Error("cannot open checkpoint " + path);
  num::assign_matrices(model.params_, num::read_matrices(matrices));
  return model;
}

SubPathTables Model::subpath_tables() {
  return {&params_.at("emb.rel"), &relations_, &params_.at("emb.word"), &words_};
}

std::vector<Var> Model::word_rows(Tape& tape, std::span<const std::string> tokens, num::Rng& rng,
                                  bool training) {
  Tensor& table = params_.at("emb.word");
  std::vector<Var> out;
  for (const std::string& t : tokens) {
    Var v = tape.row(table, words_.id(t));
    out.push_back(training && config_.dropout > 0 ? tape.dropout(v, config_.dropout, rng, true) : v);
  }
  return out;
}

Model::QuestionVars Model::encode_question(Tape& tape, const QuestionInput& input, num::Rng& rng,
                                           bool training) {
  QuestionVars out;
  out.q = enc::bigru_encode(tape, word_rows(tape, input.anonymized, rng, training),
                            enc::bind_gru(params_, "que.fw"), enc::bind_gru(params_, "que.bw"));
  std::vector<Var> extras;
  if (config_.sdp) {
    enc::SdpTables tables{&params_.at("emb.word"), &words_, &params_.at("emb.label"), &labels_};
    out.sdp = enc::encode_sdp(tape, input.tree, input.answer, input.focus, input.masked, tables,
                              enc::bind_gru(params_, "sdp.fw"), enc::bind_gru(params_, "sdp.bw"));
    if (out.sdp) extras.push_back(*out.sdp);
  }
  if (config_.tpf) {
    out.tpf = enc::encode_tpf(tape, input.tree, word_rows(tape, input.masked, rng, training),
                              params_.at("emb.pos"), config_.max_depth,
                              enc::bind_gru(params_, "tpf.fw"), enc::bind_gru(params_, "tpf.bw"));
    extras.push_back(*out.tpf);
  }
  if (config_.treegru) {
    Tensor& edge_table = params_.at("emb.edge");
    std::vector<Var> edge_inputs;
    for (int i = 1; i <= static_cast<int>(input.tree.size()); ++i) {
      if (input.tree.head(i) == 0) {
        edge_inputs.push_back(tape.param(params_.at("emb.edge_root")));
      } else {
        edge_inputs.push_back(tape.row(edge_table, edges_->resolve(dep::incoming_edge(input.tree, i))));
      }
    }
    out.treegru = enc::encode_treegru(
        tape, input.tree, word_rows(tape, input.masked, rng, training), edge_inputs,
        enc::bind_tree_gru(params_, "tree.up"), enc::bind_tree_gru(params_, "tree.down"),
        enc::bind_gru(params_, "tree.fw"), enc::bind_gru(params_, "tree.bw"));
    extras.push_back(*out.treegru);
  }
  out.combined = enc::combine(tape, out.q, extras);
  return out;
}

Var Model::encode_graph(Tape& tape, const GraphInput& graph) {
  return match::encode_graph(tape, graph.subpaths, subpath_tables());
}

Var Model::score(Tape& tape, Var question, Var graph, const GraphFeatures& f) {
  return total_score(tape, semantic_score(tape, question, graph), f, tape.param(params_.at("score.w")));
}

std::vector<double> train(Model& model, std::span<const TrainQuestion> data,
                          const TrainConfig& config, const std::function<void(int, double)>& on_epoch) {
  if (config.batch == 0) throw Error("train: batch size must be positive");
  if (config.margin <= 0) throw Error("train: margin must be positive");
  struct Item {
    std::size_t question;
    qg::CandidatePair pair;
  };
  std::vector<Item> items;
  for (std::size_t q = 0; q < data.size(); ++q) {
    for (const auto& p : data[q].pairs) items.push_back({q, p});
  }
  if (items.empty()) throw Error("train: no trainable questions (no positive/negative pairs)");

  num::Rng rng(config.seed);
  num::Adam adam(num::AdamConfig{config.learning_rate});
  std::vector<double> losses;
  model.params().zero_grad();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(items.begin(), items.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < items.size(); start += config.batch) {
      const std::size_t stop = std::min(items.size(), start + config.batch);
      Tape tape;
      std::map<std::size_t, Var> questions;
      std::map<std::pair<std::size_t, std::size_t>, Var> graphs;
      auto question = [&](std::size_t q) {
        auto it = questions.find(q);
        if (it == questions.end()) {
          it = questions.emplace(q, model.encode_question(tape, data[q].question, rng, true).combined).first;
        }
        return it->second;
      };
      auto score = [&](std::size_t q, std::size_t g) {
        auto key = std::make_pair(q, g);
        auto it = graphs.find(key);
        if (it == graphs.end()) {
          const GraphInput& gi = data[q].graphs.at(g);
          it = graphs.emplace(key, model.score(tape, question(q), model.encode_graph(tape, gi), gi.features)).first;
        }
        return it->second;
      };
      std::vector<Var> terms;
      for (std::size_t k = start; k < stop; ++k) {
        const Item& item = items[k];
        terms.push_back(hinge_loss(tape, score(item.question, item.pair.positive),
                                   score(item.question, item.pair.negative), config.margin));
      }
      Var loss = tape.mean(terms);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at pair " +
                    std::to_string(start));
      }
      total += value * static_cast<double>(stop - start);
      tape.backward(loss);
      adam.step(model.params());
      model.params().zero_grad();
    }
    losses.push_back(total / static_cast<double>(items.size()));
    if (on_epoch) on_epoch(epoch, losses.back());
  }
  return losses;
}

std::vector<ScoreBreakdown> score_candidates(Model& model, const QuestionInput& question,
                                             std::span<const GraphInput> graphs) {
  std::vector<ScoreBreakdown> out;
  if (graphs.empty()) return out;
  Tape tape;
  num::Rng rng(0);
  const Var q = model.encode_question(tape, question, rng, false).combined;
  const auto w = model.params().at("score.w").data();
  for (const GraphInput& g : graphs) {
    const Var p = model.encode_graph(tape, g);
    out.push_back(total_score(tape.scalar(semantic_score(tape, q, p)), g.features, w));
  }
  return out;
}

std::optional<std::size_t> best_candidate(std::span<const ScoreBreakdown> scores) {
  if (scores.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].total > scores[best].total) best = i;
  }
  return best;
}

LengthBucket length_bucket(std::size_t words) {
  if (words <= 4) return LengthBucket::kShort;
  if (words <= 7) return LengthBucket::kMid;
  return LengthBucket::kLong;
}

std::string_view bucket_name(LengthBucket b) {
  switch (b) {
    case LengthBucket::kShort: return "SHORT";
    case LengthBucket::kMid: return "MID";
    case LengthBucket::kLong: return "LONG";
  }
  return "?";
}

std::size_t word_count(std::span<const std::string> tokens) {
  return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(),
                                                [](const std::string& t) { return !dep::is_punctuation(t); }));
}

std::string question_type(std::span<const std::string> tokens) {
  for (const auto& t : tokens) {
    const std::string w = dep::to_lower(t);
    if (dep::is_wh_word(w)) return w;
  }
  return "other";
}

EvalReport summarize(std::vector<EvalItem> items) {
  std::sort(items.begin(), items.end(), [](const EvalItem& a, const EvalItem& b) { return a.id < b.id; });
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  Acc all;
  std::map<std::string, Acc> types;
  std::map<LengthBucket, Acc> lengths = {
      {LengthBucket::kShort, {}}, {LengthBucket::kMid, {}}, {LengthBucket::kLong, {}}};
  std::size_t without = 0;
  for (const EvalItem& it : items) {
    for (Acc* a : {&all, &types[it.type], &lengths[it.bucket]}) {
      a->sum += it.f1;
      ++a->n;
    }
    if (it.candidates == 0) ++without;
  }
  auto mean = [](const Acc& a) { return a.n ? a.sum / static_cast<double>(a.n) : 0.0; };
  EvalReport r;
  r.overall = {{"mean_f1", "all", mean(all)},
               {"questions", "all", static_cast<double>(all.n)},
               {"no_candidates", "all", static_cast<double>(without)}};
  for (const auto& [type, acc] : types) {
    r.by_type.push_back({"mean_f1", type, mean(acc)});
    r.by_type.push_back({"questions", type, static_cast<double>(acc.n)});
  }
  for (const auto& [bucket, acc] : lengths) {
    r.by_length.push_back({"mean_f1", std::string(bucket_name(bucket)), mean(acc)});
    r.by_length.push_back({"questions", std::string(bucket_name(bucket)), static_cast<double>(acc.n)});
  }
  return r;
}

}  // namespace synkbqa::match
