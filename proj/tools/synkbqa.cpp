// synkbqa command line: pretrain-edges, train, eval, explain, answer.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "synkbqa/deptree.hpp"
#include "synkbqa/edgevec.hpp"
#include "synkbqa/embedding_table.hpp"
#include "synkbqa/error.hpp"
#include "synkbqa/kb.hpp"
#include "synkbqa/matcher.hpp"
#include "synkbqa/numcore/params.hpp"
#include "synkbqa/pipeline.hpp"

namespace {

using namespace synkbqa;

constexpr int kUsage = 2;
constexpr int kEmptyTraining = 3;
constexpr int kConfigMismatch = 4;

// Failure with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_st("synkbqa");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("SYNKBQA_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

struct DataOptions {
  std::string triples;
  std::string dataset;
  std::string conllu;
  std::string word_emb;
  std::string edge_emb;
  std::string cache;
};

struct Options {
  DataOptions data;
  std::string checkpoint;
  std::string out;
  std::string flags;
  std::string id;
  std::string question;
  std::string parse;
  int epochs = -1;
  std::size_t batch = 32;
  double margin = 0.5;
  double dropout = 0.1;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::size_t tree_hidden = 100;
  std::size_t pos_dim = 50;
  // pretrain-edges
  std::size_t dim = 300;
  int negatives = 5;
  double edge_lr = 0.025;
  std::size_t min_count = 2;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Exit{kUsage, std::string("missing required flag ") + flag};
}

void require_file(const std::string& value, const char* flag) {
  require(value, flag);
  if (!std::filesystem::is_regular_file(value)) {
    throw Exit{kUsage, std::string(flag) + ": cannot read '" + value + "'"};
  }
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

struct Loaded {
  kb::TripleStore store;
  EmbeddingTable words;
  std::vector<pipe::PreparedQuestion> questions;
};

Loaded load_data(const DataOptions& d) {
  require_file(d.triples, "--triples");
  require_file(d.dataset, "--dataset");
  require_file(d.conllu, "--conllu");
  require_file(d.word_emb, "--word-emb");
  Loaded l;
  l.store = kb::load_triples(d.triples);
  l.words = load_embeddings(d.word_emb);
  const auto records = pipe::load_dataset(d.dataset);
  auto parses = dep::read_conllu_file(d.conllu);
  for (const auto& e : parses.errors) {
    spdlog::warn("{}: line {}: sentence {}: {}", d.conllu, e.line, e.sentence, e.message);
  }
  std::optional<std::string> cache;
  std::string fingerprint;
  if (!d.cache.empty()) {
    cache = d.cache;
    fingerprint = pipe::fingerprint_files({d.triples, d.dataset, d.conllu, d.word_emb});
  }
  l.questions = pipe::prepare_dataset(records, parses.sentences, l.store, l.words, cache, fingerprint);
  return l;
}

void add_data_options(CLI::App* cmd, DataOptions& d, bool dataset) {
  cmd->add_option("--triples", d.triples, "triple TSV");
  if (dataset) cmd->add_option("--dataset", d.dataset, "question TSV");
  cmd->add_option("--conllu", d.conllu, "CoNLL-U parses");
  cmd->add_option("--word-emb", d.word_emb, "word embedding text file");
  if (dataset) cmd->add_option("--cache", d.cache, "candidate cache directory");
}

int cmd_pretrain(const Options& o) {
  require_file(o.data.conllu, "--conllu");
  require(o.out, "--out");
  const auto parsed = dep::read_conllu_file(o.data.conllu);
  for (const auto& e : parsed.errors) spdlog::warn("line {}: {}", e.line, e.message);
  std::vector<dep::DepTree> corpus;
  for (const auto& s : parsed.sentences) corpus.push_back(s.tree);
  const auto vocab = edgevec::EdgeVocab::build(corpus, o.min_count);
  const auto pairs = edgevec::training_pairs(corpus, vocab);
  edgevec::SkipGramConfig cfg;
  cfg.dim = o.dim;
  cfg.epochs = o.epochs < 0 ? 5 : o.epochs;
  cfg.negatives = o.negatives;
  cfg.learning_rate = o.edge_lr;
  cfg.seed = o.seed;
  const auto result = edgevec::train_skipgram(pairs, vocab, cfg);
  ensure_parent(o.out);
  save_embeddings(result.embeddings, o.out);
  std::printf("vocab_size\t%zu\n", vocab.size());
  std::printf("pairs\t%zu\n", pairs.size());
  std::printf("final_loss\t%s\n",
              result.epoch_loss.empty() ? "nan" : num::format_double(result.epoch_loss.back()).c_str());
  return 0;
}

int cmd_train(const Options& o) {
  require(o.out, "--out");
  match::ModelConfig config;
  config.set_flags(o.flags);
  std::optional<EmbeddingTable> edges;
  if (config.treegru) {
    if (o.data.edge_emb.empty()) throw Exit{kUsage, "--flags treegru requires --edge-emb"};
    require_file(o.data.edge_emb, "--edge-emb");
    edges = load_embeddings(o.data.edge_emb);
    config.edge_dim = edges->dim();
  }
  Loaded data = load_data(o.data);
  if (data.words.dim() % 2 != 0) throw Exit{kUsage, "--word-emb: dimension must be even"};
  config.word_dim = data.words.dim();
  config.hidden = data.words.dim() / 2;
  config.tree_hidden = o.tree_hidden;
  config.pos_dim = o.pos_dim;
  config.dropout = o.dropout;

  std::vector<match::TrainQuestion> train;
  std::size_t trainable = 0;
  for (const auto& q : data.questions) {
    train.push_back(pipe::train_question(data.store, q));
    if (!train.back().pairs.empty()) ++trainable;
  }
  if (trainable == 0) {
    std::fprintf(stderr, "no trainable questions\nid\tcandidates\tpositives\n");
    for (const auto& q : data.questions) {
      std::size_t pos = 0;
      for (const auto& c : q.candidates) pos += c.positive;
      std::fprintf(stderr, "%s\t%zu\t%zu\n", q.id.c_str(), q.candidates.size(), pos);
    }
    return kEmptyTraining;
  }
  spdlog::info("{} of {} questions trainable", trainable, data.questions.size());

  match::Model model(config, pipe::collect_keys(data.store, data.questions, data.words, edges ? &*edges : nullptr),
                     o.seed);
  model.set_word_vectors(data.words);
  if (edges) model.set_edge_vectors(*edges);

  match::TrainConfig tc;
  tc.epochs = o.epochs < 0 ? 10 : o.epochs;
  tc.batch = o.batch;
  tc.margin = o.margin;
  tc.learning_rate = o.lr;
  tc.seed = o.seed;
  std::printf("epoch\tloss\n");
  match::train(model, train, tc, [](int epoch, double loss) {
    std::printf("%d\t%s\n", epoch, num::format_double(loss).c_str());
    std::fflush(stdout);
  });
  ensure_parent(o.out);
  model.save(o.out);
  spdlog::info("wrote {} ({})", o.out, config.flags());
  return 0;
}

match::Model load_model(const Options& o) {
  require_file(o.checkpoint, "--checkpoint");
  match::Model model = match::Model::load(o.checkpoint);
  if (!o.flags.empty()) {
    match::ModelConfig requested;
    requested.set_flags(o.flags);
    if (requested.flags() != model.config().flags()) {
      throw Exit{kConfigMismatch, "checkpoint was trained with flags '" + model.config().flags() +
                                      "' but '" + requested.flags() + "' was requested"};
    }
  }
  return model;
}

void write_rows(const std::string& path, const std::vector<match::ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "metric\tbucket\tvalue\n";
  for (const auto& r : rows) out << r.metric << "\t" << r.bucket << "\t" << num::format_double(r.value) << "\n";
}

int cmd_eval(const Options& o) {
  match::Model model = load_model(o);
  Loaded data = load_data(o.data);
  std::vector<match::EvalItem> items;
  for (const auto& q : data.questions) {
    match::EvalItem item;
    item.id = q.id;
    item.type = match::question_type(q.tokens);
    item.bucket = match::length_bucket(match::word_count(q.tokens));
    item.candidates = q.candidates.size();
    std::vector<match::GraphInput> graphs;
    for (const auto& c : q.candidates) graphs.push_back(pipe::graph_input(data.store, q.links, c));
    const auto scores = match::score_candidates(model, pipe::question_input(q), graphs);
    if (auto best = match::best_candidate(scores)) item.f1 = q.candidates[*best].f1;
    items.push_back(item);
  }
  const auto report = match::summarize(items);
  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    write_rows(o.out + "/overall.tsv", report.overall);
    write_rows(o.out + "/by_type.tsv", report.by_type);
    write_rows(o.out + "/by_length.tsv", report.by_length);
  }
  std::printf("%-14s %-10s %10s\n", "metric", "bucket", "value");
  for (const auto* rows : {&report.overall, &report.by_type, &report.by_length}) {
    for (const auto& r : *rows) std::printf("%-14s %-10s %10.4f\n", r.metric.c_str(), r.bucket.c_str(), r.value);
  }
  return 0;
}

void print_links(const kb::TripleStore& store, const pipe::PreparedQuestion& q) {
  auto span_text = [&](qg::Span s) {
    std::string t;
    for (int i = s.begin; i < s.end; ++i) t += (t.empty() ? "" : " ") + q.tokens[static_cast<std::size_t>(i)];
    return t;
  };
  for (const auto& e : q.links.entities) {
    std::printf("entity link: \"%s\" -> %s (%.3f)\n", span_text(e.span).c_str(), store.entity_key(e.entity).c_str(), e.score);
  }
  for (const auto& t : q.links.types) {
    std::printf("type link: \"%s\" -> %s (%.3f)\n", span_text(t.span).c_str(), t.label.c_str(), t.score);
  }
  for (const auto& t : q.links.times) {
    const char* op = t.compare.op == qg::CompareOp::kEq ? "==" : t.compare.op == qg::CompareOp::kLt ? "<" : ">";
    std::printf("time link: \"%s\" -> %s %d%s\n", span_text(t.span).c_str(), op, t.year,
                t.year_end ? ("-" + std::to_string(*t.year_end)).c_str() : "");
  }
  for (const auto& l : q.links.ordinals) {
    std::printf("ordinal link: \"%s\" -> %s rank %d\n", span_text(l.span).c_str(),
                l.ordinal.order == qg::SortOrder::kDescending ? "desc" : "asc", l.ordinal.rank);
  }
}

int cmd_explain(const Options& o) {
  require(o.id, "--id");
  std::optional<match::Model> model;
  if (!o.checkpoint.empty()) model = load_model(o);
  Loaded data = load_data(o.data);
  const pipe::PreparedQuestion* q = nullptr;
  for (const auto& p : data.questions) {
    if (p.id == o.id) q = &p;
  }
  if (!q) throw Exit{kUsage, "--id: unknown question '" + o.id + "'"};

  const auto input = pipe::question_input(*q);
  std::printf("question %s: %s\n", q->id.c_str(), q->text.c_str());
  std::string line;
  for (const auto& t : q->tokens) line += (line.empty() ? "" : " ") + t;
  std::printf("tokens: %s\n", line.c_str());
  line.clear();
  for (const auto& t : input.anonymized) line += (line.empty() ? "" : " ") + t;
  std::printf("anonymized: %s\n", line.c_str());
  print_links(data.store, *q);
  std::printf("answer word: %d %s\n", input.answer, q->tree.form(input.answer).c_str());
  for (int f : input.focus) {
    std::printf("sdp: %s\n", dep::render_path(q->tree, dep::sdp(q->tree, input.answer, f)).c_str());
  }
  line.clear();
  for (int i = 1; i <= static_cast<int>(q->tree.size()); ++i) {
    line += (line.empty() ? "" : " ") + q->tree.form(i) + ":" + std::to_string(q->tree.depth(i));
  }
  std::printf("depths: %s\n", line.c_str());
  if (q->candidates.empty()) {
    std::printf("no candidates\n");
    return 0;
  }

  std::vector<match::GraphInput> graphs;
  for (const auto& c : q->candidates) graphs.push_back(pipe::graph_input(data.store, q->links, c));
  std::vector<std::size_t> order(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<match::ScoreBreakdown> scores;
  if (model) {
    scores = match::score_candidates(*model, input, graphs);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a].total > scores[b].total; });
  }
  std::printf("candidates: %zu\n", graphs.size());
  for (std::size_t k = 0; k < std::min<std::size_t>(5, order.size()); ++k) {
    const std::size_t i = order[k];
    std::string sp;
    for (const auto& s : graphs[i].subpaths) sp += (sp.empty() ? "" : " | ") + s;
    std::printf("#%zu score=%s f1=%.3f %s\n    sub-paths: %s\n", k + 1,
                model ? num::format_double(scores[i].total).c_str() : "-", q->candidates[i].f1,
                qg::describe(data.store, q->candidates[i].graph).c_str(), sp.c_str());
  }
  return 0;
}

int cmd_answer(const Options& o) {
  require_file(o.parse, "--parse");
  require_file(o.data.triples, "--triples");
  require_file(o.data.word_emb, "--word-emb");
  match::Model model = load_model(o);
  const auto store = kb::load_triples(o.data.triples);
  const auto words = load_embeddings(o.data.word_emb);
  const auto parsed = dep::read_conllu_file(o.parse);
  if (parsed.sentences.empty()) {
    throw Exit{kUsage, "--parse: no valid sentence" +
                           (parsed.errors.empty() ? std::string() : " (" + parsed.errors[0].message + ")")};
  }
  const auto& sentence = parsed.sentences.front();
  const auto q = pipe::prepare("q", o.question.empty() ? sentence.text : o.question, sentence.tree, {},
                               store, words);
  if (q.candidates.empty()) {
    spdlog::warn("no candidate query graphs for this question");
    return 0;
  }
  std::vector<match::GraphInput> graphs;
  for (const auto& c : q.candidates) graphs.push_back(pipe::graph_input(store, q.links, c));
  const auto scores = match::score_candidates(model, pipe::question_input(q), graphs);
  const auto best = *match::best_candidate(scores);
  spdlog::info("query graph: {}", qg::describe(store, q.candidates[best].graph));
  for (const auto& v : q.candidates[best].answers) std::printf("%s\n", store.render(v).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Knowledge-base question answering with syntax-aware query graph ranking"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key = value file; command line flags win");
  Options o;

  auto* pre = app.add_subcommand("pretrain-edges", "pre-train dependency edge embeddings");
  pre->add_option("--conllu,--corpus", o.data.conllu, "CoNLL-U corpus");
  pre->add_option("--dim", o.dim, "embedding dimension")->capture_default_str();
  pre->add_option("--epochs", o.epochs, "epochs (default 5)");
  pre->add_option("--negatives", o.negatives, "negative samples")->capture_default_str();
  pre->add_option("--lr", o.edge_lr, "initial learning rate")->capture_default_str();
  pre->add_option("--min-count", o.min_count, "minimum lexicalized edge count")->capture_default_str();
  pre->add_option("--seed", o.seed, "random seed")->capture_default_str();
  pre->add_option("--out", o.out, "output embedding file");

  auto* train = app.add_subcommand("train", "train a ranking model");
  add_data_options(train, o.data, true);
  train->add_option("--edge-emb", o.data.edge_emb, "pre-trained edge embeddings (treegru)");
  train->add_option("--flags", o.flags, "syntax encoders: sdp,tpf,treegru (default none)");
  train->add_option("--epochs", o.epochs, "epochs (default 10)");
  train->add_option("--batch", o.batch, "pairs per batch")->capture_default_str();
  train->add_option("--margin", o.margin, "hinge margin")->capture_default_str();
  train->add_option("--dropout", o.dropout, "dropout rate")->capture_default_str();
  train->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--seed", o.seed, "random seed")->capture_default_str();
  train->add_option("--tree-hidden", o.tree_hidden, "Tree-GRU state size")->capture_default_str();
  train->add_option("--pos-dim", o.pos_dim, "depth embedding size")->capture_default_str();
  train->add_option("--out", o.out, "checkpoint path (manifest written next to it)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_data_options(eval, o.data, true);
  eval->add_option("--edge-emb", o.data.edge_emb, "accepted for symmetry; the checkpoint holds edge vectors");
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  eval->add_option("--flags", o.flags, "expected syntax encoders");
  eval->add_option("--out", o.out, "report directory");

  auto* explain = app.add_subcommand("explain", "dump the pipeline for one question");
  add_data_options(explain, o.data, true);
  explain->add_option("--edge-emb", o.data.edge_emb, "unused; the checkpoint holds edge vectors");
  explain->add_option("--id", o.id, "question id");
  explain->add_option("--checkpoint", o.checkpoint, "checkpoint for scores (optional)");
  explain->add_option("--flags", o.flags, "expected syntax encoders");

  auto* answer = app.add_subcommand("answer", "answer one parsed question");
  add_data_options(answer, o.data, false);
  answer->add_option("--edge-emb", o.data.edge_emb, "unused; the checkpoint holds edge vectors");
  answer->add_option("--parse", o.parse, "CoNLL-U file with the question's parse");
  answer->add_option("--question", o.question, "question text (display only)");
  answer->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  answer->add_option("--flags", o.flags, "expected syntax encoders");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*pre) return cmd_pretrain(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*explain) return cmd_explain(o);
    if (*answer) return cmd_answer(o);
  } catch (const Exit& e) {
    spdlog::error("{}", e.message);
    return e.code;
  } catch (const synkbqa::Error& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  }
  return kUsage;
}
