// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any criterion fails. Pass criterion numbers to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"
#include "tiny_model.hpp"
#include "toy.hpp"
#include "synkbqa/edgevec.hpp"
#include "synkbqa/error.hpp"

using namespace synkbqa;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- trees

std::vector<dep::DepTree> random_trees(std::size_t count, std::uint64_t seed) {
  num::Rng rng(seed);
  std::vector<dep::DepTree> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(fixture::random_tree(1 + rng() % 9, rng));
  return out;
}

Outcome sdp_oracle() {
  const auto start = Clock::now();
  std::size_t pairs = 0, bad = 0;
  for (const auto& t : random_trees(1000, 101)) {
    const int n = static_cast<int>(t.size());
    for (int a = 1; a <= n; ++a) {
      for (int b = 1; b <= n; ++b) {
        ++pairs;
        const auto p = dep::sdp(t, a, b);
        const auto want = fixture::bfs_path(t, a, b);
        bool ok = p.nodes == want && p.edges.size() + 1 == p.nodes.size();
        for (std::size_t k = 0; ok && k + 1 < p.nodes.size(); ++k) {
          const int x = p.nodes[k], y = p.nodes[k + 1];
          const bool up = t.head(x) == y;
          ok = p.edges[k].step == (up ? dep::Step::kUp : dep::Step::kDown) &&
               p.edges[k].label == t.token(up ? x : y).deprel;
        }
        bad += !ok;
      }
    }
  }
  const double s = seconds_since(start);
  return {bad == 0 && s < 10, fmt("%zu pairs, %zu mismatches, %.2fs", pairs, bad, s)};
}

Outcome tpf_oracle() {
  std::size_t nodes = 0, bad = 0;
  for (const auto& t : random_trees(1000, 202)) {
    for (int i = 1; i <= static_cast<int>(t.size()); ++i) {
      ++nodes;
      bad += t.depth(i) != fixture::bfs_depth(t, i);
    }
  }
  return {bad == 0, fmt("%zu nodes, %zu mismatches", nodes, bad)};
}

// ---------------------------------------------------------------- gradients

Outcome gradient_check() {
  const auto start = Clock::now();
  match::Model m(fixture::tiny_config(true), fixture::tiny_keys(true), 11);
  const auto q = fixture::tiny_question();
  const auto graphs = fixture::tiny_graphs();
  const auto r = fixture::check_gradients(m.params(), [&](bool backward) {
    return fixture::tiny_loss(m, q, graphs, backward);
  });
  const double s = seconds_since(start);
  return {r.max_rel_error <= 1e-4 && s < 60,
          fmt("%zu entries, max relative error %.3g at %s, %.1fs", r.entries, r.max_rel_error, r.worst.c_str(), s)};
}

// ---------------------------------------------------------------- hinge

// Error-free sum: a + b == s + e exactly.
std::pair<double, double> two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

Outcome hinge_check() {
  num::Rng rng(404);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::size_t bad_value = 0, bad_zero = 0;
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const double pos = u(rng);
    const double neg = i % 4 == 0 ? pos - 0.5 : u(rng);
    const double got = match::hinge_loss(pos, neg, 0.5);
    // exact (neg + 0.5) - pos as an unevaluated sum hi + lo
    const auto [s, e1] = two_sum(neg, 0.5);
    const auto [t, e2] = two_sum(s, -pos);
    const double exact = std::max(0.0, t + (e1 + e2));
    const double err = std::abs(got - exact);
    worst = std::max(worst, err);
    bad_value += err > 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(exact));
    bad_zero += (got == 0.0) != (pos >= neg + 0.5);
  }
  return {bad_value == 0 && bad_zero == 0,
          fmt("10000 pairs, %zu value mismatches (worst %.3g), %zu zero/margin mismatches", bad_value, worst,
              bad_zero)};
}

// ---------------------------------------------------------------- candidates

Outcome candidate_completeness() {
  const auto& s = fixture::toy().store;
  std::size_t questions = 0, differ = 0, perfect = 0;
  for (const auto* set : {&fixture::toy_train(), &fixture::toy_test()}) {
    for (const auto& q : *set) {
      ++questions;
      std::set<std::string> got;
      for (const auto& g : qg::generate_candidates(s, q.links)) got.insert(qg::structural_key(s, g));
      differ += got != fixture::brute_force_candidates(s, q.links);
      perfect += std::any_of(q.candidates.begin(), q.candidates.end(), [](const auto& c) { return c.f1 == 1.0; });
    }
  }
  const double rate = static_cast<double>(perfect) / static_cast<double>(questions);
  return {differ == 0 && rate >= 0.95,
          fmt("%zu questions, %zu differ from brute force, %.1f%% with an f1=1 candidate", questions, differ,
              100 * rate)};
}

// ---------------------------------------------------------------- training

struct Setup {
  std::string flags;
  std::uint64_t seed = 42;
  int epochs = 30;
  std::size_t tree_hidden = 25;
  const EmbeddingTable* edges = nullptr;
};

std::vector<match::TrainQuestion> train_views() {
  std::vector<match::TrainQuestion> out;
  for (const auto& q : fixture::toy_train()) out.push_back(pipe::train_question(fixture::toy().store, q));
  return out;
}

match::Model train_model(const Setup& setup) {
  const auto& t = fixture::toy();
  match::ModelConfig c;
  c.set_flags(setup.flags);
  c.word_dim = t.words.dim();
  c.hidden = t.words.dim() / 2;
  c.tree_hidden = setup.tree_hidden;
  if (setup.edges) c.edge_dim = setup.edges->dim();
  match::Model m(c, pipe::collect_keys(t.store, fixture::toy_train(), t.words, setup.edges), setup.seed);
  m.set_word_vectors(t.words);
  if (setup.edges) m.set_edge_vectors(*setup.edges);
  match::TrainConfig tc;
  tc.epochs = setup.epochs;
  tc.seed = setup.seed;
  static const auto views = train_views();
  match::train(m, views, tc);
  return m;
}

match::EvalReport evaluate(match::Model& m, const std::vector<pipe::PreparedQuestion>& qs) {
  const auto& s = fixture::toy().store;
  std::vector<match::EvalItem> items;
  for (const auto& q : qs) {
    match::EvalItem item;
    item.id = q.id;
    item.type = match::question_type(q.tokens);
    item.bucket = match::length_bucket(match::word_count(q.tokens));
    item.candidates = q.candidates.size();
    std::vector<match::GraphInput> graphs;
    for (const auto& c : q.candidates) graphs.push_back(pipe::graph_input(s, q.links, c));
    if (auto best = match::best_candidate(match::score_candidates(m, pipe::question_input(q), graphs))) {
      item.f1 = q.candidates[*best].f1;
    }
    items.push_back(item);
  }
  return match::summarize(items);
}

double mean_f1(match::Model& m) { return evaluate(m, fixture::toy_test()).overall.at(0).value; }

const EmbeddingTable& toy_edges() {
  static const EmbeddingTable table = [] {
    std::vector<dep::DepTree> corpus;
    for (const auto& s : fixture::toy().parses) corpus.push_back(s.tree);
    const auto vocab = edgevec::EdgeVocab::build(corpus, 2);
    edgevec::SkipGramConfig cfg;
    cfg.dim = 50;
    cfg.epochs = 5;
    cfg.seed = 1;
    return edgevec::train_skipgram(edgevec::training_pairs(corpus, vocab), vocab, cfg).embeddings;
  }();
  return table;
}

Outcome que_training() {
  const auto start = Clock::now();
  auto m = train_model({"none", 42, 30});
  const double f1 = mean_f1(m);
  const double s = seconds_since(start);
  return {f1 >= 0.85 && s < 300, fmt("held-out mean F1 %.4f after 30 epochs, %.1fs", f1, s)};
}

Outcome syntax_effect() {
  const auto start = Clock::now();
  double base = 0, syntax = 0;
  std::string per_seed;
  for (std::uint64_t seed : {41, 42, 43}) {
    auto a = train_model({"none", seed, 30});
    auto b = train_model({"sdp,treegru", seed, 30, 25, &toy_edges()});
    const double fa = mean_f1(a), fb = mean_f1(b);
    base += fa / 3;
    syntax += fb / 3;
    per_seed += fmt(" seed %llu %.3f/%.3f;", static_cast<unsigned long long>(seed), fa, fb);
  }
  return {syntax >= base, fmt("mean F1 QUE %.4f, QUE+SDP+Tree-GRU %.4f (%s ) %.0fs", base, syntax,
                              per_seed.c_str(), seconds_since(start))};
}

// ---------------------------------------------------------------- edges

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

Outcome edge_pretraining() {
  const auto corpus = fixture::shared_context_corpus(4, 3, 20);
  const auto vocab = edgevec::EdgeVocab::build(corpus.trees, 1);
  const auto pairs = edgevec::training_pairs(corpus.trees, vocab);
  double margin = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    edgevec::SkipGramConfig cfg;
    cfg.dim = 50;
    cfg.epochs = 20;
    cfg.seed = seed;
    const auto r = edgevec::train_skipgram(pairs, vocab, cfg);
    auto row = [&](const std::string& k) { return r.embeddings.row(*r.embeddings.find(k)); };
    double same = 0, cross = 0;
    std::size_t ns = 0, nc = 0;
    const auto& g = corpus.groups;
    for (std::size_t a = 0; a < g.size(); ++a) {
      for (std::size_t b = a; b < g.size(); ++b) {
        for (std::size_t i = 0; i < g[a].size(); ++i) {
          for (std::size_t j = a == b ? i + 1 : 0; j < g[b].size(); ++j) {
            const double c = cosine(row(g[a][i]), row(g[b][j]));
            if (a == b) {
              same += c;
              ++ns;
            } else {
              cross += c;
              ++nc;
            }
          }
        }
      }
    }
    const double m = same / static_cast<double>(ns) - cross / static_cast<double>(nc);
    per_seed += fmt(" %.3f", m);
    margin += m / 5;
  }
  return {margin > 0.2, fmt("mean cosine margin %.4f (per seed:%s)", margin, per_seed.c_str())};
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(SYNKBQA_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Trains twice and evaluates each checkpoint twice through the CLI.
Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "synkbqa_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = " --triples " + fixture::toy_file("triples.tsv") + " --conllu " +
                           fixture::toy_file("questions.conllu") + " --word-emb " +
                           fixture::toy_file("words.txt");
  const auto edges = (dir / "edges.txt").string();
  if (run("pretrain-edges --conllu " + fixture::toy_file("questions.conllu") + " --dim 16 --epochs 2 --out " +
          edges) != 0) {
    return {false, "pretrain-edges failed"};
  }
  bool same = true;
  std::string detail;
  for (const std::string flags : {"none", "sdp,tpf,treegru"}) {
    const std::string train = "train" + data + " --dataset " + fixture::toy_file("train.tsv") + " --flags " +
                              flags + " --edge-emb " + edges + " --epochs 2 --seed 9 --tree-hidden 25 --out ";
    const std::string tag = flags == "none" ? "que" : "syntax";
    const auto ca = (dir / (tag + "-a.txt")).string();
    const auto cb = (dir / (tag + "-b.txt")).string();
    if (run(train + ca) != 0 || run(train + cb) != 0) return {false, tag + ": train failed"};
    const bool ck = slurp(ca) == slurp(cb) && slurp(ca + ".manifest") == slurp(cb + ".manifest");
    std::vector<std::string> reports;
    for (const auto& [ck_path, out] : {std::pair{ca, "r1"}, {ca, "r2"}, {cb, "r3"}}) {
      const auto rdir = dir / (tag + out);
      if (run("eval" + data + " --dataset " + fixture::toy_file("test.tsv") + " --checkpoint " + ck_path +
              " --out " + rdir.string()) != 0) {
        return {false, tag + ": eval failed"};
      }
      reports.push_back(slurp(rdir / "overall.tsv") + slurp(rdir / "by_type.tsv") + slurp(rdir / "by_length.tsv"));
    }
    const bool rep = reports[0] == reports[1] && reports[0] == reports[2] && !reports[0].empty();
    same = same && ck && rep && !slurp(ca).empty();
    detail += fmt("%s: checkpoints %s, reports %s; ", tag.c_str(), ck ? "identical" : "DIFFER",
                  rep ? "identical" : "DIFFER");
  }
  fs::remove_all(dir);
  return {same, detail};
}

// ---------------------------------------------------------------- permutations

std::vector<double> values(const num::Tape& t, num::Var v) {
  const auto s = t.value(v);
  return {s.begin(), s.end()};
}

Outcome permutation_invariance() {
  match::ModelConfig c;
  c.word_dim = 50;
  c.hidden = 25;
  c.sdp = true;
  const auto& t = fixture::toy();
  match::Model m(c, pipe::collect_keys(t.store, fixture::toy_train(), t.words, nullptr), 5);
  num::Rng rng(77);

  // Longest sub-path list among the training candidates.
  match::GraphInput graph;
  for (const auto& q : fixture::toy_train()) {
    for (const auto& cand : q.candidates) {
      auto gi = pipe::graph_input(t.store, q.links, cand);
      if (gi.subpaths.size() > graph.subpaths.size()) graph = gi;
    }
  }
  std::size_t graph_bad = 0;
  {
    num::Tape tape;
    const auto base = values(tape, m.encode_graph(tape, graph));
    for (int k = 0; k < 1000; ++k) {
      auto g = graph;
      std::shuffle(g.subpaths.begin(), g.subpaths.end(), rng);
      graph_bad += values(tape, m.encode_graph(tape, g)) != base;
    }
  }

  // Question with the most focus words.
  match::QuestionInput question;
  for (const auto& q : fixture::toy_train()) {
    auto qi = pipe::question_input(q);
    if (qi.focus.size() > question.focus.size()) question = qi;
  }
  auto& ps = m.params();
  const enc::SdpTables tables{&ps.at("emb.word"), &m.words(), &ps.at("emb.label"), &m.labels()};
  const auto fw = enc::bind_gru(ps, "sdp.fw");
  const auto bw = enc::bind_gru(ps, "sdp.bw");
  std::size_t sdp_bad = 0;
  {
    num::Tape tape;
    auto encode = [&](std::span<const int> focus) {
      return values(tape, *enc::encode_sdp(tape, question.tree, question.answer, focus, question.masked, tables,
                                           fw, bw));
    };
    const auto base = encode(question.focus);
    auto focus = question.focus;
    for (int k = 0; k < 1000; ++k) {
      std::shuffle(focus.begin(), focus.end(), rng);
      sdp_bad += encode(focus) != base;
    }
  }
  return {graph_bad == 0 && sdp_bad == 0 && graph.subpaths.size() > 1 && question.focus.size() > 1,
          fmt("graph with %zu sub-paths: %zu differ; sdp with %zu foci: %zu differ", graph.subpaths.size(),
              graph_bad, question.focus.size(), sdp_bad)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"shortest dependency path equals BFS path", sdp_oracle},
      {"tree depth equals BFS distance from root", tpf_oracle},
      {"composed loss gradient check", gradient_check},
      {"hinge loss exact and zero iff margin met", hinge_check},
      {"candidate generation complete", candidate_completeness},
      {"base encoder training reaches F1 >= 0.85", que_training},
      {"syntax encoders do not hurt F1", syntax_effect},
      {"edge pretraining separates shared contexts", edge_pretraining},
      {"training and evaluation are deterministic", determinism},
      {"encodings invariant to permutation", permutation_invariance},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
