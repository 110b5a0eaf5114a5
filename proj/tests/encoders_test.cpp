#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "synkbqa/encoders.hpp"
#include "synkbqa/error.hpp"

using namespace synkbqa;
using num::Tape;
using num::Tensor;
using num::Var;
using fixture::tree_of;

namespace {

std::vector<double> values(const Tape& t, Var v) {
  const auto s = t.value(v);
  return {s.begin(), s.end()};
}

std::vector<Var> random_inputs(Tape& tape, std::size_t n, std::size_t dim, num::Rng& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Var> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    for (double& v : x) v = u(rng);
    out.push_back(tape.constant(std::move(x)));
  }
  return out;
}

void enable_all(num::ParamStore& ps) {
  for (auto& [name, p] : ps) p.enable_grad();
}

qg::FocusLinks diana_links() {
  qg::FocusLinks l;
  l.entities.push_back({{3, 4}, 0, 1.0});
  return l;
}

double sig(double x) { return 1 / (1 + std::exp(-x)); }

// Scalar Tree-GRU cell; g holds (w, u, v, b) for rl, rr, zl, zr, z, h.
double scalar_cell(const std::array<std::array<double, 4>, 6>& g, double l, double left, double right) {
  auto in = [&](int k, double a, double b) { return g[k][0] * l + g[k][1] * a + g[k][2] * b + g[k][3]; };
  const double rl = sig(in(0, left, right)), rr = sig(in(1, left, right));
  const double zl = sig(in(2, left, right)), zr = sig(in(3, left, right)), z = sig(in(4, left, right));
  const double cand = std::tanh(in(5, rl * left, rr * right));
  return zl * left + zr * right + z * cand;
}

}  // namespace

TEST(Anonymize, Examples) {
  const std::vector<std::string> q{"what", "movies", "did", "Diana", "play", "in", "?"};
  EXPECT_EQ(enc::anonymize(q, diana_links()),
            (std::vector<std::string>{"what", "movies", "did", "<E>", "play", "in", "?"}));
  const std::vector<std::string> ny{"films", "shot", "in", "New", "York", "in", "1999"};
  qg::FocusLinks l;
  l.entities.push_back({{3, 5}, 0, 1.0});
  l.entities.push_back({{4, 5}, 1, 1.0});
  l.times.push_back({{6, 7}, {}, 1999, {}});
  EXPECT_EQ(enc::anonymize(ny, l), (std::vector<std::string>{"films", "shot", "in", "<E>", "in", "<Tm>"}));
  EXPECT_EQ(enc::mask_tokens(ny, l),
            (std::vector<std::string>{"films", "shot", "in", "<E>", "<E>", "in", "<Tm>"}));
  EXPECT_EQ(enc::anonymize(ny, {}), enc::mask_tokens(ny, {}));
}

TEST(Anonymize, FocusWordsAreSpanHeads) {
  const auto t = fixture::question_tree();
  EXPECT_EQ(enc::span_head(t, {3, 4}), 4);
  EXPECT_EQ(enc::span_head(t, {1, 5}), 5);
  EXPECT_EQ(enc::span_head(t, {0, 2}), 2);
  EXPECT_THROW(enc::span_head(t, {6, 8}), Error);
  auto l = diana_links();
  l.types.push_back({{1, 2}, "film", 0.9});
  l.types.push_back({{3, 4}, "actor", 0.2});
  EXPECT_EQ(enc::focus_words(t, l), (std::vector<int>{4, 2}));
}

TEST(Vocabulary, UnknownFallback) {
  enc::Vocabulary v({"a", "b"});
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.keys().back(), "<unk>");
  EXPECT_EQ(v.id("b"), 1u);
  EXPECT_EQ(v.id("zzz"), v.unk());
  enc::Vocabulary w({"<unk>", "a"});
  EXPECT_EQ(w.unk(), 0u);
  EXPECT_EQ(w.size(), 2u);
  EXPECT_THROW(enc::Vocabulary({"a", "a"}), Error);
}

TEST(BiGru, ZeroParametersGiveZeroState) {
  num::ParamStore ps;
  num::Rng rng(1);
  auto fw = enc::add_gru(ps, "fw", 3, 4, rng);
  auto bw = enc::add_gru(ps, "bw", 3, 4, rng);
  for (auto& [name, p] : ps) std::fill(p.data().begin(), p.data().end(), 0.0);
  Tape tape;
  const auto xs = random_inputs(tape, 5, 3, rng);
  const Var h = enc::bigru_encode(tape, xs, fw, bw);
  EXPECT_EQ(tape.shape(h), (num::Shape{8}));
  for (double v : tape.value(h)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(enc::bigru_encode(tape, {}, fw, bw), Error);
}

TEST(BiGru, StepMatchesScalarFormula) {
  num::ParamStore ps;
  num::Rng rng(2);
  auto p = enc::add_gru(ps, "g", 1, 1, rng);
  ps.at("g.bz")[0] = 0.3;
  ps.at("g.br")[0] = -0.2;
  ps.at("g.bn")[0] = 0.1;
  Tape tape;
  const double x = 0.7, h = -0.4;
  const Var out = enc::gru_step(tape, p, tape.constant({x}), tape.constant({h}));
  auto w = [&](const char* n) { return ps.at(std::string("g.") + n)[0]; };
  const double z = sig(w("wz") * x + w("uz") * h + w("bz"));
  const double r = sig(w("wr") * x + w("ur") * h + w("br"));
  const double n = std::tanh(w("wn") * x + w("un") * (r * h) + w("bn"));
  EXPECT_NEAR(tape.scalar(out), (1 - z) * n + z * h, 1e-15);
}

TEST(BiGru, GradientMatchesFiniteDifferences) {
  num::ParamStore ps;
  num::Rng rng(3);
  auto fw = enc::add_gru(ps, "fw", 3, 2, rng);
  auto bw = enc::add_gru(ps, "bw", 3, 2, rng);
  for (auto& [name, p] : ps) {
    for (double& v : p.data()) v += 0.1;  // nonzero biases too
  }
  enable_all(ps);
  num::Rng data(4);
  Tape probe;
  std::vector<std::vector<double>> xs;
  for (Var v : random_inputs(probe, 4, 3, data)) xs.push_back(values(probe, v));
  auto loss = [&](bool backward) {
    Tape tape;
    std::vector<Var> in;
    for (const auto& x : xs) in.push_back(tape.constant(x));
    const Var h = enc::bigru_encode(tape, in, fw, bw);
    const Var l = tape.dot(h, h);
    if (backward) tape.backward(l);
    return tape.scalar(l);
  };
  const auto r = fixture::check_gradients(ps, loss);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(TreeGru, ScalarOracle) {
  num::ParamStore ps;
  num::Rng rng(5);
  auto up = enc::add_tree_gru(ps, "up", 1, 1, rng);
  auto down = enc::add_tree_gru(ps, "down", 1, 1, rng);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& [name, p] : ps) p[0] = u(rng);
  auto gates = [&](const std::string& prefix) {
    std::array<std::array<double, 4>, 6> g{};
    const char* names[] = {"rl", "rr", "zl", "zr", "z", "h"};
    for (int k = 0; k < 6; ++k) {
      for (int j = 0; j < 4; ++j) g[k][j] = ps.at(prefix + "." + names[k] + "." + "wuvb"[j])[0];
    }
    return g;
  };
  // 1 <- 2 -> 3, 3 -> 4
  const auto tree = tree_of({{"a", 2, "x"}, {"b", 0, "root"}, {"c", 2, "y"}, {"d", 3, "z"}});
  const double l[] = {0.5, -0.3, 0.8, 0.1};
  Tape tape;
  std::vector<Var> edges;
  for (double v : l) edges.push_back(tape.constant({v}));
  const auto hu = enc::tree_gru_pass(tape, tree, edges, up, enc::TreeDirection::kBottomUp);
  const auto hd = enc::tree_gru_pass(tape, tree, edges, down, enc::TreeDirection::kTopDown);

  const auto gu = gates("up");
  const double u1 = scalar_cell(gu, l[0], 0, 0);
  const double u4 = scalar_cell(gu, l[3], 0, 0);
  const double u3 = scalar_cell(gu, l[2], 0, u4);
  const double u2 = scalar_cell(gu, l[1], u1, u3);
  EXPECT_NEAR(tape.scalar(hu[0]), u1, 1e-14);
  EXPECT_NEAR(tape.scalar(hu[1]), u2, 1e-14);
  EXPECT_NEAR(tape.scalar(hu[2]), u3, 1e-14);
  EXPECT_NEAR(tape.scalar(hu[3]), u4, 1e-14);

  const auto gd = gates("down");
  const double d2 = scalar_cell(gd, l[1], 0, 0);
  const double d1 = scalar_cell(gd, l[0], 0, d2);
  const double d3 = scalar_cell(gd, l[2], d2, 0);
  const double d4 = scalar_cell(gd, l[3], d3, 0);
  EXPECT_NEAR(tape.scalar(hd[0]), d1, 1e-14);
  EXPECT_NEAR(tape.scalar(hd[1]), d2, 1e-14);
  EXPECT_NEAR(tape.scalar(hd[2]), d3, 1e-14);
  EXPECT_NEAR(tape.scalar(hd[3]), d4, 1e-14);
}

TEST(TreeGru, ZeroParametersAndSingleNode) {
  num::ParamStore ps;
  num::Rng rng(6);
  auto p = enc::add_tree_gru(ps, "t", 3, 4, rng);
  const auto single = tree_of({{"only", 0, "root"}});
  Tape tape;
  const auto e = random_inputs(tape, 1, 3, rng);
  for (auto dir : {enc::TreeDirection::kBottomUp, enc::TreeDirection::kTopDown}) {
    const auto h = enc::tree_gru_pass(tape, single, e, p, dir);
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(tape.shape(h[0]), (num::Shape{4}));
  }
  const auto up = enc::tree_gru_pass(tape, single, e, p, enc::TreeDirection::kBottomUp);
  const auto down = enc::tree_gru_pass(tape, single, e, p, enc::TreeDirection::kTopDown);
  EXPECT_EQ(values(tape, up[0]), values(tape, down[0]));

  for (auto& [name, t] : ps) std::fill(t.data().begin(), t.data().end(), 0.0);
  const auto tree = fixture::question_tree();
  const auto edges = random_inputs(tape, tree.size(), 3, rng);
  for (Var h : enc::tree_gru_pass(tape, tree, edges, p, enc::TreeDirection::kBottomUp)) {
    for (double v : tape.value(h)) EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(enc::tree_gru_pass(tape, tree, e, p, enc::TreeDirection::kBottomUp), Error);
}

TEST(TreeGru, StatesDependOnlyOnTheirScope) {
  // Bottom-up state of a node depends on its subtree; top-down on its spine.
  num::Rng rng(7);
  num::ParamStore ps;
  auto p = enc::add_tree_gru(ps, "t", 3, 4, rng);
  for (int trial = 0; trial < 30; ++trial) {
    const auto tree = fixture::random_tree(2 + rng() % 8, rng);
    const std::size_t n = tree.size();
    Tape tape;
    auto edges = random_inputs(tape, n, 3, rng);
    const auto up = enc::tree_gru_pass(tape, tree, edges, p, enc::TreeDirection::kBottomUp);
    const auto down = enc::tree_gru_pass(tape, tree, edges, p, enc::TreeDirection::kTopDown);
    const int changed = 1 + static_cast<int>(rng() % n);
    auto moved = edges;
    moved[changed - 1] = tape.constant(std::vector<double>{9, -9, 9});
    const auto up2 = enc::tree_gru_pass(tape, tree, moved, p, enc::TreeDirection::kBottomUp);
    const auto down2 = enc::tree_gru_pass(tape, tree, moved, p, enc::TreeDirection::kTopDown);
    for (int i = 1; i <= static_cast<int>(n); ++i) {
      bool in_subtree = false;  // changed is i or below i
      for (int a = changed; a != 0; a = tree.head(a)) in_subtree = in_subtree || a == i;
      bool on_spine = false;  // changed is i or above i
      for (int a = i; a != 0; a = tree.head(a)) on_spine = on_spine || a == changed;
      if (!in_subtree) EXPECT_EQ(values(tape, up[i - 1]), values(tape, up2[i - 1]));
      if (!on_spine) EXPECT_EQ(values(tape, down[i - 1]), values(tape, down2[i - 1]));
      if (i == changed) {
        EXPECT_NE(values(tape, up[i - 1]), values(tape, up2[i - 1]));
        EXPECT_NE(values(tape, down[i - 1]), values(tape, down2[i - 1]));
      }
    }
  }
}

TEST(SdpEncoder, EncodesPathTokensAndIgnoresFocusOrder) {
  num::Rng rng(8);
  num::ParamStore ps;
  const enc::Vocabulary wv({"what", "movies", "did", "<E>", "play", "in", "?"});
  const enc::Vocabulary lv({"det", "dobj", "aux", "nsubj", "root", "prep", "punct"});
  ps.add("w", num::xavier_uniform({wv.size(), 4}, rng));
  ps.add("l", num::xavier_uniform({lv.size(), 4}, rng));
  auto fw = enc::add_gru(ps, "fw", 4, 3, rng);
  auto bw = enc::add_gru(ps, "bw", 4, 3, rng);
  const enc::SdpTables tables{&ps.at("w"), &wv, &ps.at("l"), &lv};
  const auto tree = fixture::question_tree();
  const auto words = enc::mask_tokens(
      std::vector<std::string>{"what", "movies", "did", "Diana", "play", "in", "?"}, diana_links());

  Tape tape;
  const std::vector<int> focus{4};
  const auto got = enc::encode_sdp(tape, tree, 1, focus, words, tables, fw, bw);
  ASSERT_TRUE(got);
  // what -det-> movies -dobj-> play -nsubj-> <E>
  std::vector<Var> seq;
  for (const auto& [table, vocab, key] :
       std::vector<std::tuple<const char*, const enc::Vocabulary*, const char*>>{
           {"w", &wv, "what"}, {"l", &lv, "det"},   {"w", &wv, "movies"}, {"l", &lv, "dobj"},
           {"w", &wv, "play"}, {"l", &lv, "nsubj"}, {"w", &wv, "<E>"}}) {
    seq.push_back(tape.row(ps.at(table), vocab->id(key)));
  }
  EXPECT_EQ(values(tape, *got), values(tape, enc::bigru_encode(tape, seq, fw, bw)));
  EXPECT_FALSE(enc::encode_sdp(tape, tree, 1, {}, words, tables, fw, bw));

  std::vector<int> many{4, 6, 7, 3};
  const auto base = values(tape, *enc::encode_sdp(tape, tree, 1, many, words, tables, fw, bw));
  for (int k = 0; k < 20; ++k) {
    std::shuffle(many.begin(), many.end(), rng);
    EXPECT_EQ(values(tape, *enc::encode_sdp(tape, tree, 1, many, words, tables, fw, bw)), base);
  }
}

TEST(Tpf, DepthRows) {
  EXPECT_EQ(enc::position_row(0, 4), 0u);
  EXPECT_EQ(enc::position_row(4, 4), 4u);
  EXPECT_EQ(enc::position_row(5, 4), 5u);
  EXPECT_EQ(enc::position_row(50, 4), 5u);
  EXPECT_THROW(enc::position_row(-1, 4), Error);

  num::Rng rng(9);
  num::ParamStore ps;
  ps.add("pos", num::xavier_uniform({4, 2}, rng));
  auto fw = enc::add_gru(ps, "fw", 5, 2, rng);
  auto bw = enc::add_gru(ps, "bw", 5, 2, rng);
  const auto tree = fixture::question_tree();
  Tape tape;
  const auto words = random_inputs(tape, tree.size(), 3, rng);
  const Var got = enc::encode_tpf(tape, tree, words, ps.at("pos"), 2, fw, bw);
  std::vector<Var> seq;
  for (int i = 1; i <= static_cast<int>(tree.size()); ++i) {
    const Var parts[] = {words[i - 1], tape.row(ps.at("pos"), std::min(fixture::bfs_depth(tree, i), 3))};
    seq.push_back(tape.concat(parts));
  }
  EXPECT_EQ(values(tape, got), values(tape, enc::bigru_encode(tape, seq, fw, bw)));
  EXPECT_THROW(enc::encode_tpf(tape, tree, std::span(words).first(3), ps.at("pos"), 2, fw, bw), Error);
}

TEST(Combine, SumOfParts) {
  Tape tape;
  const Var q = tape.constant({1.0, 2.0});
  const Var a = tape.constant({0.5, -1.0});
  const Var b = tape.constant({-2.0, 4.0});
  EXPECT_EQ(values(tape, enc::combine(tape, q, {})), (std::vector<double>{1.0, 2.0}));
  const Var ab[] = {a, b};
  const Var ba[] = {b, a};
  EXPECT_EQ(values(tape, enc::combine(tape, q, ab)), (std::vector<double>{-0.5, 5.0}));
  EXPECT_EQ(values(tape, enc::combine(tape, q, ab)), values(tape, enc::combine(tape, q, ba)));
  const Var bad[] = {tape.constant({1.0})};
  EXPECT_THROW(enc::combine(tape, q, bad), Error);
}
