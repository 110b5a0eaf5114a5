#include "synkbqa/encoders.hpp"

#include <algorithm>

#include "synkbqa/error.hpp"
#include "synkbqa/numcore/init.hpp"

namespace synkbqa::enc {

using num::Tape;
using num::Tensor;
using num::Var;

Vocabulary::Vocabulary(std::vector<std::string> keys) : keys_(std::move(keys)) {
  if (std::find(keys_.begin(), keys_.end(), kUnk) == keys_.end()) keys_.emplace_back(kUnk);
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (!index_.emplace(keys_[i], i).second) throw Error("vocabulary: duplicate key '" + keys_[i] + "'");
  }
  unk_ = index_.at(std::string(kUnk));
}

std::optional<std::size_t> Vocabulary::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

struct Masked {
  qg::Span span;
  std::string_view token;
};

std::vector<Masked> mask_spans(const qg::FocusLinks& links) {
  std::vector<Masked> all;
  for (const auto& e : links.entities) all.push_back({e.span, kEntityMask});
  for (const auto& t : links.times) all.push_back({t.span, kTimeMask});
  std::stable_sort(all.begin(), all.end(), [](const Masked& a, const Masked& b) {
    if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
    return a.span.begin < b.span.begin;
  });
  std::vector<Masked> kept;
  for (const Masked& m : all) {
    if (std::none_of(kept.begin(), kept.end(), [&](const Masked& k) { return k.span.overlaps(m.span); })) {
      kept.push_back(m);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const Masked& a, const Masked& b) { return a.span.begin < b.span.begin; });
  return kept;
}

Var zeros(Tape& tape, std::size_t n) { return tape.constant(std::vector<double>(n, 0.0)); }

Var affine(Tape& tape, Tensor& w, Var x, Tensor& u, Var h, Tensor& b) {
  return tape.add(tape.add(tape.matmul(tape.param(w), x), tape.matmul(tape.param(u), h)), tape.param(b));
}

Var gate_input(Tape& tape, const TreeGate& g, Var l, Var left, Var right) {
  Var s = tape.add(tape.matmul(tape.param(*g.w), l), tape.matmul(tape.param(*g.u), left));
  return tape.add(tape.add(s, tape.matmul(tape.param(*g.v), right)), tape.param(*g.b));
}

Var tree_cell(Tape& tape, const TreeGruParams& p, Var l, Var left, Var right) {
  Var rl = tape.sigmoid(gate_input(tape, p.reset_left, l, left, right));
  Var rr = tape.sigmoid(gate_input(tape, p.reset_right, l, left, right));
  Var zl = tape.sigmoid(gate_input(tape, p.update_left, l, left, right));
  Var zr = tape.sigmoid(gate_input(tape, p.update_right, l, left, right));
  Var z = tape.sigmoid(gate_input(tape, p.update, l, left, right));
  Var cand = tape.tanh(gate_input(tape, p.candidate, l, tape.mul(rl, left), tape.mul(rr, right)));
  Var h = tape.add(tape.mul(zl, left), tape.mul(zr, right));
  return tape.add(h, tape.mul(z, cand));
}

}  // namespace

std::vector<std::string> anonymize(std::span<const std::string> tokens,
                                   const qg::FocusLinks& links) {
  std::vector<std::string> out;
  const auto spans = mask_spans(links);
  std::size_t next = 0;
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    if (next < spans.size() && spans[next].span.begin == i) {
      out.emplace_back(spans[next].token);
      i = spans[next].span.end - 1;
      ++next;
      continue;
    }
    out.push_back(dep::to_lower(tokens[i]));
  }
  return out;
}

std::vector<std::string> mask_tokens(std::span<const std::string> tokens,
                                     const qg::FocusLinks& links) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(dep::to_lower(t));
  for (const Masked& m : mask_spans(links)) {
    for (int i = m.span.begin; i < m.span.end && i < static_cast<int>(out.size()); ++i) {
      out[i] = std::string(m.token);
    }
  }
  return out;
}

int span_head(const dep::DepTree& tree, qg::Span span) {
  if (span.begin < 0 || span.end > static_cast<int>(tree.size()) || span.length() <= 0) {
    throw Error("span outside the tree");
  }
  int best = span.begin + 1;
  for (int i = span.begin + 1; i <= span.end; ++i) {
    if (tree.depth(i) < tree.depth(best)) best = i;
  }
  return best;
}

std::vector<int> focus_words(const dep::DepTree& tree, const qg::FocusLinks& links) {
  std::vector<int> out;
  auto add = [&](qg::Span s) {
    const int h = span_head(tree, s);
    if (std::find(out.begin(), out.end(), h) == out.end()) out.push_back(h);
  };
  for (const auto& l : links.entities) add(l.span);
  for (const auto& l : links.types) add(l.span);
  for (const auto& l : links.times) add(l.span);
  for (const auto& l : links.ordinals) add(l.span);
  return out;
}

GruParams add_gru(num::ParamStore& store, const std::string& prefix, std::size_t input,
                  std::size_t hidden, num::Rng& rng) {
  for (const char* g : {"z", "r", "n"}) {
    store.add(prefix + ".w" + g, num::xavier_uniform({hidden, input}, rng));
    store.add(prefix + ".u" + g, num::xavier_uniform({hidden, hidden}, rng));
    store.add(prefix + ".b" + g, Tensor({hidden}));
  }
  return bind_gru(store, prefix);
}

GruParams bind_gru(num::ParamStore& store, const std::string& prefix) {
  GruParams p;
  p.wz = &store.at(prefix + ".wz");
  p.uz = &store.at(prefix + ".uz");
  p.bz = &store.at(prefix + ".bz");
  p.wr = &store.at(prefix + ".wr");
  p.ur = &store.at(prefix + ".ur");
  p.br = &store.at(prefix + ".br");
  p.wn = &store.at(prefix + ".wn");
  p.un = &store.at(prefix + ".un");
  p.bn = &store.at(prefix + ".bn");
  p.hidden = p.wz->rows();
  p.input = p.wz->cols();
  return p;
}

Var gru_step(Tape& tape, const GruParams& p, Var x, Var h) {
  Var z = tape.sigmoid(affine(tape, *p.wz, x, *p.uz, h, *p.bz));
  Var r = tape.sigmoid(affine(tape, *p.wr, x, *p.ur, h, *p.br));
  Var n = tape.tanh(affine(tape, *p.wn, x, *p.un, tape.mul(r, h), *p.bn));
  return tape.add(tape.mul(tape.one_minus(z), n), tape.mul(z, h));
}

Var bigru_encode(Tape& tape, std::span<const Var> inputs, const GruParams& fw,
                 const GruParams& bw) {
  if (inputs.empty()) throw Error("bigru: empty input sequence");
  Var hf = zeros(tape, fw.hidden);
  for (Var x : inputs) hf = gru_step(tape, fw, x, hf);
  Var hb = zeros(tape, bw.hidden);
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) hb = gru_step(tape, bw, *it, hb);
  const Var parts[] = {hf, hb};
  return tape.concat(parts);
}

TreeGruParams add_tree_gru(num::ParamStore& store, const std::string& prefix,
                           std::size_t edge_dim, std::size_t hidden, num::Rng& rng) {
  for (const char* g : {"rl", "rr", "zl", "zr", "z", "h"}) {
    const std::string base = prefix + "." + g;
    store.add(base + ".w", num::xavier_uniform({hidden, edge_dim}, rng));
    store.add(base + ".u", num::xavier_uniform({hidden, hidden}, rng));
    store.add(base + ".v", num::xavier_uniform({hidden, hidden}, rng));
    store.add(base + ".b", Tensor({hidden}));
  }
  return bind_tree_gru(store, prefix);
}

TreeGruParams bind_tree_gru(num::ParamStore& store, const std::string& prefix) {
  auto gate = [&](const char* g) {
    const std::string base = prefix + "." + g;
    return TreeGate{&store.at(base + ".w"), &store.at(base + ".u"), &store.at(base + ".v"),
                    &store.at(base + ".b")};
  };
  TreeGruParams p;
  p.reset_left = gate("rl");
  p.reset_right = gate("rr");
  p.update_left = gate("zl");
  p.update_right = gate("zr");
  p.update = gate("z");
  p.candidate = gate("h");
  p.hidden = p.update.w->rows();
  p.edge_dim = p.update.w->cols();
  return p;
}

std::vector<Var> tree_gru_pass(Tape& tape, const dep::DepTree& tree,
                               std::span<const Var> edge_inputs, const TreeGruParams& params,
                               TreeDirection direction) {
  if (edge_inputs.size() != tree.size()) throw Error("tree-gru: one edge input per token required");
  std::vector<Var> h(tree.size());
  const Var zero = zeros(tape, params.hidden);
  auto child_sum = [&](std::span<const int> kids) {
    if (kids.empty()) return zero;
    std::vector<Var> terms;
    for (int k : kids) terms.push_back(h[k - 1]);
    return terms.size() == 1 ? terms[0] : tape.sum(terms);
  };

  if (direction == TreeDirection::kBottomUp) {
    for (int i : tree.bottom_up_order()) {
      h[i - 1] = tree_cell(tape, params, edge_inputs[i - 1], child_sum(tree.left_children(i)),
                           child_sum(tree.right_children(i)));
    }
  } else {
    for (int i : tree.top_down_order()) {
      const int parent = tree.head(i);
      Var left = zero;
      Var right = zero;
      if (parent != 0) (parent < i ? left : right) = h[parent - 1];
      h[i - 1] = tree_cell(tape, params, edge_inputs[i - 1], left, right);
    }
  }
  return h;
}

std::size_t position_row(int depth, int max_depth) {
  if (depth < 0) throw Error("negative depth");
  return static_cast<std::size_t>(std::min(depth, max_depth + 1));
}

std::optional<Var> encode_sdp(Tape& tape, const dep::DepTree& tree, int answer,
                              std::span<const int> focus, std::span<const std::string> words,
                              const SdpTables& tables, const GruParams& fw,
                              const GruParams& bw) {
  if (words.size() != tree.size()) throw Error("sdp: words must align with the tree");
  if (focus.empty()) return std::nullopt;
  std::vector<Var> paths;
  for (int f : focus) {
    const dep::SdpPath path = dep::sdp(tree, answer, f);
    std::vector<Var> inputs;
    for (std::size_t k = 0; k < path.nodes.size(); ++k) {
      if (k > 0) {
        inputs.push_back(tape.row(*tables.labels, tables.label_vocab->id(path.edges[k - 1].label)));
      }
      inputs.push_back(tape.row(*tables.words, tables.word_vocab->id(words[path.nodes[k] - 1])));
    }
    paths.push_back(bigru_encode(tape, inputs, fw, bw));
  }
  return paths.size() == 1 ? paths[0] : tape.maxpool(paths);
}

Var encode_tpf(Tape& tape, const dep::DepTree& tree, std::span<const Var> word_inputs,
               Tensor& positions, int max_depth, const GruParams& fw, const GruParams& bw) {
  if (word_inputs.size() != tree.size()) {
    throw Error("tpf: " + std::to_string(word_inputs.size()) + " tokens for a tree of " +
                std::to_string(tree.size()));
  }
  std::vector<Var> inputs;
  for (int i = 1; i <= static_cast<int>(tree.size()); ++i) {
    const Var parts[] = {word_inputs[i - 1], tape.row(positions, position_row(tree.depth(i), max_depth))};
    inputs.push_back(tape.concat(parts));
  }
  return bigru_encode(tape, inputs, fw, bw);
}

Var encode_treegru(Tape& tape, const dep::DepTree& tree, std::span<const Var> word_inputs,
                   std::span<const Var> edge_inputs, const TreeGruParams& up,
                   const TreeGruParams& down, const GruParams& fw, const GruParams& bw) {
  if (word_inputs.size() != tree.size()) throw Error("tree-gru: token/tree length mismatch");
  const auto hu = tree_gru_pass(tape, tree, edge_inputs, up, TreeDirection::kBottomUp);
  const auto hd = tree_gru_pass(tape, tree, edge_inputs, down, TreeDirection::kTopDown);
  std::vector<Var> inputs;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const Var parts[] = {word_inputs[i], hu[i], hd[i]};
    inputs.push_back(tape.concat(parts));
  }
  return bigru_encode(tape, inputs, fw, bw);
}

Var combine(Tape& tape, Var q, std::span<const Var> extras) {
  Var out = q;
  for (Var x : extras) {
    if (tape.shape(x) != tape.shape(q)) {
      throw Error("combine: dimension mismatch " + num::shape_string(tape.shape(q)) + " vs " +
                  num::shape_string(tape.shape(x)));
    }
    out = tape.add(out, x);
  }
  return out;
}

}  // namespace synkbqa::enc
