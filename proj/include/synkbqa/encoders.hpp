#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synkbqa/deptree.hpp"
#include "synkbqa/numcore/params.hpp"
#include "synkbqa/numcore/tape.hpp"
#include "synkbqa/qgraph.hpp"

namespace synkbqa::enc {

inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kEntityMask = "<E>";
inline constexpr std::string_view kTimeMask = "<Tm>";

/// String keys of an embedding table; unknown keys map to `<unk>`.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Adds `<unk>` at the end when absent. Throws on duplicate keys.
  explicit Vocabulary(std::vector<std::string> keys);

  std::size_t size() const { return keys_.size(); }
  std::size_t unk() const { return unk_; }
  const std::vector<std::string>& keys() const { return keys_; }
  std::optional<std::size_t> find(std::string_view key) const;
  std::size_t id(std::string_view key) const { return find(key).value_or(unk_); }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t unk_ = 0;
};

/// Lower-cased tokens with each entity-link span collapsed to `<E>` and each
/// time span to `<Tm>`. Overlapping spans: the longer one wins.
std::vector<std::string> anonymize(std::span<const std::string> tokens,
                                   const qg::FocusLinks& links);
/// Same replacement but token by token, so the result stays aligned with the
/// parse tree.
std::vector<std::string> mask_tokens(std::span<const std::string> tokens,
                                     const qg::FocusLinks& links);

/// Head of a token span in the tree (1-based token index): the span token
/// closest to the root, first in surface order on ties.
int span_head(const dep::DepTree& tree, qg::Span span);
/// Heads of every link span, duplicates removed, in link order.
std::vector<int> focus_words(const dep::DepTree& tree, const qg::FocusLinks& links);

struct GruParams {
  num::Tensor* wz = nullptr;
  num::Tensor* uz = nullptr;
  num::Tensor* bz = nullptr;
  num::Tensor* wr = nullptr;
  num::Tensor* ur = nullptr;
  num::Tensor* br = nullptr;
  num::Tensor* wn = nullptr;
  num::Tensor* un = nullptr;
  num::Tensor* bn = nullptr;
  std::size_t input = 0;
  std::size_t hidden = 0;
};

/// Registers `<prefix>.{wz,uz,bz,...}`: Xavier matrices, zero biases.
GruParams add_gru(num::ParamStore& store, const std::string& prefix, std::size_t input,
                  std::size_t hidden, num::Rng& rng);
GruParams bind_gru(num::ParamStore& store, const std::string& prefix);

/// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// n = tanh(Wn x + Un (r*h) + bn), h' = (1-z)*n + z*h
num::Var gru_step(num::Tape& tape, const GruParams& p, num::Var x, num::Var h);

/// Forward and backward GRU from zero states; returns [h_fw_last ; h_bw_last].
/// Throws on an empty sequence.
num::Var bigru_encode(num::Tape& tape, std::span<const num::Var> inputs, const GruParams& fw,
                      const GruParams& bw);

struct TreeGate {
  num::Tensor* w = nullptr;  // [H_t, edge dim]
  num::Tensor* u = nullptr;  // [H_t, H_t], applied to the left state
  num::Tensor* v = nullptr;  // [H_t, H_t], applied to the right state
  num::Tensor* b = nullptr;  // [H_t]
};

struct TreeGruParams {
  TreeGate reset_left, reset_right, update_left, update_right, update, candidate;
  std::size_t edge_dim = 0;
  std::size_t hidden = 0;
};

TreeGruParams add_tree_gru(num::ParamStore& store, const std::string& prefix,
                           std::size_t edge_dim, std::size_t hidden, num::Rng& rng);
TreeGruParams bind_tree_gru(num::ParamStore& store, const std::string& prefix);

enum class TreeDirection { kBottomUp, kTopDown };

/// One Tree-GRU pass. `edge_inputs[i-1]` is l_i for token i. Bottom-up, the
/// left/right states are sums over left/right children; top-down the parent's
/// state fills the slot on the parent's side and the root sees zeros.
/// Returns one state per token, indexed like the tree tokens.
std::vector<num::Var> tree_gru_pass(num::Tape& tape, const dep::DepTree& tree,
                                    std::span<const num::Var> edge_inputs,
                                    const TreeGruParams& params, TreeDirection direction);

/// Row of the position table for a depth; depths past max_depth share the
/// overflow row max_depth + 1.
std::size_t position_row(int depth, int max_depth);

/// Shortest-path encoding: for each focus word the path from the answer word
/// rendered as word / label tokens, each BiGRU-encoded, then max-pooled.
/// `words` is aligned with the tree tokens.
struct SdpTables {
  num::Tensor* words = nullptr;
  const Vocabulary* word_vocab = nullptr;
  num::Tensor* labels = nullptr;
  const Vocabulary* label_vocab = nullptr;
};

/// Returns nullopt when there are no focus words.
std::optional<num::Var> encode_sdp(num::Tape& tape, const dep::DepTree& tree, int answer,
                                   std::span<const int> focus,
                                   std::span<const std::string> words, const SdpTables& tables,
                                   const GruParams& fw, const GruParams& bw);

/// BiGRU over [w_i ; d_i] where d_i is the depth embedding of token i.
num::Var encode_tpf(num::Tape& tape, const dep::DepTree& tree,
                    std::span<const num::Var> word_inputs, num::Tensor& positions, int max_depth,
                    const GruParams& fw, const GruParams& bw);

/// t_i = [up_i ; down_i]; BiGRU over [w_i ; t_i].
num::Var encode_treegru(num::Tape& tape, const dep::DepTree& tree,
                        std::span<const num::Var> word_inputs,
                        std::span<const num::Var> edge_inputs, const TreeGruParams& up,
                        const TreeGruParams& down, const GruParams& fw, const GruParams& bw);

/// q plus every syntax vector. Throws on a dimension mismatch.
num::Var combine(num::Tape& tape, num::Var q, std::span<const num::Var> extras);

}  // namespace synkbqa::enc
