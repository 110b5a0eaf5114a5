#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synkbqa/error.hpp"

namespace synkbqa::dep {

/// Tree validation failure; `token` is the 1-based index of the offending
/// token, or 0 when the problem is not tied to one token.
class TreeError : public Error {
 public:
  TreeError(const std::string& what, int token) : Error(what), token_(token) {}
  int token() const { return token_; }

 private:
  int token_;
};

/// One CoNLL-U token line. `index` is 1-based; `head` 0 marks the root.
struct Token {
  int index = 0;
  std::string form;
  int head = 0;
  std::string deprel;
};

/// A validated dependency tree: exactly one root, acyclic, connected.
/// Immutable once built.
class DepTree {
 public:
  /// Validates and indexes the tokens; throws TreeError describing the first
  /// violation (bad index order, head out of range, self loop, cycle, zero
  /// or multiple roots, empty label).
  static DepTree build(std::vector<Token> tokens);

  std::size_t size() const { return tokens_.size(); }
  const Token& token(int i) const { return tokens_.at(static_cast<std::size_t>(i - 1)); }
  const std::vector<Token>& tokens() const { return tokens_; }
  const std::string& form(int i) const { return token(i).form; }
  int head(int i) const { return token(i).head; }
  int root() const { return root_; }
  bool valid_index(int i) const { return i >= 1 && i <= static_cast<int>(tokens_.size()); }

  /// Children with a smaller / larger index than i, in surface order.
  std::span<const int> left_children(int i) const { return left_[slot(i)]; }
  std::span<const int> right_children(int i) const { return right_[slot(i)]; }
  /// All children in surface order.
  std::vector<int> children(int i) const;

  /// Number of head links from i up to the root.
  int depth(int i) const;
  /// Nodes ordered so that every child precedes its head.
  const std::vector<int>& bottom_up_order() const { return bottom_up_; }
  /// Nodes ordered so that every head precedes its children.
  std::vector<int> top_down_order() const {
    return {bottom_up_.rbegin(), bottom_up_.rend()};
  }
  int lowest_common_ancestor(int a, int b) const;

  std::vector<std::string> forms() const;

 private:
  std::size_t slot(int i) const;

  std::vector<Token> tokens_;
  int root_ = 0;
  std::vector<std::vector<int>> left_;
  std::vector<std::vector<int>> right_;
  std::vector<int> depth_;
  std::vector<int> bottom_up_;
};

struct ConlluSentence {
  std::string id;    // `# sent_id = ...`, or the 1-based sentence ordinal
  std::string text;  // `# text = ...`, or the forms joined by spaces
  std::size_t first_line = 0;
  DepTree tree;
};

struct ConlluError {
  std::size_t line = 0;
  std::size_t sentence = 0;  // 1-based ordinal
  std::string message;
};

struct ConlluResult {
  std::vector<ConlluSentence> sentences;
  std::vector<ConlluError> errors;
};

/// Parses CoNLL-U text (LF or CRLF). Uses ID, FORM, HEAD and DEPREL;
/// multiword ranges (`3-4`) and empty nodes (`5.1`) are skipped. A malformed
/// sentence is reported in `errors` and the remaining sentences are kept.
ConlluResult parse_conllu(std::string_view text);
ConlluResult read_conllu_file(const std::string& path);

enum class Step { kUp, kDown };

struct PathEdge {
  std::string label;
  Step step;  // kUp: from a dependent to its head; kDown: from a head to a dependent
};

/// Shortest dependency path: nodes from source to target, with the label of
/// each traversed head link between consecutive nodes.
struct SdpPath {
  std::vector<int> nodes;
  std::vector<PathEdge> edges;
};

/// The unique simple path between two tokens, found through their lowest
/// common ancestor. Throws Error on an invalid index.
SdpPath sdp(const DepTree& tree, int source, int target);

/// `what -det-> movies -dobj-> play` style rendering with the tree's forms.
std::string render_path(const DepTree& tree, const SdpPath& path);

/// Alternating word / label sequence for a path, e.g.
/// [what, det, movies, dobj, play]. `words` is aligned with the tree tokens
/// (words[i-1] for token i) so callers can substitute masked forms.
std::vector<std::string> path_tokens(const SdpPath& path, std::span<const std::string> words);

/// Head link head -> tail with the forms it connects.
struct DirectedEdge {
  int head = 0;
  int tail = 0;
  std::string head_form;
  std::string deprel;
  std::string tail_form;

  bool operator==(const DirectedEdge&) const = default;
};

/// The head link ending at `tail`; throws Error if tail is the root.
DirectedEdge incoming_edge(const DepTree& tree, int tail);
/// Every head link of the tree, ordered by tail index.
std::vector<DirectedEdge> edges(const DepTree& tree);

/// Neighbours of the edge a -> b: the incoming edge of a (none when a is the
/// root) followed by the outgoing edges of b in surface order. Throws Error
/// when the edge is not a head link of the tree.
std::vector<DirectedEdge> edge_neighborhood(const DepTree& tree, const DirectedEdge& edge);

/// First token whose lower-cased form is a wh-word (what, who, whom, whose,
/// which, where, when, why, how); token 1 when there is none.
int answer_word(const DepTree& tree);

bool is_wh_word(std::string_view lowered);
/// True for tokens made only of ASCII punctuation.
bool is_punctuation(std::string_view form);
std::string to_lower(std::string_view s);

}  // namespace synkbqa::dep
