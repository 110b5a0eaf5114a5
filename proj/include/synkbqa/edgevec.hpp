#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synkbqa/deptree.hpp"
#include "synkbqa/embedding_table.hpp"

namespace synkbqa::edgevec {

/// `head|deprel|tail`, lower-cased.
std::string lexical_key(const dep::DirectedEdge& edge);

/// Dependency-edge vocabulary with two key tiers: lexicalized edges that
/// occur at least min_count times, and one backoff key per dependency label.
/// Id 0 is `<unk>`, then backoff labels, then lexicalized keys, each tier in
/// lexicographic order.
class EdgeVocab {
 public:
  static constexpr std::string_view kUnk = "<unk>";

  /// Throws Error on an empty corpus.
  static EdgeVocab build(std::span<const dep::DepTree> corpus, std::size_t min_count);
  /// Rebuilds a vocabulary from saved keys (e.g. an embedding file).
  static EdgeVocab from_keys(std::span<const std::string> keys);

  std::size_t size() const { return keys_.size(); }
  std::size_t unk() const { return 0; }
  const std::string& key(std::size_t id) const { return keys_.at(id); }
  const std::vector<std::string>& keys() const { return keys_; }
  std::uint64_t count(std::size_t id) const { return counts_.at(id); }
  std::size_t lexical_size() const { return lexical_; }
  std::size_t backoff_size() const { return backoff_; }

  std::optional<std::size_t> find(std::string_view key) const;
  /// Lexicalized hit, else the label's backoff key, else `<unk>`.
  std::size_t resolve(const dep::DirectedEdge& edge) const;

 private:
  std::vector<std::string> keys_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t lexical_ = 0;
  std::size_t backoff_ = 0;
};

struct TrainingPair {
  std::uint32_t center = 0;
  std::uint32_t context = 0;
  bool operator==(const TrainingPair&) const = default;
};

/// One (edge, neighbour) pair per neighbour in edge_neighborhood, for every
/// edge of every tree, in corpus order.
std::vector<TrainingPair> training_pairs(std::span<const dep::DepTree> corpus,
                                         const EdgeVocab& vocab);

struct SkipGramConfig {
  std::size_t dim = 300;
  int epochs = 5;
  int negatives = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable embeddings;         // input vectors, keyed by the vocabulary
  std::vector<double> epoch_loss;    // mean negative-sampling loss per epoch
};

/// Skip-gram with negative sampling over edge pairs. Negatives are drawn
/// from the context unigram distribution raised to 0.75 and the learning rate
/// decays linearly to 1e-4 of its start value. Deterministic for a seed.
/// Throws Error on dim == 0, negatives < 1, or a non-finite loss.
SkipGramResult train_skipgram(std::span<const TrainingPair> pairs, const EdgeVocab& vocab,
                              const SkipGramConfig& config);

}  // namespace synkbqa::edgevec
