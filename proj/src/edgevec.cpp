#include "synkbqa/edgevec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "synkbqa/error.hpp"
#include "synkbqa/numcore/init.hpp"
#include "synkbqa/numcore/kernels.hpp"

namespace synkbqa::edgevec {

std::string lexical_key(const dep::DirectedEdge& edge) {
  return dep::to_lower(edge.head_form) + "|" + dep::to_lower(edge.deprel) + "|" +
         dep::to_lower(edge.tail_form);
}

EdgeVocab EdgeVocab::build(std::span<const dep::DepTree> corpus, std::size_t min_count) {
  if (corpus.empty()) throw Error("edge vocabulary: empty corpus");
  std::map<std::string, std::uint64_t> lexical;
  std::map<std::string, std::uint64_t> backoff;
  for (const dep::DepTree& tree : corpus) {
    for (const dep::DirectedEdge& e : dep::edges(tree)) {
      ++lexical[lexical_key(e)];
      ++backoff[dep::to_lower(e.deprel)];
    }
  }
  EdgeVocab v;
  v.keys_.emplace_back(kUnk);
  v.counts_.push_back(0);
  for (const auto& [key, n] : backoff) {
    v.keys_.push_back(key);
    v.counts_.push_back(n);
  }
  v.backoff_ = backoff.size();
  for (const auto& [key, n] : lexical) {
    if (n < min_count) continue;
    v.keys_.push_back(key);
    v.counts_.push_back(n);
    ++v.lexical_;
  }
  for (std::size_t i = 0; i < v.keys_.size(); ++i) v.index_.emplace(v.keys_[i], i);
  return v;
}

EdgeVocab EdgeVocab::from_keys(std::span<const std::string> keys) {
  EdgeVocab v;
  v.keys_.assign(keys.begin(), keys.end());
  v.counts_.assign(keys.size(), 0);
  for (std::size_t i = 0; i < v.keys_.size(); ++i) {
    if (!v.index_.emplace(v.keys_[i], i).second) {
      throw Error("edge vocabulary: duplicate key '" + v.keys_[i] + "'");
    }
    if (v.keys_[i] == kUnk) continue;
    if (v.keys_[i].find('|') == std::string::npos) {
      ++v.backoff_;
    } else {
      ++v.lexical_;
    }
  }
  if (!v.find(kUnk)) throw Error("edge vocabulary: missing <unk> key");
  return v;
}

std::optional<std::size_t> EdgeVocab::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EdgeVocab::resolve(const dep::DirectedEdge& edge) const {
  if (auto id = find(lexical_key(edge))) return *id;
  if (auto id = find(dep::to_lower(edge.deprel))) return *id;
  return *find(kUnk);
}

std::vector<TrainingPair> training_pairs(std::span<const dep::DepTree> corpus,
                                         const EdgeVocab& vocab) {
  std::vector<TrainingPair> pairs;
  for (const dep::DepTree& tree : corpus) {
    for (const dep::DirectedEdge& e : dep::edges(tree)) {
      const auto center = static_cast<std::uint32_t>(vocab.resolve(e));
      for (const dep::DirectedEdge& c : dep::edge_neighborhood(tree, e)) {
        pairs.push_back({center, static_cast<std::uint32_t>(vocab.resolve(c))});
      }
    }
  }
  return pairs;
}

namespace {

double log_sigmoid(double x) {
  // log(1 / (1 + e^-x)) without overflow for large |x|
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SkipGramResult train_skipgram(std::span<const TrainingPair> pairs, const EdgeVocab& vocab,
                              const SkipGramConfig& config) {
  if (config.dim == 0) throw Error("skip-gram: dimension must be positive");
  if (config.negatives < 1) throw Error("skip-gram: need at least one negative sample");
  if (config.epochs < 0) throw Error("skip-gram: negative epoch count");

  const std::size_t n = vocab.size();
  const std::size_t d = config.dim;
  num::Rng rng(config.seed);

  num::Tensor input({n, d});
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d),
                                              0.5 / static_cast<double>(d));
  for (double& v : input.data()) v = init(rng);
  num::Tensor output({n, d});

  SkipGramResult result;
  if (config.epochs > 0 && !pairs.empty()) {
    std::vector<double> weights(n, 0.0);
    for (const TrainingPair& p : pairs) weights[p.context] += 1.0;
    for (double& w : weights) w = std::pow(w, 0.75);
    std::discrete_distribution<std::size_t> negative(weights.begin(), weights.end());

    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto& k = num::kernels::active();
    std::vector<double> center_grad(d);
    const double total_steps = static_cast<double>(config.epochs) * pairs.size();
    std::uint64_t step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double loss_sum = 0.0;
      for (std::size_t idx : order) {
        const TrainingPair& p = pairs[idx];
        const double lr = config.learning_rate *
                          std::max(1e-4, 1.0 - static_cast<double>(step) / total_steps);
        ++step;
        double* v = input.row(p.center).data();
        std::fill(center_grad.begin(), center_grad.end(), 0.0);
        double loss = 0.0;
        for (int s = 0; s <= config.negatives; ++s) {
          std::size_t target = p.context;
          double label = 1.0;
          if (s > 0) {
            target = negative(rng);
            if (target == p.context) continue;
            label = 0.0;
          }
          double* u = output.row(target).data();
          const double score = k.dot(u, v, d);
          loss -= label > 0 ? log_sigmoid(score) : log_sigmoid(-score);
          const double g = lr * (label - sigmoid(score));
          k.axpy(g, u, center_grad.data(), d);
          k.axpy(g, v, u, d);
        }
        k.axpy(1.0, center_grad.data(), v, d);
        if (!std::isfinite(loss)) {
          throw Error("skip-gram: non-finite loss at epoch " + std::to_string(epoch) +
                      ", step " + std::to_string(step));
        }
        loss_sum += loss;
      }
      result.epoch_loss.push_back(loss_sum / static_cast<double>(pairs.size()));
    }
  }
  result.embeddings = EmbeddingTable(vocab.keys(), std::move(input));
  return result;
}

}  // namespace synkbqa::edgevec
