#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synkbqa/deptree.hpp"
#include "synkbqa/edgevec.hpp"
#include "synkbqa/embedding_table.hpp"
#include "synkbqa/encoders.hpp"
#include "synkbqa/numcore/params.hpp"
#include "synkbqa/numcore/tape.hpp"
#include "synkbqa/qgraph.hpp"

namespace synkbqa::match {

/// One relation string per focus of the graph, read from the answer node:
/// the main path (`p` or `p..q`), then each constraint (`t` or `q..t` for
/// entity constraints, the label for types, `t..cmp_eq` / `t..ord_desc` and
/// so on for time and ordinal constraints, prefixed by `q..` on the middle
/// node). Predicate direction is not part of the string.
std::vector<std::string> split_subpaths(const kb::TripleStore& store, const qg::QueryGraph& graph);

struct SubPathTables {
  num::Tensor* relations = nullptr;
  const enc::Vocabulary* relation_vocab = nullptr;
  num::Tensor* words = nullptr;
  const enc::Vocabulary* word_vocab = nullptr;
};

/// sp = E_sp[relation] + mean of E_w over the relation's words (split on `_`
/// and `.`; unknown words and relations use the `<unk>` rows).
num::Var encode_subpath(num::Tape& tape, std::string_view relation, const SubPathTables& tables);

/// Coordinatewise max over the sub-path encodings.
num::Var encode_graph(num::Tape& tape, std::span<const std::string> subpaths,
                      const SubPathTables& tables);

/// cos(question, graph). Throws on a dimension mismatch.
num::Var semantic_score(num::Tape& tape, num::Var question, num::Var graph);

inline constexpr std::size_t kFeatureCount = 5;

struct GraphFeatures {
  double link_score = 0.0;
  std::size_t constraints = 0;
  std::size_t path_length = 1;
  std::size_t answers = 0;
};

/// [link score, constraints / 4, path length - 1, log10(1 + answers)]
std::array<double, kFeatureCount - 1> aux_features(const GraphFeatures& f);

struct ScoreBreakdown {
  std::array<double, kFeatureCount> features{};  // S_rm first
  std::array<double, kFeatureCount> weights{};
  double total = 0.0;
};

/// w . [S_rm, aux...]. Throws naming the feature when one is not finite.
ScoreBreakdown total_score(double s_rm, const GraphFeatures& features,
                           std::span<const double> weights);
num::Var total_score(num::Tape& tape, num::Var s_rm, const GraphFeatures& features,
                     num::Var weights);

/// max(0, (neg + margin) - pos); exactly 0 when pos >= neg + margin.
double hinge_loss(double pos, double neg, double margin);
num::Var hinge_loss(num::Tape& tape, num::Var pos, num::Var neg, double margin);

struct ModelConfig {
  std::size_t word_dim = 300;
  std::size_t hidden = 150;  // question vectors have 2 * hidden = word_dim entries
  std::size_t tree_hidden = 100;
  std::size_t pos_dim = 50;
  std::size_t edge_dim = 0;  // set from the edge table when treegru is on
  int max_depth = 15;
  double dropout = 0.1;
  bool sdp = false;
  bool tpf = false;
  bool treegru = false;

  /// `none` or a comma list in the order sdp,tpf,treegru.
  std::string flags() const;
  /// Parses a comma list of sdp / tpf / treegru (empty or `none` for none).
  void set_flags(std::string_view list);
};

/// Everything the question encoders need, computed once per question.
struct QuestionInput {
  dep::DepTree tree;
  std::vector<std::string> anonymized;  // collapsed spans, for the base encoder
  std::vector<std::string> masked;      // aligned with the tree
  std::vector<int> focus;               // SDP targets
  int answer = 1;
};

struct GraphInput {
  std::vector<std::string> subpaths;
  GraphFeatures features;
};

struct ModelKeys {
  std::vector<std::string> words;
  std::vector<std::string> labels;
  std::vector<std::string> relations;
  std::vector<std::string> edges;  // edge vocabulary, only with treegru
};

/// All parameters plus the vocabularies that index them.
class Model {
 public:
  /// Random initialization of every table and layer the config enables.
  Model(const ModelConfig& config, ModelKeys keys, std::uint64_t seed);

  /// Copies pretrained rows for keys present in the table.
  void set_word_vectors(const EmbeddingTable& table);
  void set_edge_vectors(const EmbeddingTable& table);

  /// Writes `path` (named matrices) and `path.manifest` (config and keys).
  void save(const std::string& path) const;
  static Model load(const std::string& path);

  const ModelConfig& config() const { return config_; }
  num::ParamStore& params() { return params_; }
  const num::ParamStore& params() const { return params_; }
  const enc::Vocabulary& words() const { return words_; }
  const enc::Vocabulary& labels() const { return labels_; }
  const enc::Vocabulary& relations() const { return relations_; }
  const edgevec::EdgeVocab* edges() const { return edges_ ? &*edges_ : nullptr; }

  struct QuestionVars {
    num::Var q;
    std::optional<num::Var> sdp, tpf, treegru;
    num::Var combined;
  };
  QuestionVars encode_question(num::Tape& tape, const QuestionInput& input, num::Rng& rng,
                               bool training);
  num::Var encode_graph(num::Tape& tape, const GraphInput& graph);
  /// Total score S(Q, G) on the tape.
  num::Var score(num::Tape& tape, num::Var question, num::Var graph, const GraphFeatures& f);

  SubPathTables subpath_tables();

 private:
  std::vector<num::Var> word_rows(num::Tape& tape, std::span<const std::string> tokens,
                                  num::Rng& rng, bool training);

  ModelConfig config_;
  num::ParamStore params_;
  enc::Vocabulary words_;
  enc::Vocabulary labels_;
  enc::Vocabulary relations_;
  std::optional<edgevec::EdgeVocab> edges_;
};

struct TrainQuestion {
  QuestionInput question;
  std::vector<GraphInput> graphs;
  std::vector<qg::CandidatePair> pairs;
};

struct TrainConfig {
  int epochs = 10;
  std::size_t batch = 32;
  double margin = 0.5;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

/// Shuffled (question, positive, negative) triples in batches; mean hinge
/// loss per batch, one Adam step per batch, dropout on. Returns the mean loss
/// of each epoch. Throws Error when no question has a pair or a loss is not
/// finite.
std::vector<double> train(Model& model, std::span<const TrainQuestion> data,
                          const TrainConfig& config,
                          const std::function<void(int, double)>& on_epoch = {});

/// Total score of each candidate with dropout off.
std::vector<ScoreBreakdown> score_candidates(Model& model, const QuestionInput& question,
                                             std::span<const GraphInput> graphs);

/// Index of the first maximal score, nullopt for an empty list.
std::optional<std::size_t> best_candidate(std::span<const ScoreBreakdown> scores);

enum class LengthBucket { kShort, kMid, kLong };
/// SHORT up to 4 words, MID 5-7, LONG 8 or more (punctuation not counted).
LengthBucket length_bucket(std::size_t words);
std::string_view bucket_name(LengthBucket b);
std::size_t word_count(std::span<const std::string> tokens);
/// First wh-word of the question, or `other`.
std::string question_type(std::span<const std::string> tokens);

struct EvalItem {
  std::string id;
  std::string type;
  LengthBucket bucket = LengthBucket::kShort;
  double f1 = 0.0;
  std::size_t candidates = 0;
};

struct ReportRow {
  std::string metric;
  std::string bucket;
  double value = 0.0;
};

struct EvalReport {
  std::vector<ReportRow> overall;
  std::vector<ReportRow> by_type;
  std::vector<ReportRow> by_length;
};

/// Mean F1 and counts overall, per question type and per length bucket
/// (all three length buckets always present). Items are ordered by id
/// first, so the result does not depend on input order.
EvalReport summarize(std::vector<EvalItem> items);

}  // namespace synkbqa::match
