#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "synkbqa/deptree.hpp"
#include "synkbqa/embedding_table.hpp"
#include "synkbqa/kb.hpp"
#include "synkbqa/matcher.hpp"
#include "synkbqa/qgraph.hpp"

namespace synkbqa::pipe {

/// Dataset TSV: `id <TAB> question <TAB> parse_ref <TAB> answer|answer|...`.
/// parse_ref is the `# sent_id` of the question's parse in the CoNLL-U file.
/// Blank lines and `#` lines are ignored.
struct DatasetRecord {
  std::string id;
  std::string question;
  std::string parse_ref;
  std::vector<std::string> answers;
  std::size_t line = 0;
};

std::vector<DatasetRecord> parse_dataset(std::string_view text);
std::vector<DatasetRecord> load_dataset(const std::string& path);

/// A question with its parse, links and executed candidates.
struct PreparedQuestion {
  std::string id;
  std::string text;
  dep::DepTree tree;
  std::vector<std::string> tokens;
  qg::FocusLinks links;
  std::set<kb::Value> gold;  // empty when unknown
  std::vector<qg::LabeledCandidate> candidates;
  std::size_t dropped = 0;
};

/// Links, generates and executes candidates; labels them when gold is given.
PreparedQuestion prepare(std::string id, std::string text, dep::DepTree tree,
                         const std::set<kb::Value>& gold, const kb::TripleStore& store,
                         const EmbeddingTable& words);

/// Prepares every record against its parse. Throws Error for a missing parse
/// reference. With a cache directory, results are stored in and reused from
/// `<dir>/candidates-<fingerprint>.json`; the fingerprint covers `inputs`.
std::vector<PreparedQuestion> prepare_dataset(const std::vector<DatasetRecord>& records,
                                              const std::vector<dep::ConlluSentence>& parses,
                                              const kb::TripleStore& store,
                                              const EmbeddingTable& words,
                                              const std::optional<std::string>& cache_dir = {},
                                              std::string_view fingerprint = {});

/// FNV-1a 64 over the files' bytes, each file followed by a 0xff separator,
/// as 16 hex digits.
std::string fingerprint_files(const std::vector<std::string>& paths);

match::QuestionInput question_input(const PreparedQuestion& q);
match::GraphInput graph_input(const kb::TripleStore& store, const qg::FocusLinks& links,
                              const qg::LabeledCandidate& c);

/// Training view: graph inputs for every candidate plus positive/negative
/// pairs. Questions without a positive get no pairs.
match::TrainQuestion train_question(const kb::TripleStore& store, const PreparedQuestion& q);

/// Vocabulary keys for a new model: word-table keys, dependency labels of the
/// training parses, sub-path strings of the training candidates, edge keys.
match::ModelKeys collect_keys(const kb::TripleStore& store,
                              const std::vector<PreparedQuestion>& train,
                              const EmbeddingTable& words, const EmbeddingTable* edges);

}  // namespace synkbqa::pipe
