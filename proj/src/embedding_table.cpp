#include "synkbqa/embedding_table.hpp"

#include <fstream>
#include <sstream>

#include "synkbqa/error.hpp"
#include "synkbqa/numcore/params.hpp"

namespace synkbqa {

EmbeddingTable::EmbeddingTable(std::vector<std::string> keys, num::Tensor vectors)
    : keys_(std::move(keys)), vectors_(std::move(vectors)) {
  if (vectors_.rank() != 2 || vectors_.rows() != keys_.size()) {
    throw Error("embedding table: " + std::to_string(keys_.size()) + " keys for a " +
                num::shape_string(vectors_.shape()) + " matrix");
  }
  index_.reserve(keys_.size());
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (!index_.emplace(keys_[i], i).second) {
      throw Error("embedding table: duplicate key '" + keys_[i] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void save_embeddings(const EmbeddingTable& table, std::ostream& out) {
  out << table.size() << ' ' << table.dim() << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.keys()[i];
    for (double v : table.row(i)) out << ' ' << num::format_double(v);
    out << '\n';
  }
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write embeddings to " + path);
  save_embeddings(table, out);
  if (!out) throw Error("failed writing embeddings to " + path);
}

EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header 'size dim'", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream header(line);
  std::size_t rows = 0, dim = 0;
  std::string extra;
  if (!(header >> rows >> dim) || (header >> extra) || dim == 0) {
    throw ParseError("malformed header, expected 'size dim'", line_no);
  }
  std::vector<std::string> keys;
  std::vector<double> values;
  keys.reserve(rows);
  values.reserve(rows * dim);
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string key;
    row >> key;
    if (!seen.emplace(key, line_no).second) {
      throw ParseError("duplicate key '" + key + "'", line_no);
    }
    std::size_t count = 0;
    std::string tok;
    while (row >> tok) {
      try {
        values.push_back(num::parse_double(tok));
      } catch (const Error& e) {
        throw ParseError(e.what(), line_no);
      }
      ++count;
    }
    if (count != dim) {
      throw ParseError("row '" + key + "' has " + std::to_string(count) +
                           " values, header says " + std::to_string(dim),
                       line_no);
    }
    keys.push_back(std::move(key));
  }
  if (keys.size() != rows) {
    throw ParseError("header promises " + std::to_string(rows) + " rows, found " +
                         std::to_string(keys.size()),
                     line_no);
  }
  if (rows == 0) throw ParseError("embedding file has no rows", line_no);
  return EmbeddingTable(std::move(keys), num::Tensor::matrix(rows, dim, std::move(values)));
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embeddings file " + path);
  return load_embeddings(in);
}

}  // namespace synkbqa
