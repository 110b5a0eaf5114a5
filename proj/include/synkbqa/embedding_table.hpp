#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synkbqa/numcore/tensor.hpp"

namespace synkbqa {

/// String-keyed rows of a dense [size, dim] matrix.
///
/// Text format: a header line `size dim`, then one line per row
/// `key v1 ... vdim` with values printed at 17 significant digits.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// Throws Error on duplicate keys or a row count that differs from keys.
  EmbeddingTable(std::vector<std::string> keys, num::Tensor vectors);

  std::size_t size() const { return keys_.size(); }
  std::size_t dim() const { return vectors_.cols(); }
  const std::vector<std::string>& keys() const { return keys_; }
  const num::Tensor& vectors() const { return vectors_; }
  num::Tensor& vectors() { return vectors_; }

  std::optional<std::size_t> find(std::string_view key) const;
  std::span<const double> row(std::size_t i) const { return vectors_.row(i); }

 private:
  std::vector<std::string> keys_;
  num::Tensor vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

void save_embeddings(const EmbeddingTable& table, std::ostream& out);
void save_embeddings(const EmbeddingTable& table, const std::string& path);
/// Throws ParseError naming the line for a malformed header, a row with the
/// wrong number of values, a duplicate key or a row count that differs from
/// the header.
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::string& path);

}  // namespace synkbqa
