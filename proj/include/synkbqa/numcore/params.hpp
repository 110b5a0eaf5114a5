#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "synkbqa/numcore/tensor.hpp"

namespace synkbqa::num {

/// Named parameters, iterated in name order. References returned by add()
/// and at() stay valid for the lifetime of the store.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  Tensor& add(std::string name, Tensor value);
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t entries() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

 private:
  Map params_;
};

/// Named-matrix text format: per tensor a header line `name rows cols`
/// followed by `rows` lines of `cols` space-separated values printed with 17
/// significant digits. Vectors are written as `n 1`.
void write_matrices(std::ostream& out, const ParamStore& params);

/// Reads the format above; every tensor comes back as [rows, cols].
ParamStore read_matrices(std::istream& in);

/// Copies values from `source` into the same-named tensors of `target`.
/// Every target tensor must be present in source with a matching element
/// count and leading dimension.
void assign_matrices(ParamStore& target, const ParamStore& source);

/// %.17g rendering used by every text format in the project.
std::string format_double(double v);
/// Strict decimal parse; throws Error on trailing garbage.
double parse_double(std::string_view text);

}  // namespace synkbqa::num
