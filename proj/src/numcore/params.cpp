#include "synkbqa/numcore/params.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "synkbqa/error.hpp"

namespace synkbqa::num {

Tensor& ParamStore::add(std::string name, Tensor value) {
  auto [it, inserted] = params_.emplace(std::move(name), std::move(value));
  if (!inserted) throw Error("duplicate parameter name " + it->first);
  return it->second;
}

Tensor& ParamStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter " + std::string(name));
  return it->second;
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter " + std::string(name));
  return it->second;
}

bool ParamStore::contains(std::string_view name) const {
  return params_.find(name) != params_.end();
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

std::size_t ParamStore::entries() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.size();
  return n;
}

std::string format_double(double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error("not a number: '" + std::string(text) + "'");
  }
  return v;
}

void write_matrices(std::ostream& out, const ParamStore& params) {
  for (const auto& [name, p] : params) {
    const std::size_t rows = p.rows();
    const std::size_t cols = p.cols();
    out << name << ' ' << rows << ' ' << cols << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = p.row(r);
      for (std::size_t c = 0; c < cols; ++c) {
        if (c) out << ' ';
        out << format_double(row[c]);
      }
      out << '\n';
    }
  }
}

ParamStore read_matrices(std::istream& in) {
  ParamStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream header(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(header >> name >> rows >> cols) || rows == 0 || cols == 0) {
      throw ParseError("expected matrix header 'name rows cols'", line_no);
    }
    std::vector<double> values;
    values.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw ParseError("unexpected end of file in " + name, line_no);
      ++line_no;
      std::istringstream row(line);
      std::string tok;
      std::size_t count = 0;
      while (row >> tok) {
        try {
          values.push_back(parse_double(tok));
        } catch (const Error& e) {
          throw ParseError(e.what(), line_no);
        }
        ++count;
      }
      if (count != cols) {
        throw ParseError(name + ": expected " + std::to_string(cols) + " values, got " +
                             std::to_string(count),
                         line_no);
      }
    }
    if (store.contains(name)) throw ParseError("duplicate matrix " + name, line_no);
    store.add(name, Tensor::matrix(rows, cols, std::move(values)));
  }
  return store;
}

void assign_matrices(ParamStore& target, const ParamStore& source) {
  for (auto& [name, t] : target) {
    if (!source.contains(name)) throw Error("checkpoint is missing parameter " + name);
    const Tensor& s = source.at(name);
    if (s.size() != t.size() || s.rows() != t.rows()) {
      throw Error("checkpoint parameter " + name + " has shape " + shape_string(s.shape()) +
                  ", expected " + shape_string(t.shape()));
    }
    std::copy(s.data().begin(), s.data().end(), t.data().begin());
  }
}

}  // namespace synkbqa::num
