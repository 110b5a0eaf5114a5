#include "synkbqa/numcore/tape.hpp"

#include <algorithm>
#include <cmath>

#include "synkbqa/error.hpp"
#include "synkbqa/numcore/kernels.hpp"

namespace synkbqa::num {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParam: return "param";
    case Op::kRow: return "row";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kOneMinus: return "one_minus";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kConcat: return "concat";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kMaxPool: return "maxpool";
    case Op::kDot: return "dot";
    case Op::kCosine: return "cosine";
    case Op::kDropout: return "dropout";
  }
  return "?";
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw Error("tape: invalid variable handle");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error("tape: invalid variable handle");
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  if (n.needs_grad && !n.ext_grad) n.grad.assign(n.size, 0.0);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tape::Node Tape::make(Op op, Shape shape, std::vector<double> value,
                      std::initializer_list<Var> inputs) {
  return make(op, std::move(shape), std::move(value),
              std::span<const Var>(inputs.begin(), inputs.size()));
}

Tape::Node Tape::make(Op op, Shape shape, std::vector<double> value,
                      std::span<const Var> inputs) {
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.size = value.size();
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    n.needs_grad = n.needs_grad || node(in).needs_grad;
    n.inputs.push_back(in.id);
  }
  return n;
}

void Tape::check_same(Op op, Var a, Var b) const {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (na.shape != nb.shape) {
    throw Error(std::string(op_name(op)) + ": shape mismatch " + shape_string(na.shape) +
                " vs " + shape_string(nb.shape));
  }
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.shape = value.shape();
  n.size = value.size();
  n.value.assign(value.data().begin(), value.data().end());
  return push(std::move(n));
}

Var Tape::constant(std::vector<double> values) {
  return constant(Tensor::vector(std::move(values)));
}

Var Tape::param(Tensor& p) {
  if (auto it = params_.find(&p); it != params_.end()) return Var{it->second};
  p.enable_grad();
  Node n;
  n.op = Op::kParam;
  n.shape = p.shape();
  n.size = p.size();
  n.ext_value = p.data().data();
  n.ext_grad = p.grad().data();
  n.needs_grad = true;
  Var v = push(std::move(n));
  params_.emplace(&p, v.id);
  return v;
}

Var Tape::row(Tensor& table, std::size_t r) {
  if (table.rank() != 2) {
    throw Error("row: expected a rank-2 table, got " + shape_string(table.shape()));
  }
  if (r >= table.rows()) {
    throw Error("row: index " + std::to_string(r) + " out of range for " +
                shape_string(table.shape()));
  }
  table.enable_grad();
  const double* key = table.row(r).data();
  if (auto it = rows_.find(key); it != rows_.end()) return Var{it->second};
  Node n;
  n.op = Op::kRow;
  n.shape = {table.cols()};
  n.size = table.cols();
  n.ext_value = key;
  n.ext_grad = table.grad().data() + r * table.cols();
  n.needs_grad = true;
  Var v = push(std::move(n));
  rows_.emplace(key, v.id);
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  const bool b_vector = nb.shape.size() == 1;
  const std::size_t k_b = nb.shape[0];
  if (na.shape.size() != 2 || nb.shape.size() > 2 || na.shape[1] != k_b) {
    throw Error("matmul: shape mismatch " + shape_string(na.shape) + " vs " +
                shape_string(nb.shape));
  }
  const std::size_t m = na.shape[0];
  const std::size_t k = na.shape[1];
  const std::size_t n = b_vector ? 1 : nb.shape[1];
  std::vector<double> out(m * n, 0.0);
  const double* pa = val(na);
  const double* pb = val(nb);
  if (n == 1) {
    kernels::active().gemv(pa, m, k, pb, out.data());
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        kernels::active().axpy(pa[i * k + p], pb + p * n, out.data() + i * n, n);
      }
    }
  }
  Shape shape = b_vector ? Shape{m} : Shape{m, n};
  return push(make(Op::kMatMul, std::move(shape), std::move(out), {a, b}));
}

Var Tape::add(Var a, Var b) {
  check_same(Op::kAdd, a, b);
  const Node& na = node(a);
  const double* pa = val(na);
  const double* pb = val(node(b));
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  return push(make(Op::kAdd, na.shape, std::move(out), {a, b}));
}

Var Tape::sub(Var a, Var b) {
  check_same(Op::kSub, a, b);
  const Node& na = node(a);
  const double* pa = val(na);
  const double* pb = val(node(b));
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  return push(make(Op::kSub, na.shape, std::move(out), {a, b}));
}

Var Tape::mul(Var a, Var b) {
  check_same(Op::kMul, a, b);
  const Node& na = node(a);
  const double* pa = val(na);
  const double* pb = val(node(b));
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  return push(make(Op::kMul, na.shape, std::move(out), {a, b}));
}

Var Tape::scale(Var a, double factor) {
  const Node& na = node(a);
  const double* pa = val(na);
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * pa[i];
  Node n = make(Op::kScale, na.shape, std::move(out), {a});
  n.aux = {factor};
  return push(std::move(n));
}

Var Tape::one_minus(Var a) {
  const Node& na = node(a);
  const double* pa = val(na);
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - pa[i];
  return push(make(Op::kOneMinus, na.shape, std::move(out), {a}));
}

Var Tape::sigmoid(Var a) {
  const Node& na = node(a);
  const double* pa = val(na);
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-pa[i]));
  return push(make(Op::kSigmoid, na.shape, std::move(out), {a}));
}

Var Tape::tanh(Var a) {
  const Node& na = node(a);
  const double* pa = val(na);
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(pa[i]);
  return push(make(Op::kTanh, na.shape, std::move(out), {a}));
}

Var Tape::relu(Var a) {
  const Node& na = node(a);
  const double* pa = val(na);
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  return push(make(Op::kRelu, na.shape, std::move(out), {a}));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat: empty input list");
  std::vector<double> out;
  for (Var p : parts) {
    const Node& np = node(p);
    if (np.shape.size() != 1) {
      throw Error("concat: expected vectors, got " + shape_string(np.shape));
    }
    const double* v = val(np);
    out.insert(out.end(), v, v + np.size);
  }
  const std::size_t n = out.size();
  return push(make(Op::kConcat, {n}, std::move(out), parts));
}

Var Tape::sum(std::span<const Var> terms) {
  if (terms.empty()) throw Error("sum: empty input list");
  for (Var t : terms) check_same(Op::kSum, terms[0], t);
  const Node& first = node(terms[0]);
  std::vector<double> out(val(first), val(first) + first.size);
  for (std::size_t t = 1; t < terms.size(); ++t) {
    const double* v = val(node(terms[t]));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return push(make(Op::kSum, first.shape, std::move(out), terms));
}

Var Tape::mean(std::span<const Var> terms) {
  if (terms.empty()) throw Error("mean: empty input list");
  for (Var t : terms) check_same(Op::kMean, terms[0], t);
  const Node& first = node(terms[0]);
  std::vector<double> out(first.size, 0.0);
  for (Var t : terms) {
    const double* v = val(node(t));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(terms.size());
  for (double& x : out) x *= inv;
  return push(make(Op::kMean, first.shape, std::move(out), terms));
}

Var Tape::maxpool(std::span<const Var> terms) {
  if (terms.empty()) throw Error("maxpool: empty input list");
  for (Var t : terms) check_same(Op::kMaxPool, terms[0], t);
  const Node& first = node(terms[0]);
  std::vector<double> out(val(first), val(first) + first.size);
  std::vector<std::uint32_t> arg(first.size, 0);
  for (std::size_t t = 1; t < terms.size(); ++t) {
    const double* v = val(node(terms[t]));
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        arg[i] = static_cast<std::uint32_t>(t);
      }
    }
  }
  Node n = make(Op::kMaxPool, first.shape, std::move(out), terms);
  n.aux_index = std::move(arg);
  return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
  check_same(Op::kDot, a, b);
  const Node& na = node(a);
  const double d = kernels::active().dot(val(na), val(node(b)), na.size);
  return push(make(Op::kDot, {1}, {d}, {a, b}));
}

Var Tape::cosine(Var a, Var b) {
  check_same(Op::kCosine, a, b);
  const Node& na = node(a);
  const double* pa = val(na);
  const double* pb = val(node(b));
  const auto& k = kernels::active();
  const double ab = k.dot(pa, pb, na.size);
  const double norm_a = std::sqrt(k.dot(pa, pa, na.size));
  const double norm_b = std::sqrt(k.dot(pb, pb, na.size));
  const double c = (norm_a == 0.0 || norm_b == 0.0) ? 0.0 : ab / (norm_a * norm_b);
  Node n = make(Op::kCosine, {1}, {c}, {a, b});
  n.aux = {norm_a, norm_b};
  return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  const Node& na = node(a);
  auto mask = dropout_mask(na.size, rate, rng);
  const double* pa = val(na);
  std::vector<double> out(na.size);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * mask[i];
  Node n = make(Op::kDropout, na.shape, std::move(out), {a});
  n.aux = std::move(mask);
  return push(std::move(n));
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return {val(n), n.size};
}

double Tape::scalar(Var v) const {
  const Node& n = node(v);
  if (n.size != 1) throw Error("scalar: node has shape " + shape_string(n.shape));
  return val(n)[0];
}

const Shape& Tape::shape(Var v) const { return node(v).shape; }

std::span<const double> Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.needs_grad) return {};
  return {n.ext_grad ? n.ext_grad : n.grad.data(), n.size};
}

void Tape::backward(Var loss) {
  Node& root = node(loss);
  if (root.size != 1) {
    throw Error("backward: loss must be a scalar, got shape " + shape_string(root.shape));
  }
  if (!root.needs_grad) return;
  grd(root)[0] += 1.0;
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    if (nodes_[id].needs_grad) backward_node(id);
  }
}

void Tape::backward_node(std::uint32_t id) {
  Node& out = nodes_[id];
  const double* g = grd(out);
  const std::size_t n = out.size;
  auto input = [&](std::size_t k) -> Node& { return nodes_[out.inputs[k]]; };
  const auto& k = kernels::active();

  switch (out.op) {
    case Op::kConstant:
    case Op::kParam:
    case Op::kRow:
      return;
    case Op::kMatMul: {
      Node& a = input(0);
      Node& b = input(1);
      const std::size_t m = a.shape[0];
      const std::size_t inner = a.shape[1];
      const std::size_t cols = n / m;
      if (cols == 1) {
        if (a.needs_grad) k.ger_acc(grd(a), m, inner, g, val(b));
        if (b.needs_grad) k.gemv_t_acc(val(a), m, inner, g, grd(b));
      } else {
        const double* pa = val(a);
        const double* pb = val(b);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < inner; ++p) {
            if (a.needs_grad) grd(a)[i * inner + p] += k.dot(g + i * cols, pb + p * cols, cols);
            if (b.needs_grad) k.axpy(pa[i * inner + p], g + i * cols, grd(b) + p * cols, cols);
          }
        }
      }
      return;
    }
    case Op::kAdd:
    case Op::kSum:
      for (std::size_t t = 0; t < out.inputs.size(); ++t) {
        Node& in = input(t);
        if (!in.needs_grad) continue;
        double* gi = grd(in);
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[i];
      }
      return;
    case Op::kSub: {
      Node& a = input(0);
      Node& b = input(1);
      if (a.needs_grad) {
        double* ga = grd(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (b.needs_grad) {
        double* gb = grd(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
      }
      return;
    }
    case Op::kMul: {
      Node& a = input(0);
      Node& b = input(1);
      const double* pa = val(a);
      const double* pb = val(b);
      if (a.needs_grad) {
        double* ga = grd(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
      }
      if (b.needs_grad) {
        double* gb = grd(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
      }
      return;
    }
    case Op::kScale: {
      Node& a = input(0);
      double* ga = grd(a);
      const double factor = out.aux[0];
      for (std::size_t i = 0; i < n; ++i) ga[i] += factor * g[i];
      return;
    }
    case Op::kOneMinus: {
      double* ga = grd(input(0));
      for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i];
      return;
    }
    case Op::kSigmoid: {
      double* ga = grd(input(0));
      const double* y = out.value.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      return;
    }
    case Op::kTanh: {
      double* ga = grd(input(0));
      const double* y = out.value.data();
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case Op::kRelu: {
      double* ga = grd(input(0));
      const double* y = out.value.data();
      for (std::size_t i = 0; i < n; ++i) {
        if (y[i] > 0.0) ga[i] += g[i];
      }
      return;
    }
    case Op::kConcat: {
      std::size_t offset = 0;
      for (std::size_t t = 0; t < out.inputs.size(); ++t) {
        Node& in = input(t);
        if (in.needs_grad) {
          double* gi = grd(in);
          for (std::size_t i = 0; i < in.size; ++i) gi[i] += g[offset + i];
        }
        offset += in.size;
      }
      return;
    }
    case Op::kMean: {
      const double inv = 1.0 / static_cast<double>(out.inputs.size());
      for (std::size_t t = 0; t < out.inputs.size(); ++t) {
        Node& in = input(t);
        if (!in.needs_grad) continue;
        double* gi = grd(in);
        for (std::size_t i = 0; i < n; ++i) gi[i] += inv * g[i];
      }
      return;
    }
    case Op::kMaxPool:
      for (std::size_t i = 0; i < n; ++i) {
        Node& in = input(out.aux_index[i]);
        if (in.needs_grad) grd(in)[i] += g[i];
      }
      return;
    case Op::kDot: {
      Node& a = input(0);
      Node& b = input(1);
      const std::size_t len = a.size;
      if (a.needs_grad) k.axpy(g[0], val(b), grd(a), len);
      if (b.needs_grad) k.axpy(g[0], val(a), grd(b), len);
      return;
    }
    case Op::kCosine: {
      Node& a = input(0);
      Node& b = input(1);
      const double norm_a = out.aux[0];
      const double norm_b = out.aux[1];
      if (norm_a == 0.0 || norm_b == 0.0) return;
      const double c = out.value[0];
      const std::size_t len = a.size;
      const double* pa = val(a);
      const double* pb = val(b);
      const double inv_ab = 1.0 / (norm_a * norm_b);
      // d cos / da = b / (|a||b|) - cos * a / |a|^2
      if (a.needs_grad) {
        k.axpy(g[0] * inv_ab, pb, grd(a), len);
        k.axpy(-g[0] * c / (norm_a * norm_a), pa, grd(a), len);
      }
      if (b.needs_grad) {
        k.axpy(g[0] * inv_ab, pa, grd(b), len);
        k.axpy(-g[0] * c / (norm_b * norm_b), pb, grd(b), len);
      }
      return;
    }
    case Op::kDropout: {
      double* ga = grd(input(0));
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * out.aux[i];
      return;
    }
  }
}

}  // namespace synkbqa::num
