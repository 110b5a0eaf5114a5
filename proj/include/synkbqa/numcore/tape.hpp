#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synkbqa/numcore/init.hpp"
#include "synkbqa/numcore/tensor.hpp"

namespace synkbqa::num {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::uint32_t kInvalid = 0xffffffffu;
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

enum class Op : std::uint8_t {
  kConstant,
  kParam,
  kRow,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kOneMinus,
  kSigmoid,
  kTanh,
  kRelu,
  kConcat,
  kSum,
  kMean,
  kMaxPool,
  kDot,
  kCosine,
  kDropout,
};

std::string_view op_name(Op op);

/// Records a computation for reverse-mode differentiation.
///
/// Parameters enter the tape through param() or row(); their values are read
/// in place and backward() accumulates into the parameter's own gradient
/// buffer (call zero_grad on the parameters between steps). Constants never
/// receive gradient. Operations are appended in evaluation order, so the node
/// list is topologically sorted by construction.
///
/// A tape is single-threaded. Parameters must not be resized or mutated while
/// a tape that references them is alive.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  Var constant(std::vector<double> values);
  Var param(Tensor& p);
  /// Row r of a rank-2 parameter as a vector.
  Var row(Tensor& table, std::size_t r);

  /// [m,k] x [k,n] -> [m,n]; a rank-1 right operand gives a rank-1 result.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  /// 1 - a
  Var one_minus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var concat(std::span<const Var> parts);
  Var sum(std::span<const Var> terms);
  Var mean(std::span<const Var> terms);
  /// Coordinatewise max; ties send gradient to the first maximal input.
  Var maxpool(std::span<const Var> terms);
  Var dot(Var a, Var b);
  /// Cosine similarity; 0 (with zero gradient) when either side is all zeros.
  Var cosine(Var a, Var b);
  Var dropout(Var a, double rate, Rng& rng, bool training);

  std::span<const double> value(Var v) const;
  double scalar(Var v) const;
  const Shape& shape(Var v) const;
  /// Gradient of an intermediate after backward(); empty for constants.
  std::span<const double> grad(Var v) const;

  /// Propagates d(loss)/d(node) to every node that depends on a parameter.
  /// Throws when loss is not a scalar.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::kConstant;
    Shape shape;
    std::size_t size = 0;
    std::vector<double> value;
    std::vector<double> grad;
    const double* ext_value = nullptr;
    double* ext_grad = nullptr;
    bool needs_grad = false;
    std::vector<std::uint32_t> inputs;
    std::vector<double> aux;
    std::vector<std::uint32_t> aux_index;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  const double* val(const Node& n) const { return n.ext_value ? n.ext_value : n.value.data(); }
  double* grd(Node& n) { return n.ext_grad ? n.ext_grad : n.grad.data(); }
  Var push(Node n);
  Node make(Op op, Shape shape, std::vector<double> value,
            std::initializer_list<Var> inputs);
  Node make(Op op, Shape shape, std::vector<double> value, std::span<const Var> inputs);
  void check_same(Op op, Var a, Var b) const;
  void backward_node(std::uint32_t id);

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::uint32_t> params_;
  std::unordered_map<const double*, std::uint32_t> rows_;
};

}  // namespace synkbqa::num
