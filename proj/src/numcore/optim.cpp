#include "synkbqa/numcore/optim.hpp"

#include <cmath>

#include "synkbqa/error.hpp"

namespace synkbqa::num {

void Adam::step(ParamStore& params) {
  for (auto& [name, p] : params) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw Error("adam: non-finite gradient in parameter " + name);
    }
  }
  ++t_;
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    if (p.grad().empty()) continue;
    auto [it, inserted] = moments_.try_emplace(name);
    Moments& mo = it->second;
    if (inserted) {
      mo.m.assign(p.size(), 0.0);
      mo.v.assign(p.size(), 0.0);
    }
    auto data = p.data();
    auto grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g;
      mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = mo.m[i] / bias1;
      const double v_hat = mo.v[i] / bias2;
      data[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace synkbqa::num
