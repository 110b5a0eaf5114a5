#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "synkbqa/numcore/params.hpp"

namespace synkbqa::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily per named
/// parameter on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from the gradients currently stored in `params`.
  /// If any gradient entry is non-finite nothing is updated and an Error
  /// naming the parameter is thrown.
  void step(ParamStore& params);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments, std::less<>> moments_;
};

}  // namespace synkbqa::num
