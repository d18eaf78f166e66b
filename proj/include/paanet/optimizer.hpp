#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "paanet/model.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 30;
  int batch_size = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  std::string checkpoint_dir;  // best.ckpt / last.ckpt land here when set
  std::string log_path;        // per-epoch tab-separated log when set

  void validate() const {
    detail::require(learning_rate > 0, "train config: learning_rate must be > 0");
    detail::require(epochs >= 1, "train config: epochs must be >= 1");
    detail::require(batch_size >= 1, "train config: batch_size must be >= 1");
    detail::require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
                    "train config: betas must lie in [0,1)");
    detail::require(adam_eps > 0, "train config: adam_eps must be > 0");
  }
};

// First/second moment buffers mirroring the parameter set, plus the shared
// step counter.
template <typename T>
struct AdamStateT {
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> u;
  std::uint64_t t = 0;

  static AdamStateT zeros_like(const ParamMap<T>& params) {
    AdamStateT s;
    for (const auto& [path, tensor] : params) {
      s.m[path].assign(tensor.values().size(), T(0));
      s.u[path].assign(tensor.values().size(), T(0));
    }
    return s;
  }
};

using AdamState = AdamStateT<float>;

// One bias-corrected Adam update over every parameter. A parameter with no
// populated gradient is treated as a detached-subgraph bug and rejected.
template <typename T>
void adam_step(ParamMap<T>& params, AdamStateT<T>& state, const TrainConfig& cfg) {
  cfg.validate();
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  for (auto& [path, tensor] : params) {
    if (!tensor.has_grad())
      throw std::runtime_error("adam_step: missing gradient for '" + path + "'");
    auto mit = state.m.find(path);
    auto uit = state.u.find(path);
    if (mit == state.m.end() || uit == state.u.end() ||
        mit->second.size() != tensor.values().size())
      throw std::runtime_error("adam_step: state does not mirror parameter '" + path + "'");
    std::vector<T>& m = mit->second;
    std::vector<T>& u = uit->second;
    const std::vector<T>& g = tensor.grad();
    T* w = tensor.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = cfg.adam_beta1 * static_cast<double>(m[i]) + (1.0 - cfg.adam_beta1) * gi;
      const double ui =
          cfg.adam_beta2 * static_cast<double>(u[i]) + (1.0 - cfg.adam_beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      u[i] = static_cast<T>(ui);
      w[i] = static_cast<T>(static_cast<double>(w[i]) -
                            cfg.learning_rate * (mi / c1) / (std::sqrt(ui / c2) + cfg.adam_eps));
    }
  }
}

}  // namespace paanet
