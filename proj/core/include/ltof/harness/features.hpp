#pragma once

#include <cstdint>

#include "ltof/autodiff/mlp.hpp"
#include "ltof/autodiff/tensor.hpp"

namespace ltof::harness {

/// Random ReLU network z = G^k(zeta) with k linear layers: k - 1 hidden
/// layers of width `hidden`, then a linear map to `width` features.
class FeatureGenerator {
 public:
  FeatureGenerator(std::size_t param_dim, std::size_t width, std::size_t k, std::uint64_t seed,
                   std::size_t hidden = 50);

  std::size_t k() const { return k_; }
  RowMatrix generate(const RowMatrix& zeta) const;

 private:
  std::size_t k_;
  ad::MlpModel net_;
};

/// z_i = G^k(zeta_i); k = 0 returns zeta unchanged (LtO inputs).
RowMatrix gen_features(const RowMatrix& zeta, std::size_t k, std::size_t width, std::uint64_t seed,
                       std::size_t hidden = 50);

}  // namespace ltof::harness
