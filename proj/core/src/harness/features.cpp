#include "ltof/harness/features.hpp"

#include <stdexcept>

namespace ltof::harness {

FeatureGenerator::FeatureGenerator(std::size_t param_dim, std::size_t width, std::size_t k,
                                   std::uint64_t seed, std::size_t hidden)
    : k_(k) {
  if (k == 0) throw std::invalid_argument("feature generator needs k >= 1");
  ad::MlpConfig config;
  config.layer_dims.push_back(param_dim);
  for (std::size_t l = 1; l < k; ++l) config.layer_dims.push_back(hidden);
  config.layer_dims.push_back(width);
  net_ = ad::MlpModel::init(config, seed);
}

RowMatrix FeatureGenerator::generate(const RowMatrix& zeta) const {
  return net_.predict(Tensor::from_eigen(zeta)).mat();
}

RowMatrix gen_features(const RowMatrix& zeta, std::size_t k, std::size_t width, std::uint64_t seed,
                       std::size_t hidden) {
  if (k == 0) return zeta;
  return FeatureGenerator(static_cast<std::size_t>(zeta.cols()), width, k, seed, hidden).generate(zeta);
}

}  // namespace ltof::harness
