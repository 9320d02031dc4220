#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ltof/autodiff/tensor.hpp"

namespace ltof::problems {

enum class Split : std::uint8_t { kTrain, kTest };

/// Aligned (z, zeta, x*) records. Row i of every matrix is the same record.
struct PtoDataset {
  RowMatrix z;
  RowMatrix zeta;
  std::optional<RowMatrix> xstar;
  /// Oracle objective values, aligned with xstar.
  std::vector<double> fstar;
  std::vector<Split> split;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return static_cast<std::size_t>(zeta.rows()); }
  bool has_oracle() const { return xstar.has_value() && fstar.size() == size(); }
  std::vector<std::size_t> indices(Split which) const;

  /// Throws on misaligned rows or a missing split.
  void validate() const;
};

/// Deterministic shuffle of 0..n-1; the first round(train_ratio * n)
/// records are training records.
std::vector<Split> make_split(std::size_t n, double train_ratio, std::uint64_t seed);

/// CSV with z_*, zeta_*, xstar_* columns plus a JSON sidecar holding the
/// metadata, split indices and oracle values.
void save_dataset(const PtoDataset& data, const std::string& csv_path, const std::string& meta_path);
PtoDataset load_dataset(const std::string& csv_path, const std::string& meta_path);

/// Gathers the listed rows.
RowMatrix take_rows(const RowMatrix& m, const std::vector<std::size_t>& rows);

}  // namespace ltof::problems
