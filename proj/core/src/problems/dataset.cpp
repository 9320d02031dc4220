#include "ltof/problems/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ltof/io.hpp"

namespace ltof::problems {

std::vector<std::size_t> PtoDataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

void PtoDataset::validate() const {
  const std::size_t n = size();
  if (z.rows() != 0 && static_cast<std::size_t>(z.rows()) != n) {
    throw ShapeError("dataset: z rows do not match zeta rows");
  }
  if (xstar && static_cast<std::size_t>(xstar->rows()) != n) {
    throw ShapeError("dataset: xstar rows do not match zeta rows");
  }
  if (!fstar.empty() && fstar.size() != n) throw ShapeError("dataset: fstar length mismatch");
  if (split.size() != n) throw ShapeError("dataset: split labels missing");
}

std::vector<Split> make_split(std::size_t n, double train_ratio, std::uint64_t seed) {
  if (train_ratio <= 0.0 || train_ratio >= 1.0) {
    throw std::invalid_argument("train ratio must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw, so the permutation does not depend on
  // the standard library's shuffle.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(n)));
  std::vector<Split> split(n, Split::kTest);
  for (std::size_t i = 0; i < n_train && i < n; ++i) split[order[i]] = Split::kTrain;
  return split;
}

RowMatrix take_rows(const RowMatrix& m, const std::vector<std::size_t>& rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

void save_dataset(const PtoDataset& data, const std::string& csv_path, const std::string& meta_path) {
  data.validate();
  CsvTable table;
  for (Eigen::Index j = 0; j < data.z.cols(); ++j) table.header.push_back("z_" + std::to_string(j));
  for (Eigen::Index j = 0; j < data.zeta.cols(); ++j) table.header.push_back("zeta_" + std::to_string(j));
  if (data.xstar) {
    for (Eigen::Index j = 0; j < data.xstar->cols(); ++j) {
      table.header.push_back("xstar_" + std::to_string(j));
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < data.z.cols(); ++j) row.push_back(format_double(data.z(r, j)));
    for (Eigen::Index j = 0; j < data.zeta.cols(); ++j) row.push_back(format_double(data.zeta(r, j)));
    if (data.xstar) {
      for (Eigen::Index j = 0; j < data.xstar->cols(); ++j) {
        row.push_back(format_double((*data.xstar)(r, j)));
      }
    }
    table.rows.push_back(std::move(row));
  }

  nlohmann::json meta = data.metadata;
  meta["split"]["train"] = data.indices(Split::kTrain);
  meta["split"]["test"] = data.indices(Split::kTest);
  if (!data.fstar.empty()) meta["fstar"] = data.fstar;
  write_file_atomic(csv_path, to_csv(table));
  write_file_atomic(meta_path, meta.dump(1) + "\n");
}

PtoDataset load_dataset(const std::string& csv_path, const std::string& meta_path) {
  const CsvTable table = read_csv(csv_path);
  const nlohmann::json meta = nlohmann::json::parse(read_file(meta_path));

  std::vector<std::size_t> z_cols;
  std::vector<std::size_t> zeta_cols;
  std::vector<std::size_t> x_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& h = table.header[c];
    if (h.rfind("zeta_", 0) == 0) {
      zeta_cols.push_back(c);
    } else if (h.rfind("z_", 0) == 0) {
      z_cols.push_back(c);
    } else if (h.rfind("xstar_", 0) == 0) {
      x_cols.push_back(c);
    } else {
      throw IoError("unexpected dataset column " + h);
    }
  }

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  auto fill = [&](const std::vector<std::size_t>& cols) {
    RowMatrix m(n, static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        m(i, static_cast<Eigen::Index>(j)) = std::stod(table.rows[static_cast<std::size_t>(i)][cols[j]]);
      }
    }
    return m;
  };

  PtoDataset data;
  data.z = fill(z_cols);
  data.zeta = fill(zeta_cols);
  if (!x_cols.empty()) data.xstar = fill(x_cols);
  if (meta.contains("fstar")) data.fstar = meta.at("fstar").get<std::vector<double>>();
  data.split.assign(static_cast<std::size_t>(n), Split::kTest);
  for (std::size_t i : meta.at("split").at("train").get<std::vector<std::size_t>>()) {
    if (i >= data.split.size()) throw IoError("split index out of range in " + meta_path);
    data.split[i] = Split::kTrain;
  }
  data.metadata = meta;
  data.metadata.erase("split");
  data.metadata.erase("fstar");
  data.validate();
  return data;
}

}  // namespace ltof::problems
