#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semcom/random.hpp"
#include "semcom/tensor.hpp"

namespace semcom {

/// Latent-variable model for a multi-modal classification set. Each sample has
/// a shared latent s (seen by every modality) and a per-modality unique latent
/// u^m. The class signal is split between them by `shared_fraction`.
struct GenConfig {
  std::size_t num_classes = 10;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 100;
  std::size_t shared_dim = 4;
  std::vector<std::size_t> unique_dims{4, 4};
  std::vector<std::size_t> observed_dims{32, 32};
  double separation = 1.5;
  double shared_fraction = 0.5;
  double noise = 0.3;
  std::uint64_t seed = 7;

  std::size_t num_modalities() const { return observed_dims.size(); }

  void validate() const {
    std::vector<std::string> bad;
    if (num_classes < 2) bad.push_back("num_classes");
    if (train_per_class == 0) bad.push_back("train_per_class");
    if (test_per_class == 0) bad.push_back("test_per_class");
    if (observed_dims.empty()) bad.push_back("observed_dims");
    if (unique_dims.size() != observed_dims.size()) bad.push_back("unique_dims");
    for (std::size_t m = 0; m < std::min(unique_dims.size(), observed_dims.size()); ++m)
      if (shared_dim + unique_dims[m] > observed_dims[m] || observed_dims[m] == 0)
        bad.push_back("observed_dims[" + std::to_string(m) + "]");
    if (!(shared_fraction >= 0.0 && shared_fraction <= 1.0)) bad.push_back("shared_fraction");
    if (!(separation >= 0.0)) bad.push_back("separation");
    if (!(noise >= 0.0)) bad.push_back("noise");
    if (!bad.empty()) {
      std::string msg = "GenConfig: invalid field(s):";
      for (const auto& b : bad) msg += " " + b;
      throw validation_error(msg);
    }
  }
};

enum class Split { train, test };

struct MultiModalDataset {
  std::vector<Matrix> modalities;
  std::vector<int> labels;
  std::vector<std::uint8_t> labeled_mask;
  Split split = Split::train;
  std::size_t num_classes = 0;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t num_modalities() const noexcept { return modalities.size(); }

  std::size_t num_labeled() const {
    return static_cast<std::size_t>(std::count(labeled_mask.begin(), labeled_mask.end(), 1));
  }

  void validate() const {
    if (labeled_mask.size() != labels.size())
      throw validation_error("dataset: labeled_mask length differs from label count");
    for (const auto& x : modalities)
      if (x.rows() != labels.size()) throw dimension_error("dataset: modality row count mismatch");
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
        throw validation_error("dataset: label out of range");
  }

  MultiModalDataset select(std::span<const std::size_t> rows) const {
    MultiModalDataset out;
    out.split = split;
    out.num_classes = num_classes;
    for (const auto& x : modalities) out.modalities.push_back(x.select_rows(rows));
    for (auto r : rows) {
      out.labels.push_back(labels[r]);
      out.labeled_mask.push_back(labeled_mask[r]);
    }
    return out;
  }
};

namespace detail {

// D x d matrix with orthonormal columns (modified Gram-Schmidt on a Gaussian draw).
inline Matrix orthonormal_columns(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix a(rows, cols);
  for (double& v : a.values()) v = standard_normal(rng);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += a(r, j) * a(r, k);
      for (std::size_t r = 0; r < rows; ++r) a(r, j) -= dot * a(r, k);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < rows; ++r) norm += a(r, j) * a(r, j);
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < rows; ++r) a(r, j) /= norm;
  }
  return a;
}

}  // namespace detail

/// Draws a train and a test split from one seeded latent model. Class means and
/// mixing matrices are drawn once, so both splits share the class geometry.
inline std::pair<MultiModalDataset, MultiModalDataset> gen_dataset(const GenConfig& cfg) {
  cfg.validate();
  const std::size_t M = cfg.num_modalities();
  const std::size_t C = cfg.num_classes;
  const double shared_scale = cfg.shared_fraction * cfg.separation;
  const double unique_scale = (1.0 - cfg.shared_fraction) * cfg.separation;

  Rng mean_rng = make_rng(cfg.seed, streams::data_means);
  Matrix shared_means(C, cfg.shared_dim);
  for (double& v : shared_means.values()) v = standard_normal(mean_rng);
  std::vector<Matrix> unique_means;
  for (std::size_t m = 0; m < M; ++m) {
    Matrix mu(C, cfg.unique_dims[m]);
    for (double& v : mu.values()) v = standard_normal(mean_rng);
    unique_means.push_back(std::move(mu));
  }

  Rng mix_rng = make_rng(cfg.seed, streams::data_mixing);
  std::vector<Matrix> mixing;
  for (std::size_t m = 0; m < M; ++m)
    mixing.push_back(
        detail::orthonormal_columns(cfg.observed_dims[m], cfg.shared_dim + cfg.unique_dims[m], mix_rng));

  Rng sample_rng = make_rng(cfg.seed, streams::data_samples);
  auto draw = [&](std::size_t per_class, Split split) {
    MultiModalDataset ds;
    ds.split = split;
    ds.num_classes = C;
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < per_class; ++i) ds.labels.push_back(static_cast<int>(c));
    std::shuffle(ds.labels.begin(), ds.labels.end(), sample_rng);
    const std::size_t n = ds.labels.size();
    ds.labeled_mask.assign(n, 1);
    for (std::size_t m = 0; m < M; ++m) ds.modalities.emplace_back(n, cfg.observed_dims[m]);

    std::vector<double> latent;
    for (std::size_t b = 0; b < n; ++b) {
      const auto y = static_cast<std::size_t>(ds.labels[b]);
      std::vector<double> s(cfg.shared_dim);
      for (std::size_t k = 0; k < cfg.shared_dim; ++k)
        s[k] = shared_means(y, k) * shared_scale + standard_normal(sample_rng);
      for (std::size_t m = 0; m < M; ++m) {
        latent = s;
        for (std::size_t k = 0; k < cfg.unique_dims[m]; ++k)
          latent.push_back(unique_means[m](y, k) * unique_scale + standard_normal(sample_rng));
        const Matrix& a = mixing[m];
        auto row = ds.modalities[m].row(b);
        for (std::size_t d = 0; d < a.rows(); ++d) {
          double v = 0.0;
          for (std::size_t k = 0; k < a.cols(); ++k) v += a(d, k) * latent[k];
          row[d] = v + cfg.noise * standard_normal(sample_rng);
        }
      }
    }
    return ds;
  };

  auto train = draw(cfg.train_per_class, Split::train);
  auto test = draw(cfg.test_per_class, Split::test);
  return {std::move(train), std::move(test)};
}

struct AugConfig {
  double jitter = 0.5;
  double dropout = 0.1;
  std::uint64_t stream = streams::augmentation;

  void validate() const {
    if (!(jitter >= 0.0)) throw validation_error("AugConfig: jitter must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw validation_error("AugConfig: dropout must be in [0,1)");
  }
};

/// x̃ = (x + γ·η) ⊙ mask / (1 − p), η ~ N(0,1) and mask ~ Bernoulli(1 − p).
inline std::vector<Matrix> augment(std::span<const Matrix> batch, const AugConfig& aug, Rng& rng) {
  aug.validate();
  if (batch.empty()) throw contract_error("augment: empty batch");
  std::vector<Matrix> out;
  out.reserve(batch.size());
  const double keep_scale = 1.0 / (1.0 - aug.dropout);
  for (const Matrix& x : batch) {
    if (x.empty()) throw contract_error("augment: empty batch");
    Matrix y = x;
    if (aug.jitter == 0.0 && aug.dropout == 0.0) {
      out.push_back(std::move(y));
      continue;
    }
    for (double& v : y.values()) {
      if (aug.jitter > 0.0) v += aug.jitter * standard_normal(rng);
      if (aug.dropout > 0.0) v = uniform01(rng) < aug.dropout ? 0.0 : v * keep_scale;
    }
    out.push_back(std::move(y));
  }
  return out;
}

/// Marks a class-stratified random fraction of rows as labeled. The total
/// labeled count is round(fraction·N); per-class quotas use largest remainders.
inline MultiModalDataset subset_labels(const MultiModalDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw validation_error("subset_labels: fraction must be in (0,1]");
  MultiModalDataset out = ds;
  const std::size_t n = ds.size();
  if (fraction == 1.0) {
    out.labeled_mask.assign(n, 1);
    return out;
  }
  Rng rng = make_rng(seed, streams::label_subset);
  const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  out.labeled_mask.assign(n, 0);

  if (static_cast<double>(total) < static_cast<double>(ds.num_classes)) {
    out.warnings.push_back("subset_labels: fraction too small to cover every class; sampling unstratified");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < total; ++i) out.labeled_mask[idx[i]] = 1;
    return out;
  }

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  std::vector<std::size_t> quota(ds.num_classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    const double exact = fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned)
    ++quota[remainders[i].second];

  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    auto& rows = by_class[c];
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 0; i < std::min(quota[c], rows.size()); ++i) out.labeled_mask[rows[i]] = 1;
  }
  return out;
}

// CSV layout: modality_<m>.csv with header f0..f{D-1}; labels.csv with
// header "label,labeled_mask".

inline void write_dataset_csv(const MultiModalDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t m = 0; m < ds.num_modalities(); ++m) {
    std::ofstream f(dir / ("modality_" + std::to_string(m) + ".csv"));
    if (!f) throw std::runtime_error("write_dataset_csv: cannot open output in " + dir.string());
    const Matrix& x = ds.modalities[m];
    for (std::size_t c = 0; c < x.cols(); ++c) f << (c ? "," : "") << 'f' << c;
    f << '\n';
    f.precision(17);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) f << (c ? "," : "") << x(r, c);
      f << '\n';
    }
  }
  std::ofstream f(dir / "labels.csv");
  if (!f) throw std::runtime_error("write_dataset_csv: cannot open labels.csv");
  f << "label,labeled_mask\n";
  for (std::size_t i = 0; i < ds.size(); ++i) f << ds.labels[i] << ',' << int(ds.labeled_mask[i]) << '\n';
}

inline MultiModalDataset read_dataset_csv(const std::filesystem::path& dir, std::size_t num_modalities,
                                          std::size_t num_classes) {
  auto read_rows = [](const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("read_dataset_csv: cannot open " + p.string());
    std::string line;
    std::getline(f, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  MultiModalDataset ds;
  ds.num_classes = num_classes;
  for (const auto& row : read_rows(dir / "labels.csv")) {
    if (row.size() != 2) throw validation_error("labels.csv: expected 2 columns");
    ds.labels.push_back(static_cast<int>(row[0]));
    ds.labeled_mask.push_back(row[1] != 0.0 ? 1 : 0);
  }
  for (std::size_t m = 0; m < num_modalities; ++m) {
    auto rows = read_rows(dir / ("modality_" + std::to_string(m) + ".csv"));
    const std::size_t cols = rows.empty() ? 0 : rows[0].size();
    std::vector<double> data;
    for (auto& r : rows) {
      if (r.size() != cols) throw dimension_error("modality csv: ragged rows");
      data.insert(data.end(), r.begin(), r.end());
    }
    ds.modalities.emplace_back(rows.size(), cols, std::move(data));
  }
  ds.validate();
  return ds;
}

}  // namespace semcom
