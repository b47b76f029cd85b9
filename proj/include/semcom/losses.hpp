#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semcom/graph.hpp"

namespace semcom {

enum class CorrelationKind { intra, cross };

/// K x K cosine-normalised correlation between two feature batches.
struct CorrelationMatrix {
  Var values;
  CorrelationKind kind = CorrelationKind::intra;
  std::size_t first = 0;   // modality m
  std::size_t second = 0;  // modality n (== first for intra)

  std::size_t dim() const { return values.rows(); }
};

struct LossHyperParams {
  std::vector<double> lambda_modality{5e-3, 5e-3};
  double lambda_shared = 5e-3;
  double lambda_unique = 5e-3;
  std::size_t shared_dims = 8;
  double temperature = 0.5;
  double lambda_bt = 5e-3;

  double lambda_for(std::size_t m) const {
    if (lambda_modality.empty()) return 5e-3;
    return m < lambda_modality.size() ? lambda_modality[m] : lambda_modality.back();
  }

  void validate(std::size_t feature_dim) const {
    for (double l : lambda_modality)
      if (!(l > 0.0)) throw validation_error("LossHyperParams: lambda_modality entries must be > 0");
    if (!(lambda_shared > 0.0)) throw validation_error("LossHyperParams: lambda_shared must be > 0");
    if (!(lambda_unique > 0.0)) throw validation_error("LossHyperParams: lambda_unique must be > 0");
    if (!(lambda_bt > 0.0)) throw validation_error("LossHyperParams: lambda_bt must be > 0");
    if (!(temperature > 0.0)) throw validation_error("LossHyperParams: temperature must be > 0");
    if (shared_dims == 0 || shared_dims >= feature_dim)
      throw validation_error("LossHyperParams: shared_dims must satisfy 0 < K_sha < K");
  }
};

namespace detail {

inline CorrelationMatrix correlate(Var a, Var b, CorrelationKind kind, std::size_t m, std::size_t n) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error("correlation: feature shapes " + a.value().shape_string() + " and " +
                          b.value().shape_string() + " differ");
  if (a.rows() < 2) throw contract_error("correlation: batch size must be >= 2");
  // C = aᵀb ⊘ (‖a_·i‖ ‖b_·j‖)
  Var numer = matmul(transpose(a), b);
  Var denom = matmul(transpose(column_norm(a)), column_norm(b));
  return CorrelationMatrix{div_eps(numer, denom), kind, m, n};
}

// Σᵢ(target − Cᵢᵢ)² + λ·Σ_{i≠j} Cᵢⱼ² for a square block.
inline Var diagonal_offdiagonal(Var block, double diag_target, double lambda) {
  Graph& g = *block.graph;
  const std::size_t k = block.rows();
  Matrix eye = Matrix::identity(k);
  Matrix off(k, k, 1.0);
  for (std::size_t i = 0; i < k; ++i) off(i, i) = 0.0;
  Var on_diag = mul(block, g.constant(eye));
  Var diag_term;
  if (diag_target == 0.0) {
    diag_term = sum(square(on_diag));
  } else {
    for (double& v : eye.values()) v *= diag_target;
    diag_term = sum(square(sub(g.constant(std::move(eye)), on_diag)));
  }
  if (k == 1) return diag_term;
  Var off_term = sum(square(mul(block, g.constant(std::move(off)))));
  return add(diag_term, scale(off_term, lambda));
}

}  // namespace detail

/// Cᵢⱼ = Σ_b z_{b,i} z̃_{b,j} / (‖z_{·,i}‖‖z̃_{·,j}‖). No mean-centering.
inline CorrelationMatrix intra_corr(Var z, Var z_aug, std::size_t modality = 0) {
  return detail::correlate(z, z_aug, CorrelationKind::intra, modality, modality);
}

inline CorrelationMatrix cross_corr(Var z_m, Var z_n, std::size_t m = 0, std::size_t n = 1) {
  return detail::correlate(z_m, z_n, CorrelationKind::cross, m, n);
}

/// Diagonal alignment plus λ-weighted off-diagonal decorrelation.
inline Var intra_loss(const CorrelationMatrix& c, double lambda) {
  if (c.kind != CorrelationKind::intra) throw contract_error("intra_loss: expects an intra-modal matrix");
  return detail::diagonal_offdiagonal(c.values, 1.0, lambda);
}

/// Shared block C[0:K_sha, 0:K_sha] is pulled toward identity; unique block
/// C[K_sha:K, K_sha:K] toward zero. Entries outside both blocks are not penalised.
inline Var cross_loss(const CorrelationMatrix& c, const LossHyperParams& hp) {
  if (c.kind != CorrelationKind::cross) throw contract_error("cross_loss: expects a cross-modal matrix");
  const std::size_t k = c.dim();
  const std::size_t ks = hp.shared_dims;
  if (ks == 0 || ks >= k) throw validation_error("cross_loss: shared_dims must satisfy 0 < K_sha < K");
  Var shared = slice_block(c.values, 0, ks, 0, ks);
  Var unique = slice_block(c.values, ks, k, ks, k);
  return add(detail::diagonal_offdiagonal(shared, 1.0, hp.lambda_shared),
             detail::diagonal_offdiagonal(unique, 0.0, hp.lambda_unique));
}

/// Features of one modality: an un-augmented view and its augmented twin.
struct ModalityViews {
  Var z;
  Var z_aug;
};

/// Σ_m intra(m) + Σ_m Σ_{n≠m} cross(m, n), over all ordered modality pairs.
inline Var pretrain_loss(std::span<const ModalityViews> views, const LossHyperParams& hp,
                         std::vector<std::string>* warnings = nullptr) {
  if (views.empty()) throw contract_error("pretrain_loss: no modalities");
  for (const auto& v : views)
    if (v.z.rows() != views[0].z.rows() || v.z.cols() != views[0].z.cols() ||
        v.z_aug.rows() != v.z.rows() || v.z_aug.cols() != v.z.cols())
      throw dimension_error("pretrain_loss: feature shapes disagree across modalities");
  if (views.size() == 1 && warnings)
    warnings->push_back("pretrain_loss: single modality, cross-modal term omitted");

  Var total = intra_loss(intra_corr(views[0].z, views[0].z_aug, 0), hp.lambda_for(0));
  for (std::size_t m = 1; m < views.size(); ++m)
    total = add(total, intra_loss(intra_corr(views[m].z, views[m].z_aug, m), hp.lambda_for(m)));
  for (std::size_t m = 0; m < views.size(); ++m)
    for (std::size_t n = 0; n < views.size(); ++n)
      if (n != m) total = add(total, cross_loss(cross_corr(views[m].z, views[n].z, m, n), hp));
  return total;
}

/// NT-Xent over the 2B pooled embeddings, averaged over every anchor.
inline Var simclr_loss(Var z, Var z_aug, double temperature, std::vector<std::string>* warnings = nullptr) {
  if (z.rows() != z_aug.rows() || z.cols() != z_aug.cols())
    throw dimension_error("simclr_loss: view shapes differ");
  if (z.rows() < 1) throw contract_error("simclr_loss: empty batch");
  if (!(temperature > 0.0)) throw validation_error("simclr_loss: temperature must be > 0");
  Graph& g = *z.graph;
  const std::size_t b = z.rows();
  const std::size_t n = 2 * b;

  Var pooled = transpose(concat_cols({transpose(z), transpose(z_aug)}));
  Var norms = transpose(column_norm(transpose(pooled)));
  if (warnings)
    for (double v : norms.value().values())
      if (v <= kDivEpsilon) {
        warnings->push_back("simclr_loss: zero-norm embedding row, epsilon-guarded");
        break;
      }
  Var unit = div_eps(pooled, norms);
  Var sim = scale(matmul(unit, transpose(unit)), 1.0 / temperature);

  // Self-similarity is excluded by pushing it far below every other logit;
  // exp of the shifted value underflows to exactly zero.
  Matrix self_mask(n, n);
  Matrix positives(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    self_mask(i, i) = 1e9;
    positives(i, (i + b) % n) = 1.0;
  }
  Var logp = log_softmax(sub(sim, g.constant(std::move(self_mask))));
  return scale(sum(mul(logp, g.constant(std::move(positives)))), -1.0 / static_cast<double>(n));
}

/// Same functional form as intra_loss, applied to the correlation of two views.
inline Var barlow_twins_loss(Var z, Var z_aug, double lambda) {
  return intra_loss(intra_corr(z, z_aug), lambda);
}

/// Mean over labeled rows of −log p̂(correct class).
inline Var cross_entropy(Var log_probs, std::span<const int> labels, std::span<const std::uint8_t> labeled) {
  const std::size_t rows = log_probs.rows(), classes = log_probs.cols();
  if (labels.size() != rows || labeled.size() != rows)
    throw dimension_error("cross_entropy: labels/mask length must equal batch rows");
  Matrix pick(rows, classes);
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes)
      throw validation_error("cross_entropy: label out of range");
    if (!labeled[r]) continue;
    pick(r, static_cast<std::size_t>(labels[r])) = 1.0;
    ++count;
  }
  if (count == 0) throw contract_error("cross_entropy: no labeled rows in batch");
  Graph& g = *log_probs.graph;
  return scale(sum(mul(log_probs, g.constant(std::move(pick)))), -1.0 / static_cast<double>(count));
}

}  // namespace semcom
