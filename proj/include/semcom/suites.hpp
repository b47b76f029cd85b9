#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/gradcheck.hpp"
#include "semcom/infotheory.hpp"
#include "semcom/losses.hpp"
#include "semcom/random.hpp"

namespace semcom {

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

namespace detail {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = standard_normal(rng);
  return m;
}

// Weighted sum Σ W⊙A turns a matrix-valued op into a scalar with a generic
// upstream gradient.
inline Var weighted_sum(Var a, const Matrix& w) { return sum(mul(a, a.graph->constant(w))); }

}  // namespace detail

/// Central-difference checks of every loss and of the differentiable channel
/// path on random inputs with batch `b` and feature width `k`.
inline std::vector<NamedGradCheck> loss_gradient_suite(std::uint64_t seed = 1, std::size_t b = 8,
                                                       std::size_t k = 4, double step = 1e-5,
                                                       double tolerance = 1e-4) {
  Rng rng = make_rng(seed, 0x9c);
  const Matrix z = detail::random_matrix(b, k, rng);
  const Matrix z_aug = detail::random_matrix(b, k, rng);
  const Matrix w = detail::random_matrix(k, k, rng);
  const Matrix four_views = detail::random_matrix(b, 4 * k, rng);
  const Matrix two_views = detail::random_matrix(b, 2 * k, rng);
  const Matrix logits = detail::random_matrix(b, k, rng);
  const Matrix wz = detail::random_matrix(b, k, rng);

  std::vector<int> labels(b);
  std::vector<std::uint8_t> mask(b, 1);
  for (std::size_t i = 0; i < b; ++i) labels[i] = static_cast<int>(i % k);
  mask[b - 1] = 0;

  LossHyperParams hp;
  hp.shared_dims = k / 2;

  auto views_of = [k](Var x, std::size_t i) { return slice_block(x, 0, x.rows(), i * k, (i + 1) * k); };

  std::vector<std::pair<std::string, std::pair<GraphFunction, Matrix>>> cases;
  cases.push_back({"intra_corr", {[&](Graph& g, Var x) {
                                    return detail::weighted_sum(intra_corr(x, g.constant(z_aug)).values, w);
                                  },
                                  z}});
  cases.push_back({"intra_loss", {[&](Graph& g, Var x) {
                                    return intra_loss(intra_corr(x, g.constant(z_aug)), hp.lambda_for(0));
                                  },
                                  z}});
  cases.push_back({"cross_corr", {[&](Graph& g, Var x) {
                                    return detail::weighted_sum(cross_corr(x, g.constant(z_aug)).values, w);
                                  },
                                  z}});
  cases.push_back({"cross_loss", {[&](Graph& g, Var x) {
                                    return cross_loss(cross_corr(x, g.constant(z_aug)), hp);
                                  },
                                  z}});
  cases.push_back({"pretrain_loss", {[&](Graph&, Var x) {
                                       std::vector<ModalityViews> views{{views_of(x, 0), views_of(x, 1)},
                                                                        {views_of(x, 2), views_of(x, 3)}};
                                       return pretrain_loss(views, hp);
                                     },
                                     four_views}});
  cases.push_back({"simclr_loss", {[&](Graph&, Var x) {
                                     return simclr_loss(views_of(x, 0), views_of(x, 1), hp.temperature);
                                   },
                                   two_views}});
  cases.push_back({"barlow_twins_loss", {[&](Graph&, Var x) {
                                           return barlow_twins_loss(views_of(x, 0), views_of(x, 1), hp.lambda_bt);
                                         },
                                         two_views}});
  cases.push_back({"cross_entropy", {[&](Graph&, Var x) { return cross_entropy(log_softmax(x), labels, mask); },
                                     logits}});
  cases.push_back({"power_normalization", {[&](Graph&, Var x) {
                                             return detail::weighted_sum(normalize_power(x), wz);
                                           },
                                           z}});

  std::vector<NamedGradCheck> out;
  for (auto& [name, c] : cases) out.push_back({name, grad_check(c.first, c.second, step, tolerance)});
  return out;
}

struct MiSuiteReport {
  std::size_t joints = 0;
  double max_residual = 0.0;
  double xor_interaction = 0.0;
  bool pass = false;
};

/// Joint over three binary variables with Y = Z¹ xor Z², uniform inputs.
inline DiscreteJoint xor_joint() {
  DiscreteJoint j(2, 2, 2);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) j.at(a, b, a ^ b) = 0.25;
  return j;
}

/// Dirichlet(1,…,1) joint with each alphabet size drawn from {2, …, max_alphabet}.
inline DiscreteJoint random_joint(Rng& rng, std::size_t max_alphabet = 4) {
  std::uniform_int_distribution<std::size_t> size(2, max_alphabet);
  const std::size_t a1 = size(rng), a2 = size(rng), ay = size(rng);
  DiscreteJoint j(a1, a2, ay);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  double total = 0.0;
  for (double& v : j.p) total += (v = gamma(rng));
  for (double& v : j.p) v /= total;
  return j;
}

/// Both Venn identities on `trials` random joints plus the XOR joint.
inline MiSuiteReport mi_identity_suite(std::size_t trials = 100, std::uint64_t seed = 1, double tolerance = 1e-12) {
  MiSuiteReport r;
  Rng rng = make_rng(seed, 0x31);
  bool ok = true;
  auto take = [&](const DiscreteJoint& j) {
    const auto d = verify_decomposition(j, tolerance);
    r.max_residual = std::max({r.max_residual, d.sum_of_single_residual, d.joint_residual});
    ok = ok && d.pass;
    ++r.joints;
  };
  for (std::size_t t = 0; t < trials; ++t) take(random_joint(rng));
  const auto x = xor_joint();
  take(x);
  r.xor_interaction = mi_query(x, MiExpr::interaction);
  r.pass = ok && r.xor_interaction == -1.0;
  return r;
}

}  // namespace semcom
