#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

/// Probability table over (Z¹, Z², Y), index order [z1][z2][y].
struct DiscreteJoint {
  std::size_t a1 = 0, a2 = 0, ay = 0;
  std::vector<double> p;
  std::vector<std::string> warnings;

  DiscreteJoint() = default;
  DiscreteJoint(std::size_t n1, std::size_t n2, std::size_t ny)
      : a1(n1), a2(n2), ay(ny), p(n1 * n2 * ny, 0.0) {}

  double& at(std::size_t i, std::size_t j, std::size_t k) { return p[(i * a2 + j) * ay + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return p[(i * a2 + j) * ay + k]; }

  void validate() const {
    if (a1 == 0 || a2 == 0 || ay == 0) throw validation_error("DiscreteJoint: empty alphabet");
    if (p.size() != a1 * a2 * ay) throw validation_error("DiscreteJoint: table size mismatch");
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw validation_error("DiscreteJoint: negative or non-finite entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw validation_error("DiscreteJoint: probabilities sum to " + std::to_string(total));
  }
};

enum class MiExpr {
  z1_y,          // I(Z¹;Y)
  z2_y,          // I(Z²;Y)
  z1_y_given_z2, // I(Z¹;Y|Z²)
  z2_y_given_z1, // I(Z²;Y|Z¹)
  interaction,   // I(Z¹;Z²;Y) := I(Z¹;Y) − I(Z¹;Y|Z²)
  joint_y,       // I(Z¹,Z²;Y)
};

namespace detail {

struct Marginals {
  std::vector<double> p1, p2, py, p12, p1y, p2y;
};

inline Marginals marginals(const DiscreteJoint& j) {
  Marginals m;
  m.p1.assign(j.a1, 0.0);
  m.p2.assign(j.a2, 0.0);
  m.py.assign(j.ay, 0.0);
  m.p12.assign(j.a1 * j.a2, 0.0);
  m.p1y.assign(j.a1 * j.ay, 0.0);
  m.p2y.assign(j.a2 * j.ay, 0.0);
  for (std::size_t a = 0; a < j.a1; ++a)
    for (std::size_t b = 0; b < j.a2; ++b)
      for (std::size_t y = 0; y < j.ay; ++y) {
        const double v = j.at(a, b, y);
        m.p1[a] += v;
        m.p2[b] += v;
        m.py[y] += v;
        m.p12[a * j.a2 + b] += v;
        m.p1y[a * j.ay + y] += v;
        m.p2y[b * j.ay + y] += v;
      }
  return m;
}

// Each term is p·log2(ratio), with 0·log 0 := 0.
inline double plog(double p, double ratio) { return p > 0.0 ? p * std::log2(ratio) : 0.0; }

}  // namespace detail

/// Exact information quantity in bits.
inline double mi_query(const DiscreteJoint& j, MiExpr expr) {
  j.validate();
  const auto m = detail::marginals(j);
  auto i1y = [&] {
    double s = 0.0;
    for (std::size_t a = 0; a < j.a1; ++a)
      for (std::size_t y = 0; y < j.ay; ++y) {
        const double v = m.p1y[a * j.ay + y];
        if (v > 0.0) s += detail::plog(v, v / (m.p1[a] * m.py[y]));
      }
    return s;
  };
  auto i2y = [&] {
    double s = 0.0;
    for (std::size_t b = 0; b < j.a2; ++b)
      for (std::size_t y = 0; y < j.ay; ++y) {
        const double v = m.p2y[b * j.ay + y];
        if (v > 0.0) s += detail::plog(v, v / (m.p2[b] * m.py[y]));
      }
    return s;
  };
  // I(Z¹;Y|Z²) = Σ p(a,b,y) log p(a,b,y)p(b) / (p(a,b)p(b,y))
  auto i1y_given_2 = [&] {
    double s = 0.0;
    for (std::size_t a = 0; a < j.a1; ++a)
      for (std::size_t b = 0; b < j.a2; ++b)
        for (std::size_t y = 0; y < j.ay; ++y) {
          const double v = j.at(a, b, y);
          if (v > 0.0) s += detail::plog(v, v * m.p2[b] / (m.p12[a * j.a2 + b] * m.p2y[b * j.ay + y]));
        }
    return s;
  };
  auto i2y_given_1 = [&] {
    double s = 0.0;
    for (std::size_t a = 0; a < j.a1; ++a)
      for (std::size_t b = 0; b < j.a2; ++b)
        for (std::size_t y = 0; y < j.ay; ++y) {
          const double v = j.at(a, b, y);
          if (v > 0.0) s += detail::plog(v, v * m.p1[a] / (m.p12[a * j.a2 + b] * m.p1y[a * j.ay + y]));
        }
    return s;
  };
  auto ijoint = [&] {
    double s = 0.0;
    for (std::size_t a = 0; a < j.a1; ++a)
      for (std::size_t b = 0; b < j.a2; ++b)
        for (std::size_t y = 0; y < j.ay; ++y) {
          const double v = j.at(a, b, y);
          if (v > 0.0) s += detail::plog(v, v / (m.p12[a * j.a2 + b] * m.py[y]));
        }
    return s;
  };
  switch (expr) {
    case MiExpr::z1_y: return i1y();
    case MiExpr::z2_y: return i2y();
    case MiExpr::z1_y_given_z2: return i1y_given_2();
    case MiExpr::z2_y_given_z1: return i2y_given_1();
    case MiExpr::interaction: return i1y() - i1y_given_2();
    case MiExpr::joint_y: return ijoint();
  }
  return 0.0;
}

/// Entropy of Y in bits.
inline double label_entropy(const DiscreteJoint& j) {
  const auto m = detail::marginals(j);
  double h = 0.0;
  for (double v : m.py)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

struct DecompositionReport {
  double sum_of_single_residual = 0.0;  // I(Z¹;Y)+I(Z²;Y) = 2·shared + unique¹ + unique²
  double joint_residual = 0.0;          // I(Z¹,Z²;Y) = shared + unique¹ + unique²
  double interaction = 0.0;
  bool pass = false;
};

/// Residuals of the two Venn decompositions; both are identities under the
/// interaction-information convention, so they should vanish to rounding.
inline DecompositionReport verify_decomposition(const DiscreteJoint& j, double tolerance = 1e-12) {
  const double i1 = mi_query(j, MiExpr::z1_y);
  const double i2 = mi_query(j, MiExpr::z2_y);
  const double u1 = mi_query(j, MiExpr::z1_y_given_z2);
  const double u2 = mi_query(j, MiExpr::z2_y_given_z1);
  const double shared = mi_query(j, MiExpr::interaction);
  const double joint = mi_query(j, MiExpr::joint_y);
  DecompositionReport r;
  r.interaction = shared;
  r.sum_of_single_residual = std::abs(i1 + i2 - 2.0 * shared - u1 - u2);
  r.joint_residual = std::abs(joint - shared - u1 - u2);
  r.pass = r.sum_of_single_residual <= tolerance && r.joint_residual <= tolerance;
  return r;
}

/// Equal-width histogram estimate of the joint over the first `dims_used`
/// feature columns of each modality.
inline DiscreteJoint bin_features(const Matrix& z1, const Matrix& z2, std::span<const int> labels,
                                  std::size_t bins_per_dim, std::size_t dims_used) {
  if (bins_per_dim < 2) throw validation_error("bin_features: need at least 2 bins");
  if (dims_used == 0 || dims_used > 2) throw validation_error("bin_features: dims_used must be 1 or 2");
  if (z1.rows() != labels.size() || z2.rows() != labels.size())
    throw dimension_error("bin_features: row count mismatch");
  if (z1.cols() < dims_used || z2.cols() < dims_used)
    throw dimension_error("bin_features: fewer feature columns than dims_used");
  if (labels.empty()) throw validation_error("bin_features: no samples");

  int max_label = 0;
  for (int y : labels) {
    if (y < 0) throw validation_error("bin_features: negative label");
    max_label = std::max(max_label, y);
  }
  const auto ay = static_cast<std::size_t>(max_label) + 1;

  auto cell_index = [&](const Matrix& z) {
    std::vector<std::size_t> cell(z.rows(), 0);
    for (std::size_t d = 0; d < dims_used; ++d) {
      double lo = z(0, d), hi = z(0, d);
      for (std::size_t r = 0; r < z.rows(); ++r) {
        lo = std::min(lo, z(r, d));
        hi = std::max(hi, z(r, d));
      }
      const double width = (hi - lo) / static_cast<double>(bins_per_dim);
      for (std::size_t r = 0; r < z.rows(); ++r) {
        std::size_t bin = 0;
        if (width > 0.0)
          bin = std::min(bins_per_dim - 1, static_cast<std::size_t>((z(r, d) - lo) / width));
        cell[r] = cell[r] * bins_per_dim + bin;
      }
    }
    return cell;
  };
  std::size_t alphabet = 1;
  for (std::size_t d = 0; d < dims_used; ++d) alphabet *= bins_per_dim;

  const auto c1 = cell_index(z1);
  const auto c2 = cell_index(z2);
  DiscreteJoint j(alphabet, alphabet, ay);
  const double w = 1.0 / static_cast<double>(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) j.at(c1[r], c2[r], static_cast<std::size_t>(labels[r])) += w;
  // Renormalise so the table sums to 1 within rounding.
  double total = 0.0;
  for (double v : j.p) total += v;
  for (double& v : j.p) v /= total;
  if (labels.size() < 10 * j.p.size())
    j.warnings.push_back("bin_features: fewer than 10 samples per cell; estimate unreliable");
  return j;
}

}  // namespace semcom
