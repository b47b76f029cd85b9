#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "semcom/graph.hpp"
#include "semcom/random.hpp"

namespace semcom {

using cplx = std::complex<double>;

enum class Fading { fixed, rayleigh_per_round };

/// snr_db = +infinity means a noiseless link.
inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct ChannelConfig {
  std::vector<cplx> coefficients{cplx{1.0, 0.0}, cplx{1.0, 0.0}};
  double snr_db = 10.0;
  Fading fading = Fading::fixed;
  std::uint64_t stream = streams::channel_train;

  cplx coefficient(std::size_t modality) const {
    return modality < coefficients.size() ? coefficients[modality] : cplx{1.0, 0.0};
  }

  /// Noise variance under unit average signal power: 10^(−snr_db/10).
  double noise_variance() const {
    if (snr_db == kNoiseless) return 0.0;
    return std::pow(10.0, -snr_db / 10.0);
  }

  void validate() const {
    if (std::isnan(snr_db) || snr_db == -kNoiseless)
      throw validation_error("ChannelConfig: snr_db must be finite or +inf (noiseless)");
    if (fading == Fading::fixed)
      for (const auto& h : coefficients)
        if (std::abs(h) == 0.0) throw validation_error("ChannelConfig: |h| must be > 0 for fixed fading");
  }
};

struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cplx> data;

  cplx operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct ChannelOutput {
  ComplexMatrix received;
  cplx coefficient{1.0, 0.0};
  double noise_variance = 0.0;
  double power_scale = 1.0;
  Matrix normalized;
  std::vector<std::string> warnings;
};

struct channel_outage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scale factor that brings the batch to unit average per-dimension power, or
/// 1 for an all-zero batch.
inline double power_scale(const Matrix& z) {
  double energy = 0.0;
  for (double v : z.values()) energy += v * v;
  if (energy == 0.0) return 1.0;
  return std::sqrt(static_cast<double>(z.size()) / energy);
}

/// Differentiable power normalisation: z / sqrt(mean(z²)).
inline Var normalize_power(Var z) {
  double energy = 0.0;
  for (double v : z.value().values()) energy += v * v;
  if (energy == 0.0) return z;
  return div_eps(z, sqrt(mean(square(z))));
}

/// ẑ = h·z_norm + n with n ~ CN(0, σ²I).
inline ChannelOutput transmit(const Matrix& z, const ChannelConfig& cfg, std::size_t modality, Rng& rng) {
  if (!z.all_finite()) throw numeric_error("transmit: non-finite features");
  ChannelOutput out;
  out.power_scale = power_scale(z);
  out.normalized = z;
  bool zero = true;
  for (double v : z.values()) zero = zero && v == 0.0;
  if (zero)
    out.warnings.push_back("transmit: all-zero batch, power normalisation skipped");
  else
    for (double& v : out.normalized.values()) v *= out.power_scale;

  if (cfg.fading == Fading::rayleigh_per_round) {
    const double re = standard_normal(rng), im = standard_normal(rng);
    out.coefficient = cplx{re, im} * std::sqrt(0.5);
  } else {
    out.coefficient = cfg.coefficient(modality);
  }
  out.noise_variance = cfg.noise_variance();
  const double sd = std::sqrt(out.noise_variance / 2.0);

  out.received.rows = z.rows();
  out.received.cols = z.cols();
  out.received.data.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    cplx v = out.coefficient * out.normalized[i];
    if (sd > 0.0) {
      const double nr = standard_normal(rng);
      const double ni = standard_normal(rng);
      v += cplx{sd * nr, sd * ni};
    }
    out.received.data[i] = v;
  }
  return out;
}

/// Zero-forcing equaliser projected to the real line: Re(conj(h)·ẑ)/|h|².
inline Matrix equalize(const ChannelOutput& out) {
  const double gain = std::norm(out.coefficient);
  if (gain == 0.0) throw channel_outage("equalize: channel coefficient is zero");
  Matrix z(out.received.rows, out.received.cols);
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = (std::conj(out.coefficient) * out.received.data[i]).real() / gain;
  return z;
}

/// Power-normalises z on the graph, sends it through the channel, and returns
/// the equalised features. The noise realisation enters as a constant, so the
/// gradient with respect to z is that of the normalisation alone.
inline Var through_channel(Var z, const ChannelConfig& cfg, std::size_t modality, Rng& rng,
                           ChannelOutput* info = nullptr) {
  Graph& g = *z.graph;
  Var zn = normalize_power(z);
  ChannelOutput out = transmit(z.value(), cfg, modality, rng);
  Matrix residual = equalize(out);
  bool any = false;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    residual[i] -= out.normalized[i];
    any = any || residual[i] != 0.0;
  }
  if (info) *info = std::move(out);
  if (!any) return zn;
  return add(zn, g.constant(std::move(residual)));
}

/// Column-wise concatenation in modality order.
inline Matrix concat_features(std::span<const Matrix> parts) {
  if (parts.empty()) throw dimension_error("concat_features: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw dimension_error("concat_features: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p(r, c);
    off += p.cols();
  }
  return out;
}

}  // namespace semcom
