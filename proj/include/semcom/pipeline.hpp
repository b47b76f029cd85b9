#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/datagen.hpp"
#include "semcom/losses.hpp"
#include "semcom/model.hpp"

namespace semcom {

enum class Method { proposed, simclr, barlow, supervised };
enum class Stage { pretrain, finetune };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::simclr: return "simclr";
    case Method::barlow: return "barlow";
    case Method::supervised: return "supervised";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  if (s == "proposed") return Method::proposed;
  if (s == "simclr") return Method::simclr;
  if (s == "barlow") return Method::barlow;
  if (s == "supervised") return Method::supervised;
  throw validation_error("unknown method '" + std::string(s) + "'");
}

inline std::string_view stage_name(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

// ---------------------------------------------------------------------------
// Communication accounting

struct LedgerEntry {
  Stage stage;
  std::size_t round;
  std::uint64_t uplink;
  std::uint64_t downlink;
};

/// Real scalars exchanged per round: features uplink, gradients downlink.
class CommLedger {
 public:
  void record(Stage stage, std::uint64_t uplink, std::uint64_t downlink) {
    if (stage == Stage::pretrain && (uplink != 0 || downlink != 0))
      throw contract_error("CommLedger: pre-training rounds carry no communication");
    std::size_t round = 1;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      if (it->stage == stage) {
        round = it->round + 1;
        break;
      }
    entries_.push_back({stage, round, uplink, downlink});
    uplink_total_ += uplink;
    downlink_total_ += downlink;
  }

  const std::vector<LedgerEntry>& entries() const noexcept { return entries_; }
  std::uint64_t uplink_total() const noexcept { return uplink_total_; }
  std::uint64_t downlink_total() const noexcept { return downlink_total_; }

  std::size_t rounds(Stage stage) const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.stage == stage; }));
  }

  /// Stage-I entries are zero and the totals equal the per-round sums.
  bool audit() const {
    std::uint64_t up = 0, down = 0;
    for (const auto& e : entries_) {
      if (e.stage == Stage::pretrain && (e.uplink != 0 || e.downlink != 0)) return false;
      up += e.uplink;
      down += e.downlink;
    }
    return up == uplink_total_ && down == downlink_total_;
  }

 private:
  std::vector<LedgerEntry> entries_;
  std::uint64_t uplink_total_ = 0;
  std::uint64_t downlink_total_ = 0;
};

// ---------------------------------------------------------------------------
// Configuration

struct ModelConfig {
  std::vector<std::size_t> encoder_hidden{64};
  std::size_t feature_dim = 16;
  std::vector<std::size_t> decoder_hidden{64};

  std::vector<std::size_t> encoder_dims(std::size_t input_dim) const {
    std::vector<std::size_t> d{input_dim};
    d.insert(d.end(), encoder_hidden.begin(), encoder_hidden.end());
    d.push_back(feature_dim);
    return d;
  }

  std::vector<std::size_t> decoder_dims(std::size_t modalities, std::size_t classes) const {
    std::vector<std::size_t> d{modalities * feature_dim};
    d.insert(d.end(), decoder_hidden.begin(), decoder_hidden.end());
    d.push_back(classes);
    return d;
  }
};

struct RunConfig {
  std::size_t pretrain_epochs = 30;
  std::size_t finetune_epochs = 20;
  std::size_t batch_size = 64;
  std::size_t eval_every = 8;
  Method method = Method::proposed;
  double snr_db = 10.0;
  double label_fraction = 1.0;
  std::uint64_t seed = 1;
  bool channel_in_training = true;
  bool complex_as_two_reals = true;

  GenConfig data;
  ModelConfig model;
  OptimConfig pretrain_optim{0.05, 0.9, 1e-4, 1};
  OptimConfig finetune_optim{0.05, 0.9, 1e-4, 1};
  LossHyperParams loss;
  ChannelConfig channel;
  AugConfig aug;

  std::size_t effective_pretrain_epochs() const {
    return method == Method::supervised ? 0 : pretrain_epochs;
  }

  ChannelConfig channel_config() const {
    ChannelConfig c = channel;
    c.snr_db = snr_db;
    return c;
  }

  void validate() const {
    if (finetune_epochs < 1) throw validation_error("RunConfig: finetune_epochs must be >= 1");
    if (batch_size < 2) throw validation_error("RunConfig: batch_size must be >= 2");
    if (eval_every < 1) throw validation_error("RunConfig: eval_every must be >= 1");
    if (!(label_fraction > 0.0 && label_fraction <= 1.0))
      throw validation_error("RunConfig: label_fraction must be in (0,1]");
    data.validate();
    aug.validate();
    channel_config().validate();
    loss.validate(model.feature_dim);
    OptimConfig p = pretrain_optim, f = finetune_optim;
    p.total_epochs = std::max<std::size_t>(1, pretrain_epochs);
    f.total_epochs = finetune_epochs;
    p.validate();
    f.validate();
  }
};

struct MetricRecord {
  std::size_t round = 0;
  Stage stage = Stage::finetune;
  Method method = Method::proposed;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  double label_fraction = 1.0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t uplink_scalars = 0;
  std::uint64_t downlink_scalars = 0;
};

// ---------------------------------------------------------------------------
// Helpers

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng& rng,
                                                          std::size_t min_rows) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    if (end - start < min_rows) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

inline std::vector<Tensor*> collect_params(std::vector<Encoder>& encoders, Decoder* decoder) {
  std::vector<Tensor*> params;
  for (auto& e : encoders)
    for (auto* p : e.net.parameters()) params.push_back(p);
  if (decoder)
    for (auto* p : decoder->net.parameters()) params.push_back(p);
  return params;
}

inline std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage I

/// Label-free pre-training of the device encoders. Only feature matrices are
/// passed in, so labels are unreachable from this code path. One ledger entry
/// (always zero) is written per mini-batch update. Returns the mean loss of
/// each epoch; `on_epoch`, when set, is called after every epoch.
inline std::vector<double> pretrain(std::span<const Matrix> features, std::vector<Encoder>& encoders,
                                    const RunConfig& cfg, CommLedger& ledger,
                                    std::vector<std::string>* warnings = nullptr,
                                    const std::function<void(std::size_t, double)>& on_epoch = {}) {
  if (cfg.method == Method::supervised) throw contract_error("pretrain: supervised method has no Stage I");
  if (features.size() != encoders.size()) throw dimension_error("pretrain: one encoder per modality required");
  const std::size_t epochs = cfg.pretrain_epochs;
  std::vector<double> trace;
  if (epochs == 0) return trace;

  OptimConfig oc = cfg.pretrain_optim;
  oc.total_epochs = epochs;
  Sgd sgd(oc);
  auto params = detail::collect_params(encoders, nullptr);
  Rng batch_rng = make_rng(cfg.seed, streams::pretrain_batches);
  Rng aug_rng = make_rng(cfg.seed, cfg.aug.stream);
  const std::size_t M = encoders.size();
  bool warned = false;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    double total = 0.0;
    std::size_t steps = 0;
    for (const auto& rows : detail::make_batches(features[0].rows(), cfg.batch_size, batch_rng, 2)) {
      std::vector<Matrix> clean;
      for (const auto& x : features) clean.push_back(x.select_rows(rows));
      std::vector<Matrix> augmented = augment(clean, cfg.aug, aug_rng);

      Graph g;
      std::vector<ModalityViews> views;
      for (std::size_t m = 0; m < M; ++m)
        views.push_back({encode(g, encoders[m], g.constant(clean[m])),
                         encode(g, encoders[m], g.constant(augmented[m]))});

      Var loss;
      std::vector<std::string> local;
      if (cfg.method == Method::proposed) {
        loss = pretrain_loss(views, cfg.loss, &local);
      } else {
        for (std::size_t m = 0; m < M; ++m) {
          Var lm = cfg.method == Method::simclr
                       ? simclr_loss(views[m].z, views[m].z_aug, cfg.loss.temperature, &local)
                       : barlow_twins_loss(views[m].z, views[m].z_aug, cfg.loss.lambda_bt);
          loss = m == 0 ? lm : add(loss, lm);
        }
      }
      if (warnings && !warned && !local.empty()) {
        warnings->insert(warnings->end(), local.begin(), local.end());
        warned = true;
      }
      for (auto* p : params) p->zero_grad();
      g.backward(loss);
      sgd.step(params, static_cast<double>(epoch));
      ledger.record(Stage::pretrain, 0, 0);
      total += loss.value()[0];
      ++steps;
    }
    trace.push_back(steps ? total / static_cast<double>(steps) : 0.0);
    if (on_epoch) on_epoch(epoch, trace.back());
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Test accuracy with fresh channel noise at the configured SNR. Ties in the
/// argmax go to the lowest class index.
inline double evaluate(const MultiModalDataset& test, const std::vector<Encoder>& encoders,
                       const Decoder& decoder, const ChannelConfig& channel, Rng& rng) {
  if (test.size() == 0) throw contract_error("evaluate: empty test set");
  if (test.num_modalities() != encoders.size()) throw dimension_error("evaluate: modality count mismatch");
  std::vector<Matrix> received;
  for (std::size_t m = 0; m < encoders.size(); ++m) {
    Matrix z = encode(encoders[m], test.modalities[m]);
    received.push_back(equalize(transmit(z, channel, m, rng)));
  }
  Matrix logp = decode(decoder, concat_features(received));
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logp.rows(); ++r)
    if (detail::argmax_row(logp.row(r)) == static_cast<std::size_t>(test.labels[r])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

/// Nearest-class-centroid accuracy on concatenated noiseless encoder features;
/// a label-using probe run between pre-training epochs, never inside them.
inline double centroid_probe(const MultiModalDataset& train, const MultiModalDataset& test,
                             const std::vector<Encoder>& encoders) {
  auto features = [&](const MultiModalDataset& ds) {
    std::vector<Matrix> parts;
    for (std::size_t m = 0; m < encoders.size(); ++m) {
      Matrix z = encode(encoders[m], ds.modalities[m]);
      const double s = power_scale(z);
      for (double& v : z.values()) v *= s;
      parts.push_back(std::move(z));
    }
    return concat_features(parts);
  };
  const Matrix ftr = features(train);
  const Matrix fte = features(test);
  const std::size_t C = train.num_classes, K = ftr.cols();
  Matrix centroids(C, K);
  std::vector<double> counts(C, 0.0);
  for (std::size_t r = 0; r < ftr.rows(); ++r) {
    if (!train.labeled_mask[r]) continue;
    const auto y = static_cast<std::size_t>(train.labels[r]);
    counts[y] += 1.0;
    for (std::size_t k = 0; k < K; ++k) centroids(y, k) += ftr(r, k);
  }
  for (std::size_t c = 0; c < C; ++c)
    if (counts[c] > 0)
      for (std::size_t k = 0; k < K; ++k) centroids(c, k) /= counts[c];
  std::size_t correct = 0;
  for (std::size_t r = 0; r < fte.rows(); ++r) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      if (counts[c] == 0) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < K; ++k) d += (fte(r, k) - centroids(c, k)) * (fte(r, k) - centroids(c, k));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == static_cast<std::size_t>(test.labels[r])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(fte.rows());
}

// ---------------------------------------------------------------------------
// Stage II

struct FinetuneResult {
  std::vector<MetricRecord> records;
  std::vector<double> round_losses;
};

/// Joint fine-tuning across the channel. One round is one mini-batch exchange:
/// features go uplink through the channel, the server updates the decoder and
/// returns the gradient of each transmitted block downlink.
inline FinetuneResult finetune(const MultiModalDataset& train, const MultiModalDataset& test,
                               std::vector<Encoder>& encoders, Decoder& decoder, const RunConfig& cfg,
                               CommLedger& ledger) {
  train.validate();
  const std::size_t M = encoders.size();
  if (train.num_modalities() != M) throw dimension_error("finetune: modality count mismatch");
  const std::size_t K = cfg.model.feature_dim;

  OptimConfig oc = cfg.finetune_optim;
  oc.total_epochs = cfg.finetune_epochs;
  Sgd sgd(oc);
  auto params = detail::collect_params(encoders, &decoder);

  Rng batch_rng = make_rng(cfg.seed, streams::finetune_batches);
  Rng channel_rng = make_rng(cfg.seed, cfg.channel.stream);
  Rng eval_rng = make_rng(cfg.seed, streams::channel_eval);
  const ChannelConfig channel = cfg.channel_config();

  FinetuneResult result;
  std::size_t round = 0;
  double window_loss = 0.0;
  std::size_t window_rounds = 0;

  auto snapshot = [&] {
    MetricRecord rec;
    rec.round = round;
    rec.stage = Stage::finetune;
    rec.method = cfg.method;
    rec.seed = cfg.seed;
    rec.snr_db = cfg.snr_db;
    rec.label_fraction = cfg.label_fraction;
    rec.train_loss = window_rounds ? window_loss / static_cast<double>(window_rounds) : 0.0;
    rec.test_accuracy = evaluate(test, encoders, decoder, channel, eval_rng);
    rec.uplink_scalars = ledger.uplink_total();
    rec.downlink_scalars = ledger.downlink_total();
    result.records.push_back(rec);
    window_loss = 0.0;
    window_rounds = 0;
  };

  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    for (const auto& rows : detail::make_batches(train.size(), cfg.batch_size, batch_rng, 1)) {
      std::vector<int> labels;
      std::vector<std::uint8_t> mask;
      for (auto r : rows) {
        labels.push_back(train.labels[r]);
        mask.push_back(train.labeled_mask[r]);
      }
      if (std::find(mask.begin(), mask.end(), 1) == mask.end()) continue;

      Graph g;
      std::vector<Var> received;
      for (std::size_t m = 0; m < M; ++m) {
        Var z = encode(g, encoders[m], g.constant(train.modalities[m].select_rows(rows)));
        received.push_back(cfg.channel_in_training ? through_channel(z, channel, m, channel_rng)
                                                   : normalize_power(z));
      }
      Var logp = decode(g, decoder, concat_cols(received));
      Var loss = cross_entropy(logp, labels, mask);
      for (auto* p : params) p->zero_grad();
      g.backward(loss);
      sgd.step(params, static_cast<double>(epoch));

      const std::uint64_t block = static_cast<std::uint64_t>(M) * rows.size() * K;
      ledger.record(Stage::finetune, block * (cfg.complex_as_two_reals ? 2u : 1u), block);
      ++round;
      window_loss += loss.value()[0];
      ++window_rounds;
      result.round_losses.push_back(loss.value()[0]);
      if (round % cfg.eval_every == 0) snapshot();
    }
  }
  if (window_rounds > 0) snapshot();
  return result;
}

// ---------------------------------------------------------------------------
// Whole run

struct RunResult {
  std::vector<MetricRecord> records;
  CommLedger ledger;
  std::vector<double> pretrain_trace;
  std::vector<std::string> warnings;
};

inline RunResult run_experiment_detailed(const RunConfig& cfg) {
  cfg.validate();
  auto [train_full, test] = gen_dataset(cfg.data);
  MultiModalDataset train = subset_labels(train_full, cfg.label_fraction, cfg.seed);

  RunResult result;
  result.warnings = train.warnings;
  std::vector<Encoder> encoders;
  for (std::size_t m = 0; m < train.num_modalities(); ++m)
    encoders.push_back(init_encoder(cfg.model.encoder_dims(cfg.data.observed_dims[m]), cfg.seed, m));
  Decoder decoder =
      init_decoder(cfg.model.decoder_dims(train.num_modalities(), cfg.data.num_classes), cfg.seed);

  if (cfg.effective_pretrain_epochs() > 0) {
    auto probe = [&](std::size_t, double loss) {
      MetricRecord rec;
      rec.round = 0;
      rec.stage = Stage::pretrain;
      rec.method = cfg.method;
      rec.seed = cfg.seed;
      rec.snr_db = cfg.snr_db;
      rec.label_fraction = cfg.label_fraction;
      rec.train_loss = loss;
      rec.test_accuracy = centroid_probe(train, test, encoders);
      result.records.push_back(rec);
    };
    result.pretrain_trace = pretrain(train.modalities, encoders, cfg, result.ledger, &result.warnings, probe);
  }

  auto ft = finetune(train, test, encoders, decoder, cfg, result.ledger);
  result.records.insert(result.records.end(), ft.records.begin(), ft.records.end());
  return result;
}

inline std::vector<MetricRecord> run_experiment(const RunConfig& cfg) {
  return run_experiment_detailed(cfg).records;
}

}  // namespace semcom
