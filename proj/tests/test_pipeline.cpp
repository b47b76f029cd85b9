#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_util.hpp"

using namespace semcom;
using semcom::test::small_run;

namespace {

std::vector<Encoder> encoders_for(const RunConfig& c) {
  std::vector<Encoder> e;
  for (std::size_t m = 0; m < c.data.observed_dims.size(); ++m)
    e.push_back(init_encoder(c.model.encoder_dims(c.data.observed_dims[m]), c.seed, m));
  return e;
}

Decoder decoder_for(const RunConfig& c) {
  return init_decoder(c.model.decoder_dims(c.data.observed_dims.size(), c.data.num_classes), c.seed);
}

}  // namespace

TEST(Ledger, PretrainEntriesMustBeZero) {
  CommLedger l;
  l.record(Stage::pretrain, 0, 0);
  EXPECT_THROW(l.record(Stage::pretrain, 1, 0), contract_error);
  EXPECT_THROW(l.record(Stage::pretrain, 0, 1), contract_error);
  l.record(Stage::finetune, 10, 5);
  l.record(Stage::finetune, 10, 5);
  EXPECT_EQ(l.rounds(Stage::pretrain), 1u);
  EXPECT_EQ(l.rounds(Stage::finetune), 2u);
  EXPECT_EQ(l.entries().back().round, 2u);
  EXPECT_EQ(l.uplink_total(), 20u);
  EXPECT_EQ(l.downlink_total(), 10u);
  EXPECT_TRUE(l.audit());
}

TEST(Finetune, OneFullRoundChargesClosedForm) {
  RunConfig c;
  c.data.num_classes = 4;
  c.data.train_per_class = 16;  // 64 samples: exactly one batch of 64
  c.data.test_per_class = 5;
  c.finetune_epochs = 1;
  c.method = Method::supervised;
  c.validate();
  auto [train, test] = gen_dataset(c.data);
  auto enc = encoders_for(c);
  auto dec = decoder_for(c);
  CommLedger ledger;
  finetune(train, test, enc, dec, c, ledger);
  ASSERT_EQ(ledger.rounds(Stage::finetune), 1u);
  EXPECT_EQ(ledger.entries()[0].uplink, 4096u);   // M·B·K·2 = 2·64·16·2
  EXPECT_EQ(ledger.entries()[0].downlink, 2048u); // M·B·K
  c.complex_as_two_reals = false;
  auto enc2 = encoders_for(c);
  auto dec2 = decoder_for(c);
  CommLedger l2;
  finetune(train, test, enc2, dec2, c, l2);
  EXPECT_EQ(l2.entries()[0].uplink, 2048u);
}

TEST(Finetune, EveryFullBatchRoundMatchesClosedForm) {
  RunConfig c = small_run(Method::proposed);
  const auto res = run_experiment_detailed(c);
  const std::uint64_t M = 2, B = c.batch_size, K = c.model.feature_dim;
  const std::size_t n = c.data.num_classes * c.data.train_per_class;
  std::size_t full = 0;
  for (const auto& e : res.ledger.entries()) {
    if (e.stage == Stage::pretrain) {
      EXPECT_EQ(e.uplink, 0u);
      EXPECT_EQ(e.downlink, 0u);
      continue;
    }
    if (e.downlink == M * B * K) {
      EXPECT_EQ(e.uplink, M * B * K * 2);
      ++full;
    } else {
      EXPECT_EQ(e.downlink, M * (n % B) * K);  // the trailing partial batch
    }
  }
  EXPECT_EQ(full, c.finetune_epochs * (n / B));
  EXPECT_TRUE(res.ledger.audit());
}

TEST(Finetune, NoiselessChannelMatchesNoChannelBitForBit) {
  RunConfig a = small_run(Method::supervised);
  a.snr_db = kNoiseless;
  RunConfig b = a;
  b.channel_in_training = false;
  auto [train, test] = gen_dataset(a.data);
  auto ea = encoders_for(a), eb = encoders_for(b);
  auto da = decoder_for(a), db = decoder_for(b);
  CommLedger la, lb;
  auto ra = finetune(train, test, ea, da, a, la);
  auto rb = finetune(train, test, eb, db, b, lb);
  ASSERT_FALSE(ra.round_losses.empty());
  EXPECT_EQ(ra.round_losses, rb.round_losses);
  for (std::size_t l = 0; l < da.net.weights.size(); ++l)
    EXPECT_EQ(da.net.weights[l].value, db.net.weights[l].value);
}

TEST(Finetune, BatchesWithoutLabelsAreSkippedAndUncharged) {
  RunConfig c = small_run(Method::supervised);
  c.batch_size = 4;
  c.finetune_epochs = 1;
  auto [full, test] = gen_dataset(c.data);
  auto train = subset_labels(full, 0.05, 1);  // 10 labeled rows among 200
  auto enc = encoders_for(c);
  auto dec = decoder_for(c);
  CommLedger ledger;
  auto res = finetune(train, test, enc, dec, c, ledger);
  EXPECT_LT(ledger.rounds(Stage::finetune), 50u);
  EXPECT_LE(ledger.rounds(Stage::finetune), 10u);
  EXPECT_EQ(res.round_losses.size(), ledger.rounds(Stage::finetune));
}

TEST(Finetune, SupervisedLossFallsDuringFirstEpoch) {
  RunConfig c;
  c.method = Method::supervised;
  c.channel_in_training = false;
  c.finetune_epochs = 1;
  auto [train, test] = gen_dataset(c.data);
  auto enc = encoders_for(c);
  auto dec = decoder_for(c);
  CommLedger ledger;
  auto res = finetune(train, test, enc, dec, c, ledger);
  const auto& l = res.round_losses;
  ASSERT_GE(l.size(), 20u);
  const double head = std::accumulate(l.begin(), l.begin() + 5, 0.0) / 5;
  const double tail = std::accumulate(l.end() - 5, l.end(), 0.0) / 5;
  EXPECT_LT(tail, head);
}

TEST(Pretrain, SupervisedHasNoStageOne) {
  RunConfig c = small_run(Method::supervised);
  auto [train, test] = gen_dataset(c.data);
  auto enc = encoders_for(c);
  CommLedger ledger;
  EXPECT_THROW(pretrain(train.modalities, enc, c, ledger), contract_error);
  const auto records = run_experiment(c);
  EXPECT_TRUE(std::none_of(records.begin(), records.end(), [](auto& r) { return r.stage == Stage::pretrain; }));
}

TEST(Pretrain, ZeroEpochsLeavesEncodersUnchanged) {
  RunConfig c = small_run(Method::proposed);
  c.pretrain_epochs = 0;
  auto [train, test] = gen_dataset(c.data);
  auto enc = encoders_for(c);
  const auto before = enc[0].net.weights[0].value;
  CommLedger ledger;
  EXPECT_TRUE(pretrain(train.modalities, enc, c, ledger).empty());
  EXPECT_EQ(enc[0].net.weights[0].value, before);
  EXPECT_EQ(ledger.entries().size(), 0u);
}

TEST(Pretrain, StageOneLedgerIsZeroForEverySelfSupervisedMethod) {
  for (Method m : {Method::proposed, Method::simclr, Method::barlow}) {
    RunConfig c = small_run(m);
    auto [train, test] = gen_dataset(c.data);
    auto enc = encoders_for(c);
    CommLedger ledger;
    pretrain(train.modalities, enc, c, ledger);
    EXPECT_GT(ledger.rounds(Stage::pretrain), 0u);
    EXPECT_EQ(ledger.uplink_total(), 0u);
    EXPECT_EQ(ledger.downlink_total(), 0u);
  }
}

TEST(Pretrain, ProposedLossTraceFallsOnDefaultData) {
  RunConfig c;
  auto [train, test] = gen_dataset(c.data);
  auto enc = encoders_for(c);
  CommLedger ledger;
  const auto trace = pretrain(train.modalities, enc, c, ledger);
  ASSERT_EQ(trace.size(), 30u);
  for (double v : trace) EXPECT_TRUE(std::isfinite(v));
  // 10-epoch moving average must never rise.
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t e = 10; e <= trace.size(); ++e) {
    const double avg = std::accumulate(trace.begin() + (e - 10), trace.begin() + e, 0.0) / 10.0;
    EXPECT_LE(avg, prev) << "window ending at epoch " << e;
    prev = avg;
  }
}

TEST(Evaluate, UniformDecoderScoresChance) {
  RunConfig c = small_run();
  auto [train, test] = gen_dataset(c.data);
  auto enc = encoders_for(c);
  auto dec = decoder_for(c);
  for (auto* p : dec.net.parameters()) std::fill(p->value.values().begin(), p->value.values().end(), 0.0);
  Rng rng = make_rng(1, 1);
  EXPECT_DOUBLE_EQ(evaluate(test, enc, dec, c.channel_config(), rng), 0.1);
  MultiModalDataset empty;
  EXPECT_THROW(evaluate(empty, enc, dec, c.channel_config(), rng), contract_error);
}

TEST(Evaluate, InvariantToTestRowOrder) {
  RunConfig c = small_run();
  c.snr_db = kNoiseless;
  auto [train, test] = gen_dataset(c.data);
  auto enc = encoders_for(c);
  auto dec = decoder_for(c);
  std::vector<std::size_t> perm(test.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  Rng r1 = make_rng(1, 1), r2 = make_rng(1, 1);
  EXPECT_EQ(evaluate(test, enc, dec, c.channel_config(), r1),
            evaluate(test.select(perm), enc, dec, c.channel_config(), r2));
}

TEST(Evaluate, PerfectlySeparableDataReachesFullAccuracy) {
  RunConfig c;
  c.method = Method::supervised;
  c.snr_db = kNoiseless;
  c.data.separation = 30.0;
  c.data.noise = 0.05;
  c.data.train_per_class = 50;
  c.data.test_per_class = 30;
  c.finetune_epochs = 30;
  const auto records = run_experiment(c);
  EXPECT_DOUBLE_EQ(records.back().test_accuracy, 1.0);
}

TEST(RunExperiment, DeterministicRecords) {
  RunConfig c = small_run(Method::simclr, 3);
  c.label_fraction = 0.5;
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].round, b[i].round);
    EXPECT_EQ(a[i].train_loss, b[i].train_loss);
    EXPECT_EQ(a[i].test_accuracy, b[i].test_accuracy);
    EXPECT_EQ(a[i].uplink_scalars, b[i].uplink_scalars);
  }
}

TEST(RunExperiment, RecordsCarryStageAndCumulativeTraffic) {
  RunConfig c = small_run(Method::barlow, 2);
  const auto res = run_experiment_detailed(c);
  std::size_t pre = 0;
  std::uint64_t last_up = 0;
  for (const auto& r : res.records) {
    EXPECT_GE(r.test_accuracy, 0.0);
    EXPECT_LE(r.test_accuracy, 1.0);
    if (r.stage == Stage::pretrain) {
      ++pre;
      EXPECT_EQ(r.uplink_scalars, 0u);
      continue;
    }
    EXPECT_GE(r.uplink_scalars, last_up);
    last_up = r.uplink_scalars;
  }
  EXPECT_EQ(pre, c.pretrain_epochs);
  EXPECT_EQ(last_up, res.ledger.uplink_total());
  EXPECT_EQ(res.records.back().round, res.ledger.rounds(Stage::finetune));
}

TEST(RunConfig, ValidationCatchesBadValues) {
  RunConfig c;
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), validation_error);
  c = RunConfig{};
  c.label_fraction = 0.0;
  EXPECT_THROW(c.validate(), validation_error);
  c = RunConfig{};
  c.loss.shared_dims = 16;
  EXPECT_THROW(c.validate(), validation_error);
  c = RunConfig{};
  c.snr_db = std::nan("");
  EXPECT_THROW(c.validate(), validation_error);
}
