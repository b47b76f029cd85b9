// semcom: command-line driver for the semantic-communication experiments.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 numeric or I/O failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "semcom/semcom.hpp"

namespace fs = std::filesystem;
using namespace semcom;

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

ExperimentGrid load(const CommonOpts& o) {
  ExperimentGrid grid = o.config.empty() ? ExperimentGrid{} : load_grid(o.config);
  if (o.seed) {
    grid.seeds = {*o.seed};
    grid.base.seed = *o.seed;
  }
  grid.validate();
  return grid;
}

// --out wins, then SEMCOM_OUT, then the config's output_dir.
fs::path output_dir(const CommonOpts& o, const ExperimentGrid& grid) {
  fs::path dir = grid.output_dir;
  if (const char* env = std::getenv("SEMCOM_OUT"); env && *env) dir = env;
  if (!o.out.empty()) dir = o.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw std::runtime_error("cannot write " + path.string());
}

int cmd_run(const CommonOpts& o) {
  ExperimentGrid grid = load(o);
  const fs::path dir = output_dir(o, grid);
  grid.output_dir = dir.string();
  write_text(dir / "config.json", to_json(grid).dump(2) + "\n");

  const std::size_t total = grid.cells().size();
  std::size_t done = 0;
  auto records = run_grid(grid, o.threads, [&](const RunConfig& c) {
    std::fprintf(stderr, "[%zu/%zu] %s seed=%llu snr=%s frac=%g\n", ++done, total,
                 std::string(method_name(c.method)).c_str(), static_cast<unsigned long long>(c.seed),
                 detail::fmt9(c.snr_db).c_str(), c.label_fraction);
  });
  emit_csv(records, dir / "metrics.csv");
  emit_svg(records, dir / "curves.svg");

  std::vector<std::pair<double, double>> settings;
  for (double s : grid.snr_db)
    for (double f : grid.label_fraction) settings.emplace_back(s, f);
  for (auto [snr, frac] : settings) {
    const auto t = summarize_trend(records, snr, frac);
    if (std::isnan(t.supervised_final) || std::isnan(t.proposed_final)) continue;
    std::printf("snr=%s frac=%g supervised_final=%.4f proposed_final=%.4f proposed_rounds_to_target=%s/%g\n",
                detail::fmt9(snr).c_str(), frac, t.supervised_final, t.proposed_final,
                detail::fmt9(t.proposed_rounds_to_target).c_str(), t.total_rounds);
  }
  std::printf("wrote %s\n", (dir / "metrics.csv").string().c_str());
  return 0;
}

std::vector<Encoder> fresh_encoders(const RunConfig& cfg) {
  std::vector<Encoder> encoders;
  for (std::size_t m = 0; m < cfg.data.observed_dims.size(); ++m)
    encoders.push_back(init_encoder(cfg.model.encoder_dims(cfg.data.observed_dims[m]), cfg.seed, m));
  return encoders;
}

int cmd_pretrain(const CommonOpts& o) {
  ExperimentGrid grid = load(o);
  RunConfig cfg = grid.base;
  if (cfg.method == Method::supervised) throw validation_error("pretrain: method 'supervised' has no Stage I");
  const fs::path dir = output_dir(o, grid);

  auto [train, test] = gen_dataset(cfg.data);
  auto encoders = fresh_encoders(cfg);
  CommLedger ledger;
  std::vector<std::string> warnings;
  const auto trace = pretrain(train.modalities, encoders, cfg, ledger, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

  std::ostringstream csv;
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e) csv << e + 1 << ',' << detail::fmt9(trace[e]) << '\n';
  write_text(dir / "pretrain_trace.csv", csv.str());
  for (std::size_t m = 0; m < encoders.size(); ++m)
    save_checkpoint(dir / ("encoder_" + std::to_string(m) + ".ckpt"), encoders[m].net,
                    {cfg.seed, "pretrain", std::string(method_name(cfg.method))});
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  std::printf("pretrained %zu encoders for %zu epochs, final loss %.6g, uplink=%llu downlink=%llu\n",
              encoders.size(), trace.size(), trace.empty() ? 0.0 : trace.back(),
              static_cast<unsigned long long>(ledger.uplink_total()),
              static_cast<unsigned long long>(ledger.downlink_total()));
  return 0;
}

int cmd_finetune(const CommonOpts& o, const std::string& checkpoints) {
  ExperimentGrid grid = load(o);
  RunConfig cfg = grid.base;
  const fs::path dir = output_dir(o, grid);

  auto [train_full, test] = gen_dataset(cfg.data);
  MultiModalDataset train = subset_labels(train_full, cfg.label_fraction, cfg.seed);
  auto encoders = fresh_encoders(cfg);
  if (!checkpoints.empty()) {
    for (std::size_t m = 0; m < encoders.size(); ++m) {
      Mlp net = load_checkpoint(fs::path(checkpoints) / ("encoder_" + std::to_string(m) + ".ckpt"));
      if (net.dims != encoders[m].net.dims)
        throw validation_error("finetune: checkpoint for modality " + std::to_string(m) +
                               " does not match the configured encoder shape");
      encoders[m].net = std::move(net);
    }
  }
  Decoder decoder = init_decoder(cfg.model.decoder_dims(encoders.size(), cfg.data.num_classes), cfg.seed);
  CommLedger ledger;
  auto result = finetune(train, test, encoders, decoder, cfg, ledger);
  emit_csv(result.records, dir / "metrics.csv");
  emit_svg(result.records, dir / "curves.svg");
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  std::printf("fine-tuned %zu rounds, final accuracy %.4f, uplink=%llu downlink=%llu\n",
              ledger.rounds(Stage::finetune), result.records.back().test_accuracy,
              static_cast<unsigned long long>(ledger.uplink_total()),
              static_cast<unsigned long long>(ledger.downlink_total()));
  return 0;
}

int cmd_verify_mi(std::size_t trials, std::uint64_t seed) {
  const auto r = mi_identity_suite(trials, seed);
  std::printf("joints=%zu max_residual=%.3e xor_interaction=%.17g %s\n", r.joints, r.max_residual,
              r.xor_interaction, r.pass ? "PASS" : "FAIL");
  return r.pass ? 0 : 2;
}

int cmd_grad_check(std::uint64_t seed) {
  bool ok = true;
  for (const auto& [name, rep] : loss_gradient_suite(seed)) {
    std::printf("%-20s max_rel_err=%.3e max_abs_err=%.3e %s\n", name.c_str(), rep.max_rel_err, rep.max_abs_err,
                rep.aborted ? "ABORTED" : (rep.pass ? "PASS" : "FAIL"));
    if (rep.aborted) std::printf("  %s\n", rep.diagnostic.c_str());
    ok = ok && rep.pass;
  }
  return ok ? 0 : 2;
}

int cmd_export_data(const CommonOpts& o) {
  ExperimentGrid grid = load(o);
  const RunConfig& cfg = grid.base;
  const fs::path dir = output_dir(o, grid);
  auto [train_full, test] = gen_dataset(cfg.data);
  MultiModalDataset train = subset_labels(train_full, cfg.label_fraction, cfg.seed);
  for (const auto& w : train.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  write_dataset_csv(train, dir / "train");
  write_dataset_csv(test, dir / "test");
  std::printf("wrote %zu train and %zu test samples to %s\n", train.size(), test.size(), dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal self-supervised semantic communication experiments"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&](CLI::App* sub, bool threads) {
    sub->add_option("--config", opts.config, "JSON config (RunConfig fields plus optional sweep)");
    sub->add_option("--out", opts.out, "output directory (default: $SEMCOM_OUT, then config output_dir)");
    sub->add_option("--seed", opts.seed, "override the seed list with a single seed");
    if (threads) sub->add_option("--threads", opts.threads, "grid cells run in parallel")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "run the experiment grid; writes metrics.csv, curves.svg, config.json");
  add_common(run, true);
  auto* pre = app.add_subcommand("pretrain", "Stage-I pre-training only; writes encoder checkpoints");
  add_common(pre, false);
  auto* fine = app.add_subcommand("finetune", "Stage-II fine-tuning, optionally from encoder checkpoints");
  add_common(fine, false);
  std::string checkpoints;
  fine->add_option("--checkpoints", checkpoints, "directory holding encoder_<m>.ckpt files");
  auto* mi = app.add_subcommand("verify-mi", "check the information decomposition identities");
  std::size_t trials = 100;
  std::uint64_t mi_seed = 1;
  mi->add_option("--trials", trials, "number of random joints")->check(CLI::NonNegativeNumber);
  mi->add_option("--seed", mi_seed, "seed for the random joints");
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of every loss gradient");
  std::uint64_t gc_seed = 1;
  gc->add_option("--seed", gc_seed, "seed for the random inputs");
  auto* exp = app.add_subcommand("export-data", "write the synthetic dataset as CSV");
  add_common(exp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*run) return cmd_run(opts);
    if (*pre) return cmd_pretrain(opts);
    if (*fine) return cmd_finetune(opts, checkpoints);
    if (*mi) return cmd_verify_mi(trials, mi_seed);
    if (*gc) return cmd_grad_check(gc_seed);
    if (*exp) return cmd_export_data(opts);
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const dimension_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const contract_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
