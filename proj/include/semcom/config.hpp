#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "semcom/pipeline.hpp"

namespace semcom {

using json = nlohmann::json;

/// A base run plus sweep lists; the cartesian product of the lists is the grid.
struct ExperimentGrid {
  RunConfig base;
  std::vector<Method> methods{Method::proposed, Method::simclr, Method::barlow, Method::supervised};
  std::vector<double> snr_db{10.0, 20.0};
  std::vector<double> label_fraction{1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "results";

  std::vector<RunConfig> cells() const {
    std::vector<RunConfig> out;
    for (Method m : methods)
      for (double snr : snr_db)
        for (double frac : label_fraction)
          for (auto seed : seeds) {
            RunConfig c = base;
            c.method = m;
            c.snr_db = snr;
            c.label_fraction = frac;
            c.seed = seed;
            out.push_back(c);
          }
    return out;
  }

  void validate() const {
    if (methods.empty() || snr_db.empty() || label_fraction.empty() || seeds.empty())
      throw validation_error("ExperimentGrid: every sweep list must be non-empty");
    for (const auto& c : cells()) c.validate();
  }
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw validation_error(where + ": expected a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw validation_error(where + ": unknown key '" + key + "'");
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline json snr_to_json(double snr) {
  if (std::isinf(snr) && snr > 0) return "inf";
  return snr;
}

inline double snr_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "noiseless") return kNoiseless;
    throw validation_error("snr_db: expected a number or \"inf\", got '" + s + "'");
  }
  return j.get<double>();
}

inline json optim_to_json(const OptimConfig& o) {
  return {{"learning_rate", o.learning_rate}, {"momentum", o.momentum}, {"weight_decay", o.weight_decay}};
}

inline void optim_from_json(const json& j, OptimConfig& o, const std::string& where) {
  reject_unknown(j, {"learning_rate", "momentum", "weight_decay"}, where);
  read_opt(j, "learning_rate", o.learning_rate);
  read_opt(j, "momentum", o.momentum);
  read_opt(j, "weight_decay", o.weight_decay);
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  json channel_coeffs = json::array();
  for (const auto& h : c.channel.coefficients) channel_coeffs.push_back({h.real(), h.imag()});
  return {
      {"pretrain_epochs", c.pretrain_epochs},
      {"finetune_epochs", c.finetune_epochs},
      {"batch_size", c.batch_size},
      {"eval_every", c.eval_every},
      {"method", std::string(method_name(c.method))},
      {"snr_db", detail::snr_to_json(c.snr_db)},
      {"label_fraction", c.label_fraction},
      {"seed", c.seed},
      {"channel_in_training", c.channel_in_training},
      {"complex_as_two_reals", c.complex_as_two_reals},
      {"data",
       {{"num_classes", c.data.num_classes},
        {"train_per_class", c.data.train_per_class},
        {"test_per_class", c.data.test_per_class},
        {"shared_dim", c.data.shared_dim},
        {"unique_dims", c.data.unique_dims},
        {"observed_dims", c.data.observed_dims},
        {"separation", c.data.separation},
        {"shared_fraction", c.data.shared_fraction},
        {"noise", c.data.noise},
        {"seed", c.data.seed}}},
      {"model",
       {{"encoder_hidden", c.model.encoder_hidden},
        {"feature_dim", c.model.feature_dim},
        {"decoder_hidden", c.model.decoder_hidden}}},
      {"pretrain_optim", detail::optim_to_json(c.pretrain_optim)},
      {"finetune_optim", detail::optim_to_json(c.finetune_optim)},
      {"loss",
       {{"lambda_modality", c.loss.lambda_modality},
        {"lambda_shared", c.loss.lambda_shared},
        {"lambda_unique", c.loss.lambda_unique},
        {"shared_dims", c.loss.shared_dims},
        {"temperature", c.loss.temperature},
        {"lambda_bt", c.loss.lambda_bt}}},
      {"channel",
       {{"coefficients", channel_coeffs},
        {"fading", c.channel.fading == Fading::fixed ? "fixed" : "rayleigh_per_round"},
        {"stream", c.channel.stream}}},
      {"aug", {{"jitter", c.aug.jitter}, {"dropout", c.aug.dropout}, {"stream", c.aug.stream}}},
  };
}

inline void from_json_into(const json& j, RunConfig& c, std::initializer_list<const char*> extra = {}) {
  std::vector<const char*> keys{"pretrain_epochs", "finetune_epochs", "batch_size", "eval_every", "method",
                                "snr_db", "label_fraction", "seed", "channel_in_training",
                                "complex_as_two_reals", "data", "model", "pretrain_optim", "finetune_optim",
                                "loss", "channel", "aug"};
  keys.insert(keys.end(), extra.begin(), extra.end());
  if (!j.is_object()) throw validation_error("config: expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw validation_error("config: unknown key '" + key + "'");

  using detail::read_opt;
  read_opt(j, "pretrain_epochs", c.pretrain_epochs);
  read_opt(j, "finetune_epochs", c.finetune_epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "eval_every", c.eval_every);
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("snr_db")) c.snr_db = detail::snr_from_json(j.at("snr_db"));
  read_opt(j, "label_fraction", c.label_fraction);
  read_opt(j, "seed", c.seed);
  read_opt(j, "channel_in_training", c.channel_in_training);
  read_opt(j, "complex_as_two_reals", c.complex_as_two_reals);

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::reject_unknown(d,
                           {"num_classes", "train_per_class", "test_per_class", "shared_dim", "unique_dims",
                            "observed_dims", "separation", "shared_fraction", "noise", "seed"},
                           "data");
    read_opt(d, "num_classes", c.data.num_classes);
    read_opt(d, "train_per_class", c.data.train_per_class);
    read_opt(d, "test_per_class", c.data.test_per_class);
    read_opt(d, "shared_dim", c.data.shared_dim);
    read_opt(d, "unique_dims", c.data.unique_dims);
    read_opt(d, "observed_dims", c.data.observed_dims);
    read_opt(d, "separation", c.data.separation);
    read_opt(d, "shared_fraction", c.data.shared_fraction);
    read_opt(d, "noise", c.data.noise);
    read_opt(d, "seed", c.data.seed);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(m, {"encoder_hidden", "feature_dim", "decoder_hidden"}, "model");
    read_opt(m, "encoder_hidden", c.model.encoder_hidden);
    read_opt(m, "feature_dim", c.model.feature_dim);
    read_opt(m, "decoder_hidden", c.model.decoder_hidden);
  }
  if (j.contains("pretrain_optim")) detail::optim_from_json(j.at("pretrain_optim"), c.pretrain_optim, "pretrain_optim");
  if (j.contains("finetune_optim")) detail::optim_from_json(j.at("finetune_optim"), c.finetune_optim, "finetune_optim");
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    detail::reject_unknown(
        l, {"lambda_modality", "lambda_shared", "lambda_unique", "shared_dims", "temperature", "lambda_bt"}, "loss");
    read_opt(l, "lambda_modality", c.loss.lambda_modality);
    read_opt(l, "lambda_shared", c.loss.lambda_shared);
    read_opt(l, "lambda_unique", c.loss.lambda_unique);
    read_opt(l, "shared_dims", c.loss.shared_dims);
    read_opt(l, "temperature", c.loss.temperature);
    read_opt(l, "lambda_bt", c.loss.lambda_bt);
  }
  if (j.contains("channel")) {
    const auto& ch = j.at("channel");
    detail::reject_unknown(ch, {"coefficients", "fading", "stream"}, "channel");
    if (ch.contains("coefficients")) {
      c.channel.coefficients.clear();
      for (const auto& h : ch.at("coefficients")) {
        if (!h.is_array() || h.size() != 2)
          throw validation_error("channel.coefficients: each entry must be [re, im]");
        c.channel.coefficients.emplace_back(h[0].get<double>(), h[1].get<double>());
      }
    }
    if (ch.contains("fading")) {
      const auto f = ch.at("fading").get<std::string>();
      if (f == "fixed")
        c.channel.fading = Fading::fixed;
      else if (f == "rayleigh_per_round")
        c.channel.fading = Fading::rayleigh_per_round;
      else
        throw validation_error("channel.fading: unknown mode '" + f + "'");
    }
    read_opt(ch, "stream", c.channel.stream);
  }
  if (j.contains("aug")) {
    const auto& a = j.at("aug");
    detail::reject_unknown(a, {"jitter", "dropout", "stream"}, "aug");
    read_opt(a, "jitter", c.aug.jitter);
    read_opt(a, "dropout", c.aug.dropout);
    read_opt(a, "stream", c.aug.stream);
  }
}

inline json to_json(const ExperimentGrid& g) {
  json j = to_json(g.base);
  json methods = json::array();
  for (auto m : g.methods) methods.push_back(std::string(method_name(m)));
  json snrs = json::array();
  for (double s : g.snr_db) snrs.push_back(detail::snr_to_json(s));
  j["sweep"] = {{"method", methods}, {"snr_db", snrs}, {"label_fraction", g.label_fraction}, {"seed", g.seeds}};
  j["output_dir"] = g.output_dir;
  return j;
}

inline ExperimentGrid grid_from_json(const json& j) {
  ExperimentGrid g;
  from_json_into(j, g.base, {"sweep", "output_dir"});
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::reject_unknown(s, {"method", "snr_db", "label_fraction", "seed"}, "sweep");
    if (s.contains("method")) {
      g.methods.clear();
      for (const auto& m : s.at("method")) g.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (s.contains("snr_db")) {
      g.snr_db.clear();
      for (const auto& v : s.at("snr_db")) g.snr_db.push_back(detail::snr_from_json(v));
    }
    detail::read_opt(s, "label_fraction", g.label_fraction);
    detail::read_opt(s, "seed", g.seeds);
  } else {
    // Without a sweep block the grid is the single base run.
    g.methods = {g.base.method};
    g.snr_db = {g.base.snr_db};
    g.label_fraction = {g.base.label_fraction};
    g.seeds = {g.base.seed};
  }
  detail::read_opt(j, "output_dir", g.output_dir);
  return g;
}

inline ExperimentGrid load_grid(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw validation_error("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw validation_error("config " + path.string() + ": " + e.what());
  }
  return grid_from_json(j);
}

}  // namespace semcom
