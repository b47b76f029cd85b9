#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "semcom/model.hpp"

namespace semcom {

// File layout: one line of compact JSON (the header) terminated by '\n',
// followed by every parameter value as little-endian IEEE-754 f64, in the
// order listed under "tensor_order".

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::string stage;
  std::string kind;
};

namespace detail {

inline void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(buf, 8);
}

inline double get_f64_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("checkpoint: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, Mlp& net, const CheckpointInfo& info) {
  nlohmann::json header;
  header["format"] = "semcom-checkpoint-v1";
  header["kind"] = info.kind;
  header["layer_dims"] = net.dims;
  header["seed"] = info.seed;
  header["stage"] = info.stage;
  std::vector<std::string> order;
  for (auto* p : net.parameters()) order.push_back(p->name);
  header["tensor_order"] = order;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  f << header.dump() << '\n';
  for (auto* p : net.parameters())
    for (double v : p->value.values()) detail::put_f64_le(f, v);
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

inline Mlp load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  std::string line;
  std::getline(f, line);
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "semcom-checkpoint-v1")
    throw validation_error("load_checkpoint: unrecognised format in " + path.string());

  Mlp net;
  net.dims = header.at("layer_dims").get<std::vector<std::size_t>>();
  if (net.dims.size() < 2) throw validation_error("load_checkpoint: bad layer_dims");
  const auto order = header.at("tensor_order").get<std::vector<std::string>>();
  if (order.size() != 2 * (net.dims.size() - 1))
    throw validation_error("load_checkpoint: tensor_order does not match layer_dims");
  for (std::size_t l = 0; l + 1 < net.dims.size(); ++l) {
    Matrix w(net.dims[l + 1], net.dims[l]);
    for (double& v : w.values()) v = detail::get_f64_le(f);
    Matrix b(1, net.dims[l + 1]);
    for (double& v : b.values()) v = detail::get_f64_le(f);
    net.weights.emplace_back(std::move(w), true, order[2 * l]);
    net.biases.emplace_back(std::move(b), true, order[2 * l + 1]);
  }
  if (f.peek() != std::char_traits<char>::eof())
    throw validation_error("load_checkpoint: trailing bytes in " + path.string());
  if (info) {
    info->seed = header.at("seed").get<std::uint64_t>();
    info->stage = header.at("stage").get<std::string>();
    info->kind = header.value("kind", "");
  }
  return net;
}

}  // namespace semcom
