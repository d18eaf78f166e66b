#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "paanet/configfile.hpp"
#include "paanet/model.hpp"
#include "paanet/optimizer.hpp"
#include "paanet/rng.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

// Complete training state: model configuration and parameters, optimizer
// moments, progress counters and the RNG state, so a resumed run continues
// bit-for-bit where the saved one stopped.
struct Checkpoint {
  ModelConfig model;
  ParamMap<float> params;
  AdamStateT<float> adam;
  int epochs_done = 0;
  double best_val_dsc = -1.0;
  Rng::State rng_state = Rng(0).state();
};

namespace detail {

constexpr char kCkptMagic[4] = {'P', 'A', 'A', 'N'};
constexpr std::uint32_t kCkptVersion = 1;

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const std::uint32_t len = read_u32(is);
  if (len > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

inline std::string ckpt_config_text(const Checkpoint& c) {
  std::ostringstream os;
  os << "in_channels = " << c.model.in_channels << "\n";
  os << "encoder_channels = " << c.model.encoder_channels[0] << "," << c.model.encoder_channels[1]
     << "," << c.model.encoder_channels[2] << "," << c.model.encoder_channels[3] << "\n";
  os << "dense_layers = " << c.model.dense_layers << "\n";
  os << "growth = " << c.model.growth << "\n";
  os << "blocks = " << c.model.num_paad_blocks << "\n";
  os << "input_h = " << c.model.input_h << "\n";
  os << "input_w = " << c.model.input_w << "\n";
  os << "epochs_done = " << c.epochs_done << "\n";
  os << "adam_t = " << c.adam.t << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", c.best_val_dsc);  // hex float: exact round trip
  os << "best_val_dsc = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%" PRIx64 ",%" PRIx64 ",%" PRIx64 ",%" PRIx64, c.rng_state[0],
                c.rng_state[1], c.rng_state[2], c.rng_state[3]);
  os << "rng_state = " << buf << "\n";
  return os.str();
}

inline void apply_ckpt_config(Checkpoint& c, const std::string& text) {
  for (const auto& [key, value] : parse_kv_text(text, "checkpoint config")) {
    if (key == "epochs_done") {
      c.epochs_done = static_cast<int>(parse_int(value, key));
    } else if (key == "adam_t") {
      c.adam.t = parse_u64(value, key);
    } else if (key == "best_val_dsc") {
      c.best_val_dsc = std::strtod(value.c_str(), nullptr);
    } else if (key == "rng_state") {
      std::istringstream is(value);
      std::string tok;
      int i = 0;
      while (std::getline(is, tok, ',')) {
        if (i >= 4) throw std::runtime_error("checkpoint: malformed rng_state");
        c.rng_state[static_cast<std::size_t>(i++)] = std::stoull(tok, nullptr, 16);
      }
      if (i != 4) throw std::runtime_error("checkpoint: malformed rng_state");
    } else {
      RunConfig probe;  // reuse the model-key parser; rejects unknown keys
      probe.model = c.model;
      probe.apply(key, value);
      c.model = probe.model;
    }
  }
}

}  // namespace detail

// Layout: "PAAN", u32 version, length-prefixed config text, u32 record count,
// then (path, tensor) records in sorted path order. Optimizer moments are
// stored as tensors under optim.m.<path> / optim.u.<path>.
inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::map<std::string, TensorT<float>> records;
  for (const auto& [p, t] : ckpt.params) records.emplace(p, t);
  for (const auto& [p, t] : ckpt.params) {
    const auto mit = ckpt.adam.m.find(p);
    const auto uit = ckpt.adam.u.find(p);
    if (mit == ckpt.adam.m.end() || uit == ckpt.adam.u.end())
      throw std::runtime_error("checkpoint: optimizer state missing for '" + p + "'");
    records.emplace("optim.m." + p, TensorT<float>(t.shape(), mit->second));
    records.emplace("optim.u." + p, TensorT<float>(t.shape(), uit->second));
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error(path + ": cannot write");
    os.write(detail::kCkptMagic, 4);
    detail::write_u32(os, detail::kCkptVersion);
    detail::write_string(os, detail::ckpt_config_text(ckpt));
    detail::write_u32(os, static_cast<std::uint32_t>(records.size()));
    for (const auto& [p, t] : records) {
      detail::write_string(os, p);
      write_tensor(os, t);
    }
    if (!os) throw std::runtime_error(path + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, detail::kCkptMagic, 4) != 0)
    throw std::runtime_error(path + ": bad magic (not a checkpoint)");
  const std::uint32_t version = detail::read_u32(is);
  if (version != detail::kCkptVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  detail::apply_ckpt_config(ckpt, detail::read_string(is));

  const std::uint32_t count = detail::read_u32(is);
  std::map<std::string, TensorT<float>> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string p = detail::read_string(is);
    TensorT<float> t = read_tensor<float>(is);
    if (!records.emplace(std::move(p), std::move(t)).second)
      throw std::runtime_error(path + ": duplicate record");
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error(path + ": trailing bytes after records");

  for (auto& [p, t] : records) {
    if (p.rfind("optim.m.", 0) == 0) {
      ckpt.adam.m[p.substr(8)] = t.values();
    } else if (p.rfind("optim.u.", 0) == 0) {
      ckpt.adam.u[p.substr(8)] = t.values();
    } else {
      t.set_requires_grad(true);
      ckpt.params.emplace(p, t);
    }
  }

  // Shape audit against the embedded configuration.
  audit_params(ckpt.model, ckpt.params);
  for (const auto& [p, t] : ckpt.params) {
    const auto mit = ckpt.adam.m.find(p);
    const auto uit = ckpt.adam.u.find(p);
    if (mit == ckpt.adam.m.end() || mit->second.size() != t.values().size() ||
        uit == ckpt.adam.u.end() || uit->second.size() != t.values().size())
      throw std::runtime_error(path + ": optimizer state does not mirror parameter '" + p + "'");
  }
  return ckpt;
}

}  // namespace paanet
