#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paanet/model.hpp"
#include "paanet/optimizer.hpp"

namespace paanet {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// `key = value` lines; '#' starts a comment; blank lines are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text,
                                                                      const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line;
  int ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(ln) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty())
      throw std::runtime_error(origin + ":" + std::to_string(ln) + ": empty key or value");
    out.emplace_back(key, val);
  }
  return out;
}

inline long long parse_int(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (...) {
    throw std::runtime_error("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  if (used != v.size())
    throw std::runtime_error("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (...) {
    throw std::runtime_error("config: '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  if (used != v.size())
    throw std::runtime_error("config: '" + key + "' expects an unsigned integer, got '" + v + "'");
  return out;
}

inline double parse_double(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (...) {
    throw std::runtime_error("config: '" + key + "' expects a number, got '" + v + "'");
  }
  if (used != v.size())
    throw std::runtime_error("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// The resolved run configuration: model topology plus training protocol.
// Parsed from a key = value file; command-line flags override file entries.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  void apply(const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "in_channels") {
      model.in_channels = static_cast<int>(parse_int(value, key));
    } else if (key == "encoder_channels") {
      std::istringstream is(value);
      std::string tok;
      std::vector<int> ch;
      while (std::getline(is, tok, ',')) ch.push_back(static_cast<int>(parse_int(trim(tok), key)));
      if (ch.size() != 4)
        throw std::runtime_error("config: 'encoder_channels' expects 4 comma-separated values");
      std::copy(ch.begin(), ch.end(), model.encoder_channels.begin());
    } else if (key == "dense_layers") {
      model.dense_layers = static_cast<int>(parse_int(value, key));
    } else if (key == "growth") {
      model.growth = static_cast<int>(parse_int(value, key));
    } else if (key == "blocks") {
      model.num_paad_blocks = static_cast<int>(parse_int(value, key));
    } else if (key == "input_h") {
      model.input_h = static_cast<int>(parse_int(value, key));
    } else if (key == "input_w") {
      model.input_w = static_cast<int>(parse_int(value, key));
    } else if (key == "lr") {
      train.learning_rate = parse_double(value, key);
    } else if (key == "epochs") {
      train.epochs = static_cast<int>(parse_int(value, key));
    } else if (key == "batch") {
      train.batch_size = static_cast<int>(parse_int(value, key));
    } else if (key == "beta1") {
      train.adam_beta1 = parse_double(value, key);
    } else if (key == "beta2") {
      train.adam_beta2 = parse_double(value, key);
    } else if (key == "adam_eps") {
      train.adam_eps = parse_double(value, key);
    } else if (key == "seed") {
      train.seed = parse_u64(value, key);
    } else {
      throw std::runtime_error("config: unknown key '" + key + "'");
    }
  }

  void apply_text(const std::string& text, const std::string& origin) {
    for (const auto& [k, v] : detail::parse_kv_text(text, origin)) apply(k, v);
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open");
    std::ostringstream buf;
    buf << is.rdbuf();
    RunConfig cfg;
    cfg.apply_text(buf.str(), path);
    return cfg;
  }

  // Canonical text form; parsing it back reproduces this config exactly.
  std::string serialize() const {
    std::ostringstream os;
    os << "in_channels = " << model.in_channels << "\n";
    os << "encoder_channels = " << model.encoder_channels[0] << "," << model.encoder_channels[1]
       << "," << model.encoder_channels[2] << "," << model.encoder_channels[3] << "\n";
    os << "dense_layers = " << model.dense_layers << "\n";
    os << "growth = " << model.growth << "\n";
    os << "blocks = " << model.num_paad_blocks << "\n";
    os << "input_h = " << model.input_h << "\n";
    os << "input_w = " << model.input_w << "\n";
    os << "lr = " << detail::format_double(train.learning_rate) << "\n";
    os << "epochs = " << train.epochs << "\n";
    os << "batch = " << train.batch_size << "\n";
    os << "beta1 = " << detail::format_double(train.adam_beta1) << "\n";
    os << "beta2 = " << detail::format_double(train.adam_beta2) << "\n";
    os << "adam_eps = " << detail::format_double(train.adam_eps) << "\n";
    os << "seed = " << train.seed << "\n";
    return os.str();
  }
};

}  // namespace paanet
