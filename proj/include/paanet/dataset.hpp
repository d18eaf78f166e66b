#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paanet/parallel.hpp"
#include "paanet/pnm.hpp"
#include "paanet/rng.hpp"
#include "paanet/synth.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

enum class Split { kTrain, kVal, kTest };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + s + "' (train|val|test)");
}

struct Sample {
  TensorT<float> image;  // [3,H,W], values in [0,1]
  TensorT<float> mask;   // [1,H,W], values in {0,1}
  std::string id;
};

// Seeded shuffle, then contiguous cuts at floor(0.8n) and floor(0.9n).
inline std::map<std::string, Split> split_ids(std::vector<std::string> ids, std::uint64_t seed) {
  if (ids.size() < 10)
    throw std::invalid_argument("split: need at least 10 ids, got " + std::to_string(ids.size()));
  Rng rng(seed);
  rng.shuffle(ids);
  const std::size_t n = ids.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_trainval = n * 9 / 10;
  std::map<std::string, Split> out;
  for (std::size_t i = 0; i < n; ++i)
    out[ids[i]] = i < n_train ? Split::kTrain : (i < n_trainval ? Split::kVal : Split::kTest);
  return out;
}

inline void write_splits_file(const std::string& path,
                              const std::map<std::string, Split>& assignment) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot write");
  for (const auto& [id, split] : assignment) os << id << '\t' << to_string(split) << '\n';
  if (!os) throw std::runtime_error(path + ": write failed");
}

inline std::map<std::string, Split> read_splits_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  std::map<std::string, Split> out;
  std::string line;
  int ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(ln) + ": expected id<TAB>split");
    out[line.substr(0, tab)] = parse_split(line.substr(tab + 1));
  }
  return out;
}

// Writes count image/mask pairs plus splits.txt under out_dir:
//   out_dir/images/<id>.ppm   out_dir/masks/<id>.pgm   out_dir/splits.txt
// Fully determined by the spec (per-sample streams are derived from the seed
// and the sample id). Returns the generated ids.
inline std::vector<std::string> generate(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");

  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) ids.push_back(sample_id(spec, i));

  std::vector<std::string> errors(ids.size());
  parallel_for(static_cast<std::int64_t>(ids.size()), [&](std::int64_t i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      const SynthSample s = make_sample(spec, Rng(hash_seed(spec.seed, ids[idx])));
      PnmImage img{spec.w, spec.h, 3, s.image};
      PnmImage msk{spec.w, spec.h, 1, s.mask};
      write_pnm((fs::path(out_dir) / "images" / (ids[idx] + ".ppm")).string(), img);
      write_pnm((fs::path(out_dir) / "masks" / (ids[idx] + ".pgm")).string(), msk);
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("generate: " + e);

  write_splits_file((fs::path(out_dir) / "splits.txt").string(), split_ids(ids, spec.seed));
  return ids;
}

// Loads one split in stable lexicographic id order. Images decode to [0,1]
// floats, masks binarize at 128. Pairing and dimension mismatches are
// reported with the offending stem.
inline std::vector<Sample> load_dataset(const std::string& dir, Split split) {
  namespace fs = std::filesystem;
  const auto assignment = read_splits_file((fs::path(dir) / "splits.txt").string());
  std::vector<std::string> ids;
  for (const auto& [id, s] : assignment)
    if (s == split) ids.push_back(id);
  std::sort(ids.begin(), ids.end());

  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const std::string img_path = (fs::path(dir) / "images" / (id + ".ppm")).string();
    const std::string msk_path = (fs::path(dir) / "masks" / (id + ".pgm")).string();
    if (!fs::exists(img_path)) throw std::runtime_error("load_dataset: missing image for '" + id + "'");
    if (!fs::exists(msk_path)) throw std::runtime_error("load_dataset: missing mask for '" + id + "'");
    const PnmImage img = read_pnm(img_path);
    const PnmImage msk = read_pnm(msk_path);
    if (img.channels != 3) throw std::runtime_error("load_dataset: '" + id + "' image is not RGB");
    if (msk.channels != 1) throw std::runtime_error("load_dataset: '" + id + "' mask is not grayscale");
    if (img.width != msk.width || img.height != msk.height)
      throw std::runtime_error("load_dataset: '" + id + "' image/mask dimensions differ");

    Sample s;
    s.id = id;
    s.image = TensorT<float>({3, img.height, img.width});
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < 3; ++c)
        s.image.data()[static_cast<std::size_t>(c) * plane + p] =
            static_cast<float>(img.pixels[p * 3 + static_cast<std::size_t>(c)]) / 255.0f;
    s.mask = TensorT<float>({1, msk.height, msk.width});
    for (std::size_t p = 0; p < plane; ++p)
      s.mask.data()[p] = msk.pixels[p] >= 128 ? 1.0f : 0.0f;
    out.push_back(std::move(s));
  }
  return out;
}

// Stacks samples (by index) into batch tensors [N,3,H,W] / [N,1,H,W].
inline std::pair<TensorT<float>, TensorT<float>> make_batch(const std::vector<Sample>& samples,
                                                            const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw std::invalid_argument("make_batch: empty index list");
  const int h = samples[idx[0]].image.dim(1);
  const int w = samples[idx[0]].image.dim(2);
  const int n = static_cast<int>(idx.size());
  TensorT<float> images({n, 3, h, w});
  TensorT<float> masks({n, 1, h, w});
  const std::size_t iplane = static_cast<std::size_t>(3) * h * w;
  const std::size_t mplane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    const Sample& s = samples[idx[static_cast<std::size_t>(i)]];
    if (s.image.dim(1) != h || s.image.dim(2) != w)
      throw std::invalid_argument("make_batch: inconsistent sample sizes");
    std::copy_n(s.image.data(), iplane, images.data() + static_cast<std::size_t>(i) * iplane);
    std::copy_n(s.mask.data(), mplane, masks.data() + static_cast<std::size_t>(i) * mplane);
  }
  return {std::move(images), std::move(masks)};
}

}  // namespace paanet
