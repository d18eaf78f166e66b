#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "paanet/checkpoint.hpp"
#include "paanet/dataset.hpp"
#include "paanet/loss.hpp"
#include "paanet/metrics.hpp"
#include "paanet/model.hpp"
#include "paanet/optimizer.hpp"

namespace paanet {

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  MetricsReport val;
};

inline std::string format_epoch_line(const EpochStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f", s.epoch, s.train_loss,
                s.val.dsc, s.val.miou, s.val.recall, s.val.precision);
  return buf;
}

inline MetricsReport evaluate_model(const PaanetT<float>& model, const std::vector<Sample>& samples,
                                    int batch_size, double threshold = 0.5);

// Sequential training loop: seeded shuffle, forward, deep-supervision loss,
// backward, Adam. Writes last.ckpt every epoch and best.ckpt on validation
// DSC improvement when a checkpoint directory is configured.
class Trainer {
 public:
  Trainer(const ModelConfig& mcfg, const TrainConfig& tcfg)
      : tcfg_(tcfg), rng_(tcfg.seed), model_(mcfg, rng_.next()) {
    tcfg_.validate();
    adam_ = AdamStateT<float>::zeros_like(model_.params());
  }

  Trainer(const Checkpoint& ckpt, const TrainConfig& tcfg)
      : tcfg_(tcfg),
        rng_(Rng::from_state(ckpt.rng_state)),
        model_(ckpt.model, ckpt.params),
        adam_(ckpt.adam),
        epochs_done_(ckpt.epochs_done),
        best_val_dsc_(ckpt.best_val_dsc) {
    tcfg_.validate();
  }

  const PaanetT<float>& model() const { return model_; }
  int epochs_done() const { return epochs_done_; }
  double best_val_dsc() const { return best_val_dsc_; }

  Checkpoint snapshot() const {
    Checkpoint c;
    c.model = model_.config();
    c.params = model_.params();
    c.adam = adam_;
    c.epochs_done = epochs_done_;
    c.best_val_dsc = best_val_dsc_;
    c.rng_state = rng_.state();
    return c;
  }

  // Runs epochs epochs_done+1 .. cfg.epochs. Returns one stats entry per
  // epoch run; appends matching lines to cfg.log_path when set and echoes
  // them to `echo` when given.
  std::vector<EpochStats> run(const std::vector<Sample>& train_set,
                              const std::vector<Sample>& val_set, std::ostream* echo = nullptr) {
    detail::require(!train_set.empty(), "train: empty training split");
    std::vector<EpochStats> history;

    std::ofstream log;
    if (!tcfg_.log_path.empty()) {
      // Fresh runs truncate; resumed runs append so the final file matches an
      // uninterrupted run byte for byte.
      log.open(tcfg_.log_path, epochs_done_ == 0 ? std::ios::trunc : std::ios::app);
      if (!log) throw std::runtime_error(tcfg_.log_path + ": cannot write log");
    }

    for (int epoch = epochs_done_ + 1; epoch <= tcfg_.epochs; ++epoch) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.train_loss = run_one_epoch(train_set, epoch);
      stats.val = validate(val_set);
      history.push_back(stats);
      epochs_done_ = epoch;

      const std::string line = format_epoch_line(stats);
      if (log.is_open()) log << line << "\n" << std::flush;
      if (echo) (*echo) << line << "\n" << std::flush;

      if (!tcfg_.checkpoint_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(tcfg_.checkpoint_dir);
        if (stats.val.n_images > 0 && stats.val.dsc > best_val_dsc_) {
          best_val_dsc_ = stats.val.dsc;
          save_checkpoint(snapshot(), (fs::path(tcfg_.checkpoint_dir) / "best.ckpt").string());
        }
        save_checkpoint(snapshot(), (fs::path(tcfg_.checkpoint_dir) / "last.ckpt").string());
      }
    }
    return history;
  }

  // Mean training loss over the epoch, weighted by batch size.
  double run_one_epoch(const std::vector<Sample>& train_set, int epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);

    double loss_sum = 0;
    std::size_t seen = 0;
    int step = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(tcfg_.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(tcfg_.batch_size));
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      ++step;
      loss_sum += train_step(train_set, batch, epoch, step) * static_cast<double>(batch.size());
      seen += batch.size();
    }
    return loss_sum / static_cast<double>(seen);
  }

  // One optimizer step on an explicit batch. Exposed for smoke tests.
  double train_step(const std::vector<Sample>& samples, const std::vector<std::size_t>& batch,
                    int epoch = 0, int step = 0) {
    auto [images, masks] = make_batch(samples, batch);
    model_.zero_grads();
    TensorT<float> loss;
    try {
      loss = total_loss(model_.forward(images), masks);
    } catch (const std::exception& e) {
      throw std::runtime_error("train: epoch " + std::to_string(epoch) + " step " +
                               std::to_string(step) + ": " + e.what());
    }
    backward(loss);
    adam_step(model_.params(), adam_, tcfg_);
    return static_cast<double>(loss.item());
  }

  MetricsReport validate(const std::vector<Sample>& val_set) {
    if (val_set.empty()) {
      MetricsReport r;
      r.dsc = r.miou = r.recall = r.precision = std::nan("");
      r.n_images = 0;
      return r;
    }
    return evaluate_model(model_, val_set, tcfg_.batch_size);
  }

 private:
  TrainConfig tcfg_;
  Rng rng_;
  PaanetT<float> model_;
  AdamStateT<float> adam_;
  int epochs_done_ = 0;
  double best_val_dsc_ = -1.0;
};

// Batched no-grad inference over a sample list; per-image metrics at 0.5.
inline MetricsReport evaluate_model(const PaanetT<float>& model, const std::vector<Sample>& samples,
                                    int batch_size, double threshold) {
  detail::require(batch_size >= 1, "evaluate_model: batch_size must be >= 1");
  NoGradGuard no_grad;
  std::vector<TensorT<float>> preds, gts;
  preds.reserve(samples.size());
  gts.reserve(samples.size());
  const int h = model.config().input_h, w = model.config().input_w;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    auto [images, masks] = make_batch(samples, idx);
    const ModelOutputsT<float> out = model.forward(images);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      TensorT<float> p({1, h, w});
      std::copy_n(out.prediction.data() + i * plane, plane, p.data());
      preds.push_back(std::move(p));
      gts.push_back(samples[idx[i]].mask);
    }
  }
  return evaluate(preds, gts, threshold);
}

// Spec surface: trains from scratch per the two configs, writing checkpoints
// and the log as configured, and returns the final state.
inline Checkpoint train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                        const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                        std::ostream* echo = nullptr) {
  Trainer trainer(mcfg, tcfg);
  trainer.run(train_set, val_set, echo);
  return trainer.snapshot();
}

}  // namespace paanet
