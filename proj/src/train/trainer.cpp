#include "ctx/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ctx/core/error.hpp"
#include "ctx/core/hash.hpp"
#include "ctx/modelzoo/weights.hpp"

namespace ctx {

Tensor3 prepare_eval(const GrayImage& gray, const CanvasSpec& canvas,
                     const NormalizationStats& stats) {
  GrayImage embedded = canvas_embed(gray, canvas);
  return normalize(replicate_channels(embedded), stats);
}

Tensor3 prepare_train(const GrayImage& gray, const CanvasSpec& canvas,
                      const AugmentationConfig& aug, Rng& rng,
                      const NormalizationStats& stats) {
  GrayImage augmented = augment(gray, aug, rng);
  GrayImage embedded = canvas_embed(augmented, canvas);
  return normalize(replicate_channels(embedded), stats);
}

nn::Tensor stack_batch(const std::vector<Tensor3>& items) {
  if (items.empty()) {
    throw CtxError(ErrorKind::training, "stack_batch: empty batch");
  }
  const int c = items[0].channels, h = items[0].height, w = items[0].width;
  nn::Tensor batch({static_cast<int>(items.size()), c, h, w});
  const size_t stride = static_cast<size_t>(c) * h * w;
  for (size_t i = 0; i < items.size(); ++i) {
    std::copy(items[i].data.begin(), items[i].data.end(),
              batch.data.begin() + i * stride);
  }
  return batch;
}

namespace {

// Per-image rng stream derived from (seed, epoch, record index), so the
// augmentation draw for an image does not depend on batch composition.
uint64_t derive_seed(uint64_t seed, int epoch, size_t index) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(seed);
  mix(static_cast<uint64_t>(epoch) + 1);
  mix(static_cast<uint64_t>(index) + 1);
  return h;
}

} // namespace

EpochHistory train_fold(ClassifierModel& model,
                        const DatasetManifest& manifest,
                        const FoldPlan& fold_plan, int fold_index,
                        const TrainConfig& config) {
  if (fold_index < 0 || fold_index >= fold_plan.k) {
    throw CtxError(ErrorKind::training,
                   "fold index " + std::to_string(fold_index) +
                       " outside [0," + std::to_string(fold_plan.k) + ")");
  }
  config.hyper.validate();
  config.schedule.validate();
  const std::vector<size_t> train_idx = fold_plan.train_indices(fold_index);
  if (train_idx.empty()) {
    throw CtxError(ErrorKind::training, "empty training split for fold " +
                                            std::to_string(fold_index));
  }

  auto params = model.params();
  LambState state = LambState::for_params(params);
  std::mt19937_64 shuffle_engine(config.seed);
  const CanvasSpec canvas = model.spec().custom_input;

  EpochHistory history;
  history.reserve(config.epochs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<size_t> order = train_idx;
    std::shuffle(order.begin(), order.end(), shuffle_engine);
    const double lr = lr_at_epoch(config.schedule, epoch);

    double loss_sum = 0.0;
    size_t correct = 0;
    size_t batches = 0;

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(
          order.size(), start + static_cast<size_t>(config.batch_size));
      std::vector<Tensor3> items;
      std::vector<double> labels;
      items.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        const ImageRecord& rec = manifest.records[order[i]];
        Rng rng(derive_seed(config.seed, epoch, order[i]));
        items.push_back(prepare_train(load_image(rec), canvas, config.aug,
                                      rng, config.stats));
        labels.push_back(rec.label == Label::covid ? 1.0 : 0.0);
      }
      nn::Tensor batch = stack_batch(items);
      nn::Tensor logits = model.logits_recorded(batch, /*train=*/true);

      std::vector<double> z(logits.data.begin(), logits.data.end());
      const double loss = bce_loss(z, labels);
      if (!std::isfinite(loss)) {
        throw CtxError(ErrorKind::training,
                       "non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batches));
      }
      loss_sum += loss * static_cast<double>(z.size());
      for (size_t i = 0; i < z.size(); ++i) {
        const int pred = sigmoid(z[i]) >= 0.5 ? 1 : 0;
        if (pred == static_cast<int>(labels[i])) ++correct;
      }

      std::vector<double> grad = bce_loss_grad(z, labels);
      nn::Tensor grad_logits({static_cast<int>(grad.size()), 1});
      std::copy(grad.begin(), grad.end(), grad_logits.data.begin());

      model.zero_grads();
      model.backward(grad_logits);
      lamb_step(params, state, config.hyper, lr);
      ++batches;
    }

    EpochRow row{epoch, loss_sum / static_cast<double>(order.size()),
                 static_cast<double>(correct) /
                     static_cast<double>(order.size()),
                 lr};
    history.push_back(row);
    if (!config.quiet) {
      std::printf("epoch %d/%d loss=%.6f acc=%.4f lr=%g\n", epoch + 1,
                  config.epochs, row.loss, row.accuracy, row.lr);
      std::fflush(stdout);
    }

    const bool last = epoch + 1 == config.epochs;
    const bool interval_hit = config.checkpoint_interval > 0 &&
                              (epoch + 1) % config.checkpoint_interval == 0;
    if (!config.checkpoint_dir.empty() && (last || interval_hit)) {
      std::filesystem::create_directories(config.checkpoint_dir);
      const std::string path = config.checkpoint_dir + "/" +
                               model.spec().name + "_fold" +
                               std::to_string(fold_index) + "_epoch" +
                               std::to_string(epoch + 1) + ".ckpt";
      save_params(path, model.state());
      write_checkpoint_meta(path, model.spec().name, epoch + 1, fold_index,
                            config.config_hash);
    }
  }
  return history;
}

void write_history_csv(const EpochHistory& history, const std::string& path,
                       const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write history: " + path);
  }
  out << "# config " << config_hash << "\n";
  out << "epoch,loss,accuracy,lr\n";
  char buf[128];
  for (const auto& row : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", row.epoch,
                  row.loss, row.accuracy, row.lr);
    out << buf;
  }
}

} // namespace ctx
