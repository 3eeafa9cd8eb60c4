#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctx/dataset/folds.hpp"
#include "ctx/modelzoo/model.hpp"
#include "ctx/preprocess/preprocess.hpp"
#include "ctx/train/optim.hpp"

namespace ctx {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  LambHyper hyper;
  LrSchedule schedule = default_schedule();
  uint64_t seed = 0;
  AugmentationConfig aug;
  NormalizationStats stats = imagenet_stats();
  int checkpoint_interval = 0;     // 0: only the final checkpoint
  std::string checkpoint_dir;     // empty: no checkpoints written
  std::string config_hash = "0";
  bool quiet = false;             // suppress per-epoch progress lines
};

struct EpochRow {
  int epoch;
  double loss;
  double accuracy;
  double lr;
};

using EpochHistory = std::vector<EpochRow>;

// One decoded image run through the deterministic inference pipeline:
// canvas embed -> channel replication -> normalization.
Tensor3 prepare_eval(const GrayImage& gray, const CanvasSpec& canvas,
                     const NormalizationStats& stats);

// Training-time variant: augmentation happens before canvas embedding so
// crops act on real content rather than padding.
Tensor3 prepare_train(const GrayImage& gray, const CanvasSpec& canvas,
                      const AugmentationConfig& aug, Rng& rng,
                      const NormalizationStats& stats);

// Stacks CHW tensors into an (N,C,H,W) batch.
nn::Tensor stack_batch(const std::vector<Tensor3>& items);

// Fine-tunes `model` on every record outside `fold_index`, one lamb_step
// per shuffled mini-batch (trailing partial batch included), lr from the
// schedule. Returns per-epoch (loss, accuracy, lr); the model is updated in
// place. Checkpoints follow the TrainConfig settings.
EpochHistory train_fold(ClassifierModel& model, const DatasetManifest& manifest,
                        const FoldPlan& fold_plan, int fold_index,
                        const TrainConfig& config);

void write_history_csv(const EpochHistory& history, const std::string& path,
                       const std::string& config_hash);

} // namespace ctx
