#pragma once

#include <cstdint>
#include <string>

#include "ctx/dataset/manifest.hpp"
#include "ctx/explain/tsne.hpp"
#include "ctx/train/trainer.hpp"

namespace ctx {

// Everything a pipeline run needs, parsed from one key/value config file.
// Unset keys take the documented defaults (batch 32, epochs 100, lr 3e-4,
// the stepped schedule, weight decay 1, k = 5).
struct PipelineConfig {
  // [dataset]
  std::string dataset_root;
  DatasetId dataset_id = DatasetId::sars_cov_2_ct;

  // [split]
  int k = 5;
  uint64_t split_seed = 0;

  // [model]
  std::string model_name;
  bool pretrained = false;
  uint64_t model_seed = 0;
  std::string weight_cache; // empty: CTX_CACHE / default location

  // [train]
  TrainConfig train;

  // [explain]
  TsneParams tsne;
  int explain_fold = 0;
  double gradcam_alpha = 0.5;
  int gradcam_count = 8;

  // [output]
  std::string output_dir = "out";
  bool report_markdown = true;
  bool report_csv = true;

  std::string config_hash = "0"; // fnv1a64 of the raw file bytes
};

// Parses and validates. Throws CtxError(config) with the file line number
// on parse errors and the offending key on semantic errors; unknown
// sections/keys are rejected.
PipelineConfig validate_config(const std::string& path);

} // namespace ctx
