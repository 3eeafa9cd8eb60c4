#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctx/dataset/manifest.hpp"

namespace ctx {

// Stratified k-fold assignment: per-class shuffle by seed, then round-robin
// deal, so per-label fold counts differ by at most 1.
struct FoldPlan {
  int k = 0;
  uint64_t seed = 0;
  std::vector<int> assignments; // record index -> fold index in [0, k)

  std::vector<size_t> train_indices(int fold) const;
  std::vector<size_t> test_indices(int fold) const;
};

FoldPlan stratified_folds(const DatasetManifest& manifest, int k,
                          uint64_t seed);

// CSV columns path,fold after a `# config <hash>` line. Row order follows
// the manifest.
void write_fold_csv(const DatasetManifest& manifest, const FoldPlan& plan,
                    const std::string& path, const std::string& config_hash);
FoldPlan read_fold_csv(const DatasetManifest& manifest,
                       const std::string& path);

} // namespace ctx
