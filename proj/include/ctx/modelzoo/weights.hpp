#pragma once

#include <map>
#include <string>

#include "ctx/nn/tensor.hpp"

namespace ctx {

// Binary parameter dictionary: magic, then (name, dims, f64 data) entries.
void save_params(const std::string& path,
                 const std::map<std::string, nn::Tensor>& params);
std::map<std::string, nn::Tensor> load_params(const std::string& path);

// Sidecar metadata next to a checkpoint: plain key=value lines.
void write_checkpoint_meta(const std::string& ckpt_path,
                           const std::string& arch, int epoch, int fold,
                           const std::string& config_hash);

// Content-addressed backbone weight store:
//   <dir>/index.txt          lines: <arch> <fnv1a64-hex> [url]
//   <dir>/<arch>/<hex>.bin   parameter dictionary
//
// resolve() returns the verified local path, fetching from the indexed URL
// when the file is absent. Failure modes carry distinguishable messages:
// "network unavailable" (no index entry / no URL / fetch failed) vs
// "checksum mismatch" (file present but hash differs from the index).
struct WeightCache {
  std::string dir;

  explicit WeightCache(std::string cache_dir) : dir(std::move(cache_dir)) {}

  std::string resolve(const std::string& arch) const;

  // Registers a weight file: copies it into the content-addressed layout
  // and appends/updates the index row.
  void add(const std::string& arch, const std::string& src_path,
           const std::string& url = "") const;
};

// CTX_CACHE env var, falling back to <home>/.cache/ctx-weights.
std::string default_cache_dir();

} // namespace ctx
