#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctx {

struct TsneParams {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  uint64_t seed = 0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;

  // Requires 1 <= perplexity < (n-1)/3 and iterations >= 250.
  void validate(size_t n) const;
};

enum class Split { train, test };

struct PointMeta {
  int label = 0; // 1 = COVID, 0 = NonCOVID
  Split split = Split::train;
};

struct Embedding2D {
  std::vector<double> coords; // N x 2, row-major
  std::vector<PointMeta> point_meta;

  size_t size() const { return coords.size() / 2; }
  double x(size_t i) const { return coords[2 * i]; }
  double y(size_t i) const { return coords[2 * i + 1]; }
};

// Exact t-SNE: Gaussian input affinities with per-point bandwidth solving
// the perplexity constraint, Student-t output affinities, KL gradient
// descent with momentum, gains and early exaggeration. Deterministic for a
// fixed seed (single-threaded).
Embedding2D tsne_embed(const std::vector<std::vector<double>>& features,
                       const TsneParams& params);

void write_embedding_csv(const Embedding2D& embedding,
                         const std::string& path,
                         const std::string& config_hash);

// Renders the four (label, split) groups in the usual color convention
// (COVID train red / test blue, NonCOVID train yellow / test green) with a
// legend; returns the number of non-empty groups drawn.
int scatter_plot(const Embedding2D& embedding, const std::string& out_path);

} // namespace ctx
