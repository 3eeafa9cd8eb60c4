#include "ctx/explain/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "ctx/core/error.hpp"

namespace ctx {

void TsneParams::validate(size_t n) const {
  if (n < 5) {
    throw CtxError(ErrorKind::evaluation,
                   "tsne: need at least 5 points, got " + std::to_string(n));
  }
  if (perplexity < 1.0 ||
      perplexity >= (static_cast<double>(n) - 1.0) / 3.0) {
    throw CtxError(ErrorKind::evaluation,
                   "tsne: perplexity " + std::to_string(perplexity) +
                       " infeasible for n=" + std::to_string(n) +
                       " (need 1 <= perplexity < (n-1)/3)");
  }
  if (iterations < 250) {
    throw CtxError(ErrorKind::evaluation, "tsne: iterations must be >= 250");
  }
}

namespace {

// Conditional distribution row i with bandwidth beta; returns entropy.
double row_affinities(const std::vector<double>& dist_row, size_t i,
                      double beta, std::vector<double>& p_row) {
  const size_t n = dist_row.size();
  double sum = 0.0;
  for (size_t j = 0; j < n; ++j) {
    p_row[j] = j == i ? 0.0 : std::exp(-beta * dist_row[j]);
    sum += p_row[j];
  }
  if (sum <= 0.0) {
    // Degenerate row (all other points coincident at huge distance);
    // fall back to uniform.
    const double u = 1.0 / static_cast<double>(n - 1);
    for (size_t j = 0; j < n; ++j) p_row[j] = j == i ? 0.0 : u;
    return std::log(static_cast<double>(n - 1));
  }
  double entropy = 0.0;
  for (size_t j = 0; j < n; ++j) {
    p_row[j] /= sum;
    if (p_row[j] > 1e-300) entropy -= p_row[j] * std::log(p_row[j]);
  }
  return entropy;
}

} // namespace

Embedding2D tsne_embed(const std::vector<std::vector<double>>& features,
                       const TsneParams& params) {
  const size_t n = features.size();
  params.validate(n);
  const size_t dims = features[0].size();
  if (dims < 2) {
    throw CtxError(ErrorKind::evaluation, "tsne: need at least 2 features");
  }
  for (const auto& row : features) {
    if (row.size() != dims) {
      throw CtxError(ErrorKind::evaluation, "tsne: ragged feature matrix");
    }
  }

  // Pairwise squared distances.
  std::vector<double> dist(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double d = 0.0;
      for (size_t k = 0; k < dims; ++k) {
        const double diff = features[i][k] - features[j][k];
        d += diff * diff;
      }
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  }

  // Per-point bandwidth from the perplexity constraint (binary search on
  // beta = 1/(2 sigma^2)).
  const double target_entropy = std::log(params.perplexity);
  std::vector<double> p(n * n, 0.0);
  std::vector<double> row(n), dist_row(n);
  for (size_t i = 0; i < n; ++i) {
    std::copy(dist.begin() + i * n, dist.begin() + (i + 1) * n,
              dist_row.begin());
    double beta = 1.0, beta_lo = 0.0,
           beta_hi = std::numeric_limits<double>::infinity();
    double entropy = row_affinities(dist_row, i, beta, row);
    for (int iter = 0; iter < 50 && std::abs(entropy - target_entropy) > 1e-5;
         ++iter) {
      if (entropy > target_entropy) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
      } else {
        beta_hi = beta;
        beta = (beta + beta_lo) / 2.0;
      }
      entropy = row_affinities(dist_row, i, beta, row);
    }
    std::copy(row.begin(), row.end(), p.begin() + i * n);
  }

  // Symmetrize and normalize.
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double v = (p[i * n + j] + p[j * n + i]) / (2.0 * n);
      p[i * n + j] = v;
      p[j * n + i] = v;
    }
    p[i * n + i] = 0.0;
  }
  for (double& v : p) v = std::max(v, 1e-12);

  // Seeded small Gaussian init.
  std::mt19937_64 engine(params.seed);
  std::normal_distribution<double> init(0.0, 1e-4);
  std::vector<double> y(n * 2);
  for (double& v : y) v = init(engine);

  std::vector<double> dy(n * 2, 0.0), velocity(n * 2, 0.0),
      gains(n * 2, 1.0), q(n * n, 0.0);

  for (int iter = 0; iter < params.iterations; ++iter) {
    const double exaggeration =
        iter < params.exaggeration_iters ? params.early_exaggeration : 1.0;
    const double momentum = iter < 250 ? 0.5 : 0.8;

    // Student-t affinities.
    double q_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        const double dx = y[2 * i] - y[2 * j];
        const double dyv = y[2 * i + 1] - y[2 * j + 1];
        const double w = 1.0 / (1.0 + dx * dx + dyv * dyv);
        q[i * n + j] = w;
        q[j * n + i] = w;
        q_sum += 2.0 * w;
      }
    }

    std::fill(dy.begin(), dy.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = q[i * n + j];
        const double qij = std::max(w / q_sum, 1e-12);
        const double mult = (exaggeration * p[i * n + j] - qij) * w;
        dy[2 * i] += 4.0 * mult * (y[2 * i] - y[2 * j]);
        dy[2 * i + 1] += 4.0 * mult * (y[2 * i + 1] - y[2 * j + 1]);
      }
    }

    for (size_t k = 0; k < n * 2; ++k) {
      const bool same_sign = (dy[k] > 0.0) == (velocity[k] > 0.0);
      gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
      gains[k] = std::max(gains[k], 0.01);
      velocity[k] =
          momentum * velocity[k] - params.learning_rate * gains[k] * dy[k];
      y[k] += velocity[k];
    }

    // Keep the embedding centered.
    double cx = 0.0, cy = 0.0;
    for (size_t i = 0; i < n; ++i) {
      cx += y[2 * i];
      cy += y[2 * i + 1];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      y[2 * i] -= cx;
      y[2 * i + 1] -= cy;
    }
  }

  for (double v : y) {
    if (!std::isfinite(v)) {
      throw CtxError(ErrorKind::evaluation, "tsne: diverged to non-finite "
                                            "coordinates");
    }
  }

  Embedding2D out;
  out.coords = std::move(y);
  out.point_meta.assign(n, PointMeta{});
  return out;
}

void write_embedding_csv(const Embedding2D& embedding,
                         const std::string& path,
                         const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write embedding: " + path);
  }
  out << "# config " << config_hash << "\n";
  out << "x,y,label,split\n";
  char buf[96];
  for (size_t i = 0; i < embedding.size(); ++i) {
    const auto& meta = embedding.point_meta[i];
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%s,%s\n", embedding.x(i),
                  embedding.y(i), meta.label ? "COVID" : "NonCOVID",
                  meta.split == Split::train ? "train" : "test");
    out << buf;
  }
}

} // namespace ctx
