#include <doctest.h>

#include <cmath>
#include <random>

#include "ctx/core/error.hpp"
#include "ctx/explain/gradcam.hpp"
#include "ctx/explain/tsne.hpp"
#include "test_models.hpp"
#include "test_util.hpp"

using namespace ctx;
using testutil::TempDir;

// ---------------------------------------------------------------------------
// Hand-built linear networks for closed-form Grad-CAM checks

namespace {

// input (in_ch, 2, 2) -> 1x1 conv -> [tap] -> global pool -> linear head.
std::unique_ptr<ClassifierModel> linear_cam_model(
    int in_ch, int out_ch, const std::vector<double>& conv_w,
    const std::vector<double>& head_w) {
  ModelSpec spec;
  spec.name = "LinearCam";
  spec.custom_input = {2, 2, 0.0f};
  spec.default_input = spec.custom_input;
  spec.feature_dim = out_ch;
  spec.gradcam_layer = "features.conv";

  auto net = std::make_unique<nn::Network>();
  net->add("features.conv",
           std::make_unique<nn::Conv2d>("features", in_ch, out_ch, 1, 1, 0));
  net->add("pool", std::make_unique<nn::GlobalAvgPool>("pool"));
  auto head = std::make_unique<nn::Linear>("head", out_ch, 1);

  Rng rng(0);
  net->init(rng);
  head->init(rng);

  auto params = net->params();
  REQUIRE(params[0]->value.numel() == conv_w.size());
  params[0]->value.data = conv_w;
  params[1]->value.zero(); // conv bias
  REQUIRE(head->weight().value.numel() == head_w.size());
  head->weight().value.data = head_w;
  head->bias().value.zero();

  return std::make_unique<ClassifierModel>(spec, std::move(net),
                                           std::move(head));
}

Tensor3 tensor_from(const std::vector<double>& chw, int c, int h, int w) {
  Tensor3 t(c, h, w);
  t.data = chw;
  return t;
}

// The independent rule: alpha_k = mean_k(G), L = relu(sum alpha_k A_k),
// min-max normalized.
std::vector<double> oracle_cam(const std::vector<std::vector<double>>& acts,
                               const std::vector<double>& alphas) {
  const size_t plane = acts[0].size();
  std::vector<double> map(plane, 0.0);
  for (size_t k = 0; k < acts.size(); ++k) {
    for (size_t i = 0; i < plane; ++i) map[i] += alphas[k] * acts[k][i];
  }
  for (double& v : map) v = std::max(v, 0.0);
  const double max_v = *std::max_element(map.begin(), map.end());
  if (max_v > 0.0) {
    const double min_v = *std::min_element(map.begin(), map.end());
    const double range = max_v - min_v;
    for (double& v : map) v = range > 0 ? (v - min_v) / range : 1.0;
  }
  return map;
}

} // namespace

TEST_CASE("grad_cam: single-channel hand example") {
  // A = conv(input) with unit 1x1 conv = [[1,2],[0,1]]; head weight 1 so
  // G is uniform; the normalized map is [[0.5,1],[0,0.5]].
  auto model = linear_cam_model(1, 1, {1.0}, {1.0});
  Tensor3 input = tensor_from({1.0, 2.0, 0.0, 1.0}, 1, 2, 2);
  SaliencyMap map = grad_cam(*model, input, "features.conv");
  REQUIRE(map.values.size() == 4);
  CHECK(map.values[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(map.values[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(map.values[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(map.values[3] == doctest::Approx(0.5).epsilon(1e-12));
  // Upsampled grid matches the canvas and stays in [0,1].
  CHECK(map.upsampled.width == 2);
  CHECK(map.upsampled.height == 2);
}

TEST_CASE("grad_cam: all-negative gradient yields the all-zero map") {
  auto model = linear_cam_model(1, 1, {1.0}, {-1.0});
  Tensor3 input = tensor_from({1.0, 2.0, 0.5, 1.0}, 1, 2, 2);
  SaliencyMap map = grad_cam(*model, input, "features.conv");
  for (double v : map.values) CHECK(v == 0.0);
  for (float v : map.upsampled.data) CHECK(v == 0.0f);
}

TEST_CASE("grad_cam: equal channels with opposite weights cancel") {
  // conv 1->2 duplicating the input; head weights +c, -c.
  auto model = linear_cam_model(1, 2, {1.0, 1.0}, {0.7, -0.7});
  Tensor3 input = tensor_from({0.3, 1.2, 0.8, 0.1}, 1, 2, 2);
  SaliencyMap map = grad_cam(*model, input, "features.conv");
  for (double v : map.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("grad_cam: 2-channel closed form matches the oracle") {
  // conv 2->2: A1 = x1 + 2 x2, A2 = 3 x1 - x2; head (0.5, 0.25).
  const std::vector<double> conv_w{1.0, 2.0, 3.0, -1.0};
  const std::vector<double> head_w{0.5, 0.25};
  auto model = linear_cam_model(2, 2, conv_w, head_w);
  const std::vector<double> x{0.2, 0.9, 0.4, 0.0,   // channel 1
                              0.7, 0.1, 0.5, 0.3};  // channel 2
  Tensor3 input = tensor_from(x, 2, 2, 2);
  SaliencyMap map = grad_cam(*model, input, "features.conv");

  // Oracle activations and alphas (G_k = head_w[k] / 4 everywhere).
  std::vector<std::vector<double>> acts(2, std::vector<double>(4));
  for (int i = 0; i < 4; ++i) {
    acts[0][i] = conv_w[0] * x[i] + conv_w[1] * x[4 + i];
    acts[1][i] = conv_w[2] * x[i] + conv_w[3] * x[4 + i];
  }
  const std::vector<double> alphas{head_w[0] / 4.0, head_w[1] / 4.0};
  const std::vector<double> want = oracle_cam(acts, alphas);
  for (int i = 0; i < 4; ++i) {
    CHECK(map.values[i] == doctest::Approx(want[i]).epsilon(1e-6));
  }
}

TEST_CASE("grad_cam map is invariant to positive logit rescaling") {
  const std::vector<double> conv_w{1.0, 2.0, 3.0, -1.0};
  const std::vector<double> x{0.2, 0.9, 0.4, 0.0, 0.7, 0.1, 0.5, 0.3};
  Tensor3 input = tensor_from(x, 2, 2, 2);

  auto base = linear_cam_model(2, 2, conv_w, {0.5, 0.25});
  auto scaled = linear_cam_model(2, 2, conv_w, {0.5 * 7.0, 0.25 * 7.0});
  SaliencyMap a = grad_cam(*base, input, "features.conv");
  SaliencyMap b = grad_cam(*scaled, input, "features.conv");
  for (size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-6));
  }
}

TEST_CASE("grad_cam: unknown tap lists available layers") {
  auto model = testutil::tiny_model(3);
  Tensor3 input(3, 24, 32);
  try {
    grad_cam(*model, input, "bogus.layer");
    FAIL("expected error");
  } catch (const CtxError& e) {
    CHECK(std::string(e.what()).find("features.relu") != std::string::npos);
  }
}

TEST_CASE("grad_cam upsamples to the canvas resolution") {
  auto model = testutil::tiny_model(3);
  Tensor3 input(3, 24, 32);
  for (size_t i = 0; i < input.data.size(); ++i) {
    input.data[i] = 0.01 * static_cast<double>(i % 97);
  }
  SaliencyMap map = grad_cam(*model, input, "features.relu");
  CHECK(map.grid_height == 6);
  CHECK(map.grid_width == 8);
  CHECK(map.upsampled.width == 32);
  CHECK(map.upsampled.height == 24);
  for (float v : map.upsampled.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

// ---------------------------------------------------------------------------
// overlay

TEST_CASE("overlay with alpha 0 returns the image") {
  SaliencyMap map;
  map.grid_height = 2;
  map.grid_width = 2;
  map.values = {0.0, 1.0, 0.5, 0.2};
  map.upsampled = GrayImage(4, 4, 1, 0.5f);
  RgbImage img(4, 4, 3, 0.3f);
  RgbImage out = overlay(map, img, 0.0);
  CHECK(out.data == img.data);
}

TEST_CASE("overlay with alpha 1 and a zero map is a uniform cold color") {
  SaliencyMap map;
  map.upsampled = GrayImage(5, 3, 1, 0.0f);
  RgbImage img(5, 3, 3, 0.9f);
  RgbImage out = overlay(map, img, 1.0);
  for (int c = 0; c < 3; ++c) {
    const float first = out.at(c, 0, 0);
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 5; ++x) {
        CHECK(out.at(c, y, x) == first);
      }
    }
  }
}

TEST_CASE("overlay output stays in [0,1] for random blends") {
  std::mt19937_64 engine(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    SaliencyMap map;
    map.upsampled = GrayImage(4, 4, 1);
    for (float& v : map.upsampled.data) {
      v = static_cast<float>(unit(engine));
    }
    RgbImage img(4, 4, 3);
    for (float& v : img.data) v = static_cast<float>(unit(engine));
    RgbImage out = overlay(map, img, unit(engine));
    for (float v : out.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("overlay rejects mismatched dimensions") {
  SaliencyMap map;
  map.upsampled = GrayImage(4, 4, 1, 0.0f);
  RgbImage img(5, 4, 3, 0.5f);
  CHECK_THROWS_AS(overlay(map, img, 0.5), CtxError);
}

// ---------------------------------------------------------------------------
// t-SNE

namespace {

std::vector<std::vector<double>> two_blobs(int per_blob, int dims,
                                           double separation, uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> out;
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      std::vector<double> row(dims);
      for (int d = 0; d < dims; ++d) {
        row[d] = noise(engine) + (b == 1 && d == 0 ? separation : 0.0);
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

// Mean silhouette over true labels, computed directly on the embedding.
double silhouette(const Embedding2D& e, int per_blob) {
  const int n = static_cast<int>(e.size());
  auto dist = [&](int i, int j) {
    const double dx = e.x(i) - e.x(j);
    const double dy = e.y(i) - e.y(j);
    return std::sqrt(dx * dx + dy * dy);
  };
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int own = i < per_blob ? 0 : 1;
    double a = 0.0, b = 0.0;
    int a_count = 0, b_count = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const int other = j < per_blob ? 0 : 1;
      if (other == own) {
        a += dist(i, j);
        ++a_count;
      } else {
        b += dist(i, j);
        ++b_count;
      }
    }
    a /= a_count;
    b /= b_count;
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

} // namespace

TEST_CASE("tsne_embed: fixed seed is bitwise reproducible") {
  auto features = two_blobs(12, 8, 6.0, 3);
  TsneParams params;
  params.perplexity = 5.0;
  params.iterations = 300;
  params.seed = 11;
  Embedding2D a = tsne_embed(features, params);
  Embedding2D b = tsne_embed(features, params);
  CHECK(a.coords == b.coords);

  params.seed = 12;
  Embedding2D c = tsne_embed(features, params);
  CHECK(a.coords != c.coords);
}

TEST_CASE("tsne_embed: output is N x 2 and finite") {
  auto features = two_blobs(10, 6, 4.0, 5);
  TsneParams params;
  params.perplexity = 4.0;
  params.iterations = 260;
  Embedding2D e = tsne_embed(features, params);
  CHECK(e.size() == 20);
  CHECK(e.coords.size() == 40);
  for (double v : e.coords) CHECK(std::isfinite(v));
}

TEST_CASE("tsne_embed separates well-separated blobs") {
  const int per_blob = 30;
  auto features = two_blobs(per_blob, 50, 10.0, 7);
  TsneParams params;
  params.perplexity = 10.0;
  params.iterations = 500;
  Embedding2D e = tsne_embed(features, params);
  CHECK(silhouette(e, per_blob) > 0.5);
}

TEST_CASE("tsne_embed: integer translation leaves the embedding unchanged") {
  // Integer features and an integer offset keep pairwise differences exact
  // in floating point, so affinities and the final coords match exactly.
  std::mt19937_64 engine(9);
  std::uniform_int_distribution<int> val(-8, 8);
  std::vector<std::vector<double>> base;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> row(5);
    for (double& v : row) v = static_cast<double>(val(engine));
    base.push_back(row);
  }
  std::vector<std::vector<double>> shifted = base;
  for (auto& row : shifted) {
    for (size_t d = 0; d < row.size(); ++d) row[d] += 100.0 + double(d);
  }

  // Pairwise distances agree.
  for (size_t i = 0; i < base.size(); ++i) {
    for (size_t j = 0; j < base.size(); ++j) {
      double da = 0, db = 0;
      for (size_t d = 0; d < base[i].size(); ++d) {
        da += (base[i][d] - base[j][d]) * (base[i][d] - base[j][d]);
        db += (shifted[i][d] - shifted[j][d]) * (shifted[i][d] - shifted[j][d]);
      }
      CHECK(da == doctest::Approx(db).epsilon(1e-12));
    }
  }

  TsneParams params;
  params.perplexity = 4.0;
  params.iterations = 300;
  params.seed = 2;
  Embedding2D a = tsne_embed(base, params);
  Embedding2D b = tsne_embed(shifted, params);
  CHECK(a.coords == b.coords);
}

TEST_CASE("tsne_embed validates perplexity and size") {
  auto features = two_blobs(3, 4, 2.0, 1); // n = 6
  TsneParams params;
  params.perplexity = 2.0; // infeasible: needs < (6-1)/3
  CHECK_THROWS_AS(tsne_embed(features, params), CtxError);

  std::vector<std::vector<double>> tiny(3, std::vector<double>(4, 0.0));
  TsneParams p2;
  CHECK_THROWS_AS(tsne_embed(tiny, p2), CtxError);
}

// ---------------------------------------------------------------------------
// scatter plot + csv artifacts

TEST_CASE("scatter_plot renders one legend entry per non-empty group") {
  TempDir tmp("scatter");
  Embedding2D e;
  e.coords = {0, 0, 1, 1, -1, 0.5, 0.5, -1};
  e.point_meta = {{1, Split::train},
                  {1, Split::test},
                  {0, Split::train},
                  {0, Split::test}};
  CHECK(scatter_plot(e, tmp.sub("four.png")) == 4);
  cv::Mat fig = cv::imread(tmp.sub("four.png"));
  CHECK_FALSE(fig.empty());

  // No test samples: only two groups rendered, still no error.
  Embedding2D train_only;
  train_only.coords = {0, 0, 1, 1, 2, 2};
  train_only.point_meta = {{1, Split::train},
                           {0, Split::train},
                           {1, Split::train}};
  CHECK(scatter_plot(train_only, tmp.sub("two.png")) == 2);
  CHECK_FALSE(cv::imread(tmp.sub("two.png")).empty());
}

TEST_CASE("embedding csv lists coords with label and split") {
  TempDir tmp("embed_csv");
  Embedding2D e;
  e.coords = {1.5, -2.0, 3.0, 4.0};
  e.point_meta = {{1, Split::train}, {0, Split::test}};
  write_embedding_csv(e, tmp.sub("e.csv"), "fe01");
  const std::string text = testutil::read_file(tmp.sub("e.csv"));
  CHECK(text.find("# config fe01") == 0);
  CHECK(text.find("x,y,label,split") != std::string::npos);
  CHECK(text.find("1.5,-2,COVID,train") != std::string::npos);
  CHECK(text.find("3,4,NonCOVID,test") != std::string::npos);
}

TEST_CASE("saliency map csv writes the raw grid") {
  TempDir tmp("map_csv");
  SaliencyMap map;
  map.grid_height = 2;
  map.grid_width = 2;
  map.values = {0.0, 0.25, 0.5, 1.0};
  write_map_csv(map, tmp.sub("m.csv"), "77");
  const std::string text = testutil::read_file(tmp.sub("m.csv"));
  CHECK(text.find("# config 77") == 0);
  CHECK(text.find("0,0.25") != std::string::npos);
  CHECK(text.find("0.5,1") != std::string::npos);
}
