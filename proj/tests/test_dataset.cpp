#include <doctest.h>

#include <map>
#include <set>

#include "ctx/core/error.hpp"
#include "ctx/dataset/folds.hpp"
#include "ctx/dataset/manifest.hpp"
#include "test_util.hpp"

using namespace ctx;
using testutil::TempDir;

namespace {

// Manifest with fake paths; folds never touch the files.
DatasetManifest synthetic_manifest(int covid, int non_covid) {
  DatasetManifest m;
  for (int i = 0; i < covid; ++i) {
    m.records.push_back({"covid_" + std::to_string(i) + ".png", Label::covid,
                         64, 64, DatasetId::sars_cov_2_ct});
  }
  for (int i = 0; i < non_covid; ++i) {
    m.records.push_back({"non_" + std::to_string(i) + ".png",
                         Label::non_covid, 64, 64,
                         DatasetId::sars_cov_2_ct});
  }
  return m;
}

std::map<int, int> fold_counts(const DatasetManifest& m, const FoldPlan& plan,
                               Label label) {
  std::map<int, int> counts;
  for (int f = 0; f < plan.k; ++f) counts[f] = 0;
  for (size_t i = 0; i < m.records.size(); ++i) {
    if (m.records[i].label == label) ++counts[plan.assignments[i]];
  }
  return counts;
}

} // namespace

TEST_CASE("scan_dataset enumerates both classes with dimensions") {
  TempDir tmp("scan");
  testutil::make_bright_dark_dataset(tmp.path(), 3, 20, 10);

  DatasetManifest m = scan_dataset(tmp.path(), DatasetId::sars_cov_2_ct);
  CHECK(m.count(Label::covid) == 3);
  CHECK(m.count(Label::non_covid) == 3);
  CHECK(m.total() == 6);
  CHECK(m.skipped == 0);
  for (const auto& r : m.records) {
    CHECK(r.width == 20);
    CHECK(r.height == 10);
  }
  // COVID rows first, each class sorted by path.
  CHECK(m.records.front().label == Label::covid);
  for (size_t i = 1; i < 3; ++i) {
    CHECK(m.records[i - 1].path < m.records[i].path);
  }
}

TEST_CASE("scan_dataset: empty class directories give empty manifest") {
  TempDir tmp("scan_empty");
  std::filesystem::create_directories(tmp.sub("COVID"));
  std::filesystem::create_directories(tmp.sub("non-COVID"));
  DatasetManifest m = scan_dataset(tmp.path(), DatasetId::covid19_ct);
  CHECK(m.total() == 0);
  CHECK(m.count(Label::covid) == 0);
  CHECK(m.count(Label::non_covid) == 0);
}

TEST_CASE("scan_dataset: missing class directory is a structural error") {
  TempDir tmp("scan_missing");
  std::filesystem::create_directories(tmp.sub("COVID"));
  CHECK_THROWS_AS(scan_dataset(tmp.path(), DatasetId::sars_cov_2_ct),
                  CtxError);
}

TEST_CASE("scan_dataset: undecodable file is skipped and counted") {
  TempDir tmp("scan_bad");
  testutil::make_bright_dark_dataset(tmp.path(), 2, 16, 16);
  std::ofstream bad(tmp.sub("COVID/broken.png"), std::ios::binary);
  bad << "not a png";
  bad.close();

  DatasetManifest m = scan_dataset(tmp.path(), DatasetId::sars_cov_2_ct);
  CHECK(m.total() == 4);
  CHECK(m.skipped == 1);
}

TEST_CASE("scan_dataset is idempotent: byte-identical manifest files") {
  TempDir tmp("scan_idem");
  testutil::make_bright_dark_dataset(tmp.path(), 4, 12, 12);

  DatasetManifest m1 = scan_dataset(tmp.path(), DatasetId::sars_cov_2_ct);
  DatasetManifest m2 = scan_dataset(tmp.path(), DatasetId::sars_cov_2_ct);
  write_manifest_csv(m1, tmp.sub("m1.csv"), "cafe");
  write_manifest_csv(m2, tmp.sub("m2.csv"), "cafe");
  CHECK(testutil::read_file(tmp.sub("m1.csv")) ==
        testutil::read_file(tmp.sub("m2.csv")));
  CHECK(testutil::read_file(tmp.sub("m1.csv")).find("# config cafe") == 0);
}

TEST_CASE("manifest csv round-trips") {
  TempDir tmp("manifest_rt");
  testutil::make_bright_dark_dataset(tmp.path(), 2, 9, 7);
  DatasetManifest m = scan_dataset(tmp.path(), DatasetId::covid19_ct);
  write_manifest_csv(m, tmp.sub("m.csv"), "0");
  DatasetManifest back = read_manifest_csv(tmp.sub("m.csv"),
                                           DatasetId::covid19_ct);
  REQUIRE(back.total() == m.total());
  for (int i = 0; i < m.total(); ++i) {
    CHECK(back.records[i].path == m.records[i].path);
    CHECK(back.records[i].label == m.records[i].label);
    CHECK(back.records[i].width == m.records[i].width);
    CHECK(back.records[i].height == m.records[i].height);
  }
}

TEST_CASE("stratified_folds: SARS-CoV-2 class counts give the derived plan") {
  DatasetManifest m = synthetic_manifest(1252, 1230);
  FoldPlan plan = stratified_folds(m, 5, 42);

  auto covid = fold_counts(m, plan, Label::covid);
  auto non = fold_counts(m, plan, Label::non_covid);
  // 1252 = 2*251 + 3*250, 1230 = 5*246.
  std::multiset<int> covid_counts, non_counts, totals;
  for (int f = 0; f < 5; ++f) {
    covid_counts.insert(covid[f]);
    non_counts.insert(non[f]);
    totals.insert(covid[f] + non[f]);
  }
  CHECK(covid_counts == std::multiset<int>{250, 250, 250, 251, 251});
  CHECK(non_counts == std::multiset<int>{246, 246, 246, 246, 246});
  CHECK(totals == std::multiset<int>{496, 496, 496, 497, 497});
}

TEST_CASE("stratified_folds: COVID19-CT class counts give the derived plan") {
  DatasetManifest m = synthetic_manifest(349, 397);
  FoldPlan plan = stratified_folds(m, 5, 0);

  auto covid = fold_counts(m, plan, Label::covid);
  auto non = fold_counts(m, plan, Label::non_covid);
  std::multiset<int> covid_counts, non_counts;
  for (int f = 0; f < 5; ++f) {
    covid_counts.insert(covid[f]);
    non_counts.insert(non[f]);
  }
  // 349 = 4*70 + 69, 397 = 2*80 + 3*79.
  CHECK(covid_counts == std::multiset<int>{69, 70, 70, 70, 70});
  CHECK(non_counts == std::multiset<int>{79, 79, 79, 80, 80});
}

TEST_CASE("stratified_folds rejects k=1 and tiny classes") {
  DatasetManifest m = synthetic_manifest(10, 10);
  CHECK_THROWS_AS(stratified_folds(m, 1, 0), CtxError);

  DatasetManifest small = synthetic_manifest(3, 10);
  try {
    stratified_folds(small, 5, 0);
    FAIL("expected error");
  } catch (const CtxError& e) {
    CHECK(std::string(e.what()).find("COVID") != std::string::npos);
  }
}

TEST_CASE("stratified_folds is deterministic and covers every record once") {
  DatasetManifest m = synthetic_manifest(101, 57);
  FoldPlan a = stratified_folds(m, 4, 9);
  FoldPlan b = stratified_folds(m, 4, 9);
  CHECK(a.assignments == b.assignments);

  FoldPlan c = stratified_folds(m, 4, 10);
  CHECK(a.assignments != c.assignments); // different seed, different deal

  for (int assignment : a.assignments) {
    CHECK(assignment >= 0);
    CHECK(assignment < 4);
  }
  // Per-class fold sums equal class totals; fold spread <= classes.
  auto covid = fold_counts(m, a, Label::covid);
  auto non = fold_counts(m, a, Label::non_covid);
  int covid_sum = 0, non_sum = 0, min_total = 1 << 30, max_total = 0;
  for (int f = 0; f < 4; ++f) {
    covid_sum += covid[f];
    non_sum += non[f];
    const int total = covid[f] + non[f];
    min_total = std::min(min_total, total);
    max_total = std::max(max_total, total);
  }
  CHECK(covid_sum == 101);
  CHECK(non_sum == 57);
  CHECK(max_total - min_total <= 2);
}

TEST_CASE("fold csv round-trips against its manifest") {
  TempDir tmp("folds_rt");
  testutil::make_bright_dark_dataset(tmp.path(), 6, 8, 8);
  DatasetManifest m = scan_dataset(tmp.path(), DatasetId::sars_cov_2_ct);
  FoldPlan plan = stratified_folds(m, 3, 5);
  write_fold_csv(m, plan, tmp.sub("folds.csv"), "0");
  FoldPlan back = read_fold_csv(m, tmp.sub("folds.csv"));
  CHECK(back.k == 3);
  CHECK(back.assignments == plan.assignments);
}

TEST_CASE("load_image: full-scale 8-bit becomes 1.0") {
  TempDir tmp("img_white");
  testutil::write_gray_png(tmp.sub("white.png"), 4, 3,
                           [](int, int) { return 255; });
  GrayImage img = load_image_file(tmp.sub("white.png"));
  CHECK(img.width == 4);
  CHECK(img.height == 3);
  CHECK(img.channels == 1);
  for (float v : img.data) CHECK(v == doctest::Approx(1.0f));
}

TEST_CASE("load_image: identical RGB channels reduce to v/255") {
  TempDir tmp("img_rgb");
  testutil::write_rgb_png(tmp.sub("c.png"), 5, 5, 102, 102, 102);
  GrayImage img = load_image_file(tmp.sub("c.png"));
  for (float v : img.data) CHECK(v == doctest::Approx(102.0 / 255.0));
}

TEST_CASE("load_image: 2x2 byte ramp divides by 255") {
  TempDir tmp("img_ramp");
  const uint8_t bytes[4] = {0, 51, 102, 255};
  testutil::write_gray_png(tmp.sub("r.png"), 2, 2,
                           [&](int y, int x) { return bytes[y * 2 + x]; });
  GrayImage img = load_image_file(tmp.sub("r.png"));
  CHECK(img.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(img.at(0, 0, 1) == doctest::Approx(0.2));
  CHECK(img.at(0, 1, 0) == doctest::Approx(0.4));
  CHECK(img.at(0, 1, 1) == doctest::Approx(1.0));
}

TEST_CASE("load_image: decode failure carries the path") {
  try {
    load_image_file("/nonexistent/missing.png");
    FAIL("expected error");
  } catch (const CtxError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/missing.png") !=
          std::string::npos);
  }
}
