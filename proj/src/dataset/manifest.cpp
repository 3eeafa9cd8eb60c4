#include "ctx/dataset/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "ctx/core/error.hpp"

namespace fs = std::filesystem;

namespace ctx {

std::string to_string(Label label) {
  return label == Label::covid ? "COVID" : "NonCOVID";
}

std::string to_string(DatasetId id) {
  return id == DatasetId::sars_cov_2_ct ? "SARS-CoV-2-CT" : "COVID19-CT";
}

Label parse_label(const std::string& s) {
  if (s == "COVID") return Label::covid;
  if (s == "NonCOVID") return Label::non_covid;
  throw CtxError(ErrorKind::data, "unknown label: " + s);
}

DatasetId parse_dataset_id(const std::string& s) {
  if (s == "SARS-CoV-2-CT") return DatasetId::sars_cov_2_ct;
  if (s == "COVID19-CT") return DatasetId::covid19_ct;
  throw CtxError(ErrorKind::data,
                 "unknown dataset id: " + s +
                     " (expected SARS-CoV-2-CT or COVID19-CT)");
}

int DatasetManifest::count(Label label) const {
  return static_cast<int>(std::count_if(
      records.begin(), records.end(),
      [label](const ImageRecord& r) { return r.label == label; }));
}

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// Collects decodable images from one class directory, sorted by path.
void scan_class_dir(const fs::path& dir, Label label, DatasetId dataset_id,
                    DatasetManifest& out) {
  if (!fs::is_directory(dir)) {
    throw CtxError(ErrorKind::data,
                   "missing class directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.string() < b.string();
            });
  for (const auto& f : files) {
    cv::Mat img = cv::imread(f.string(), cv::IMREAD_UNCHANGED);
    if (img.empty() || img.cols < 1 || img.rows < 1) {
      std::cerr << "warning: skipping undecodable file " << f.string()
                << "\n";
      ++out.skipped;
      continue;
    }
    ImageRecord rec;
    rec.path = f.string();
    rec.label = label;
    rec.width = img.cols;
    rec.height = img.rows;
    rec.dataset_id = dataset_id;
    out.records.push_back(std::move(rec));
  }
}

} // namespace

DatasetManifest scan_dataset(const std::string& root, DatasetId dataset_id) {
  fs::path base(root);
  if (!fs::is_directory(base)) {
    throw CtxError(ErrorKind::data, "dataset root not found: " + root);
  }
  DatasetManifest manifest;
  manifest.dataset_id = dataset_id;
  scan_class_dir(base / "COVID", Label::covid, dataset_id, manifest);
  scan_class_dir(base / "non-COVID", Label::non_covid, dataset_id, manifest);
  return manifest;
}

void write_manifest_csv(const DatasetManifest& manifest,
                        const std::string& path,
                        const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write manifest: " + path);
  }
  out << "# config " << config_hash << "\n";
  out << "path,label,width,height\n";
  for (const auto& r : manifest.records) {
    out << r.path << ',' << to_string(r.label) << ',' << r.width << ','
        << r.height << "\n";
  }
}

DatasetManifest read_manifest_csv(const std::string& path,
                                  DatasetId dataset_id) {
  std::ifstream in(path);
  if (!in) {
    throw CtxError(ErrorKind::data, "cannot read manifest: " + path);
  }
  DatasetManifest manifest;
  manifest.dataset_id = dataset_id;
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true; // path,label,width,height
      continue;
    }
    std::stringstream ss(line);
    ImageRecord rec;
    std::string label, width, height;
    if (!std::getline(ss, rec.path, ',') || !std::getline(ss, label, ',') ||
        !std::getline(ss, width, ',') || !std::getline(ss, height, ',')) {
      throw CtxError(ErrorKind::data, path + ":" +
                                          std::to_string(lineno) +
                                          ": malformed manifest row");
    }
    rec.label = parse_label(label);
    rec.width = std::stoi(width);
    rec.height = std::stoi(height);
    rec.dataset_id = dataset_id;
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

GrayImage load_image_file(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (img.empty()) {
    throw CtxError(ErrorKind::io, "cannot decode image: " + path);
  }
  cv::Mat f;
  double scale = 1.0;
  switch (img.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F: scale = 1.0; break;
    default:
      throw CtxError(ErrorKind::io, "unsupported pixel depth: " + path);
  }
  img.convertTo(f, CV_32F, scale);

  GrayImage out(f.cols, f.rows, 1);
  const int nch = f.channels();
  const int color_ch = nch >= 4 ? 3 : nch; // ignore alpha
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < f.cols; ++x) {
      float sum = 0.0f;
      for (int c = 0; c < color_ch; ++c) sum += row[x * nch + c];
      out.at(0, y, x) = sum / static_cast<float>(color_ch);
    }
  }
  return out;
}

GrayImage load_image(const ImageRecord& record) {
  return load_image_file(record.path);
}

} // namespace ctx
