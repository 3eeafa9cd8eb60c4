#pragma once

#include <string>
#include <vector>

#include "ctx/core/image.hpp"

namespace ctx {

enum class Label { non_covid = 0, covid = 1 };

enum class DatasetId { sars_cov_2_ct, covid19_ct };

std::string to_string(Label label);
std::string to_string(DatasetId id);
Label parse_label(const std::string& s);
DatasetId parse_dataset_id(const std::string& s);

// One labeled CT image on disk.
struct ImageRecord {
  std::string path;
  Label label = Label::non_covid;
  int width = 0;
  int height = 0;
  DatasetId dataset_id = DatasetId::sars_cov_2_ct;
};

struct DatasetManifest {
  std::vector<ImageRecord> records; // lexicographic by path
  DatasetId dataset_id = DatasetId::sars_cov_2_ct;
  int skipped = 0; // undecodable files encountered during the scan

  int count(Label label) const;
  int total() const { return static_cast<int>(records.size()); }
};

// Walks <root>/COVID and <root>/non-COVID, decoding every png/jpg/jpeg to
// record its pixel dimensions. Undecodable files are skipped with a warning
// on stderr and counted in manifest.skipped. Missing class directory throws
// CtxError(data). Ordering is lexicographic by path within each class,
// COVID rows first.
DatasetManifest scan_dataset(const std::string& root, DatasetId dataset_id);

// CSV columns path,label,width,height after a `# config <hash>` line.
void write_manifest_csv(const DatasetManifest& manifest,
                        const std::string& path,
                        const std::string& config_hash);
DatasetManifest read_manifest_csv(const std::string& path,
                                  DatasetId dataset_id);

// Decodes record.path into a single-channel [0,1] raster. Multi-channel
// sources are reduced by luminance average. Throws CtxError(io) on decode
// failure.
GrayImage load_image(const ImageRecord& record);
GrayImage load_image_file(const std::string& path);

} // namespace ctx
