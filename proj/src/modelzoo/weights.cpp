#include "ctx/modelzoo/weights.hpp"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <curl/curl.h>

#include "ctx/core/error.hpp"
#include "ctx/core/hash.hpp"

namespace fs = std::filesystem;

namespace ctx {

namespace {

constexpr uint32_t kMagic = 0x43545857; // "CTXW"
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

size_t curl_sink(void* data, size_t size, size_t nmemb, void* stream) {
  auto* out = static_cast<std::ofstream*>(stream);
  out->write(static_cast<const char*>(data), size * nmemb);
  return size * nmemb;
}

} // namespace

void save_params(const std::string& path,
                 const std::map<std::string, nn::Tensor>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write weights: " + path);
  }
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<uint32_t>(tensor.shape.size()));
    for (int d : tensor.shape) write_u32(out, static_cast<uint32_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() *
                                           sizeof(double)));
  }
  if (!out) {
    throw CtxError(ErrorKind::io, "short write: " + path);
  }
}

std::map<std::string, nn::Tensor> load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CtxError(ErrorKind::data, "cannot read weights: " + path);
  }
  if (read_u32(in) != kMagic || read_u32(in) != kVersion) {
    throw CtxError(ErrorKind::data, "not a weight file: " + path);
  }
  const uint32_t count = read_u32(in);
  std::map<std::string, nn::Tensor> out;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t ndims = read_u32(in);
    std::vector<int> shape(ndims);
    for (uint32_t d = 0; d < ndims; ++d) {
      shape[d] = static_cast<int>(read_u32(in));
    }
    nn::Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) {
      throw CtxError(ErrorKind::data, "truncated weight file: " + path);
    }
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

void write_checkpoint_meta(const std::string& ckpt_path,
                           const std::string& arch, int epoch, int fold,
                           const std::string& config_hash) {
  std::ofstream out(ckpt_path + ".meta", std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write meta: " + ckpt_path + ".meta");
  }
  out << "arch=" << arch << "\n"
      << "epoch=" << epoch << "\n"
      << "fold=" << fold << "\n"
      << "config=" << config_hash << "\n";
}

std::string default_cache_dir() {
  if (const char* env = std::getenv("CTX_CACHE")) return env;
  if (const char* home = std::getenv("HOME")) {
    return std::string(home) + "/.cache/ctx-weights";
  }
  return ".ctx-weights";
}

namespace {

struct IndexRow {
  std::string arch;
  std::string checksum;
  std::string url;
};

std::vector<IndexRow> read_index(const std::string& dir) {
  std::vector<IndexRow> rows;
  std::ifstream in(dir + "/index.txt");
  if (!in) return rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    IndexRow row;
    ss >> row.arch >> row.checksum >> row.url;
    if (!row.arch.empty() && !row.checksum.empty()) rows.push_back(row);
  }
  return rows;
}

void fetch_url(const std::string& url, const std::string& dest) {
  std::ofstream out(dest, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write to cache: " + dest);
  }
  CURL* curl = curl_easy_init();
  if (!curl) {
    throw CtxError(ErrorKind::data,
                   "weights: network unavailable: curl init failed");
  }
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, curl_sink);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &out);
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_TIMEOUT, 120L);
  const CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  out.close();
  if (rc != CURLE_OK) {
    fs::remove(dest);
    throw CtxError(ErrorKind::data, "weights: network unavailable: " + url +
                                        " (" + curl_easy_strerror(rc) + ")");
  }
}

} // namespace

std::string WeightCache::resolve(const std::string& arch) const {
  const auto rows = read_index(dir);
  for (const auto& row : rows) {
    if (row.arch != arch) continue;
    const std::string path = dir + "/" + arch + "/" + row.checksum + ".bin";
    if (!fs::exists(path)) {
      if (row.url.empty()) {
        throw CtxError(ErrorKind::data,
                       "weights: network unavailable: " + arch +
                           " not cached and no url indexed");
      }
      fs::create_directories(dir + "/" + arch);
      fetch_url(row.url, path);
    }
    const std::string actual = hex64(hash_file(path));
    if (actual != row.checksum) {
      throw CtxError(ErrorKind::data,
                     "weights: checksum mismatch for " + arch + ": index " +
                         row.checksum + " vs file " + actual);
    }
    return path;
  }
  throw CtxError(ErrorKind::data, "weights: network unavailable: no index "
                                  "entry for " +
                                      arch + " in " + dir);
}

void WeightCache::add(const std::string& arch, const std::string& src_path,
                      const std::string& url) const {
  const std::string checksum = hex64(hash_file(src_path));
  fs::create_directories(dir + "/" + arch);
  const std::string dest = dir + "/" + arch + "/" + checksum + ".bin";
  fs::copy_file(src_path, dest, fs::copy_options::overwrite_existing);

  // Rewrite the index, replacing any previous row for this arch.
  auto rows = read_index(dir);
  std::ofstream out(dir + "/index.txt", std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write index: " + dir + "/index.txt");
  }
  bool replaced = false;
  for (auto& row : rows) {
    if (row.arch == arch) {
      row.checksum = checksum;
      row.url = url;
      replaced = true;
    }
    out << row.arch << ' ' << row.checksum;
    if (!row.url.empty()) out << ' ' << row.url;
    out << "\n";
  }
  if (!replaced) {
    out << arch << ' ' << checksum;
    if (!url.empty()) out << ' ' << url;
    out << "\n";
  }
}

} // namespace ctx
