#include "ctx/dataset/folds.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "ctx/core/error.hpp"

namespace ctx {

std::vector<size_t> FoldPlan::train_indices(int fold) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<size_t> FoldPlan::test_indices(int fold) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan stratified_folds(const DatasetManifest& manifest, int k,
                          uint64_t seed) {
  if (k < 2) {
    throw CtxError(ErrorKind::data,
                   "fold count must be >= 2, got " + std::to_string(k));
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(manifest.records.size(), -1);

  std::mt19937_64 engine(seed);
  // Classes are processed in a fixed order so the plan depends only on
  // (manifest, k, seed).
  for (Label label : {Label::covid, Label::non_covid}) {
    std::vector<size_t> members;
    for (size_t i = 0; i < manifest.records.size(); ++i) {
      if (manifest.records[i].label == label) members.push_back(i);
    }
    if (static_cast<int>(members.size()) < k) {
      throw CtxError(ErrorKind::data,
                     "class " + to_string(label) + " has " +
                         std::to_string(members.size()) +
                         " members, fewer than k=" + std::to_string(k));
    }
    std::shuffle(members.begin(), members.end(), engine);
    for (size_t i = 0; i < members.size(); ++i) {
      plan.assignments[members[i]] = static_cast<int>(i % k);
    }
  }
  return plan;
}

void write_fold_csv(const DatasetManifest& manifest, const FoldPlan& plan,
                    const std::string& path, const std::string& config_hash) {
  if (plan.assignments.size() != manifest.records.size()) {
    throw CtxError(ErrorKind::data, "fold plan does not match manifest size");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write fold plan: " + path);
  }
  out << "# config " << config_hash << "\n";
  out << "path,fold\n";
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    out << manifest.records[i].path << ',' << plan.assignments[i] << "\n";
  }
}

FoldPlan read_fold_csv(const DatasetManifest& manifest,
                       const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CtxError(ErrorKind::data, "cannot read fold plan: " + path);
  }
  std::unordered_map<std::string, int> fold_by_path;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw CtxError(ErrorKind::data, "malformed fold row: " + line);
    }
    fold_by_path[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
  }

  FoldPlan plan;
  plan.assignments.reserve(manifest.records.size());
  int max_fold = 0;
  for (const auto& rec : manifest.records) {
    auto it = fold_by_path.find(rec.path);
    if (it == fold_by_path.end()) {
      throw CtxError(ErrorKind::data,
                     "fold plan missing manifest path: " + rec.path);
    }
    plan.assignments.push_back(it->second);
    max_fold = std::max(max_fold, it->second);
  }
  plan.k = max_fold + 1;
  return plan;
}

} // namespace ctx
