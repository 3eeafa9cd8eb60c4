#include "ctx/cli/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "ctx/core/error.hpp"
#include "ctx/core/hash.hpp"
#include "ctx/modelzoo/registry.hpp"

namespace ctx {

namespace {

struct RawValue {
  std::string text;
  int line = 0;
  bool consumed = false;
};

using RawConfig = std::map<std::string, RawValue>; // "section.key" -> value

[[noreturn]] void fail(const std::string& path, int line,
                       const std::string& msg) {
  throw CtxError(ErrorKind::config,
                 path + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

RawConfig parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CtxError(ErrorKind::config, "cannot read config: " + path);
  }
  RawConfig raw;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(path, lineno, "unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail(path, lineno, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(path, lineno, "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(path, lineno, "empty key");
    if (value.empty()) fail(path, lineno, "empty value for key " + key);
    const std::string full = section.empty() ? key : section + "." + key;
    if (raw.count(full)) fail(path, lineno, "duplicate key " + full);
    raw[full] = {value, lineno, false};
  }
  return raw;
}

class ConfigReader {
public:
  ConfigReader(std::string path, RawConfig raw)
      : path_(std::move(path)), raw_(std::move(raw)) {}

  bool has(const std::string& key) { return raw_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt) {
    auto* v = take(key);
    if (!v) return dflt;
    std::string s = v->text;
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
      s = s.substr(1, s.size() - 2);
    }
    return s;
  }

  double get_number(const std::string& key, double dflt) {
    auto* v = take(key);
    if (!v) return dflt;
    return parse_number(key, *v);
  }

  int get_int(const std::string& key, int dflt) {
    auto* v = take(key);
    if (!v) return dflt;
    const double d = parse_number(key, *v);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) {
      fail(path_, v->line, "key " + key + " must be an integer");
    }
    return i;
  }

  uint64_t get_seed(const std::string& key, uint64_t dflt) {
    auto* v = take(key);
    if (!v) return dflt;
    try {
      return std::stoull(v->text);
    } catch (...) {
      fail(path_, v->line, "key " + key + " must be a nonnegative integer");
    }
  }

  bool get_bool(const std::string& key, bool dflt) {
    auto* v = take(key);
    if (!v) return dflt;
    if (v->text == "true") return true;
    if (v->text == "false") return false;
    fail(path_, v->line, "key " + key + " must be true or false");
  }

  std::array<double, 2> get_pair(const std::string& key,
                                 std::array<double, 2> dflt) {
    auto* v = take(key);
    if (!v) return dflt;
    std::string s = v->text;
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
      fail(path_, v->line, "key " + key + " must be [lo, hi]");
    }
    s = s.substr(1, s.size() - 2);
    const auto comma = s.find(',');
    if (comma == std::string::npos) {
      fail(path_, v->line, "key " + key + " must be [lo, hi]");
    }
    try {
      return {std::stod(trim(s.substr(0, comma))),
              std::stod(trim(s.substr(comma + 1)))};
    } catch (...) {
      fail(path_, v->line, "key " + key + ": bad number");
    }
  }

  // "50:0.0001,70:0.00003,..." -> milestones
  std::vector<std::pair<int, double>> get_schedule(
      const std::string& key, std::vector<std::pair<int, double>> dflt) {
    auto* v = take(key);
    if (!v) return dflt;
    std::string s = v->text;
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
      s = s.substr(1, s.size() - 2);
    }
    std::vector<std::pair<int, double>> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        fail(path_, v->line,
             "key " + key + " entries must be epoch:lr, got " + item);
      }
      try {
        out.emplace_back(std::stoi(trim(item.substr(0, colon))),
                         std::stod(trim(item.substr(colon + 1))));
      } catch (...) {
        fail(path_, v->line, "key " + key + ": bad number in " + item);
      }
    }
    return out;
  }

  // Every key must have been consumed by now.
  void reject_unknown() {
    for (const auto& [key, value] : raw_) {
      if (!value.consumed) {
        fail(path_, value.line, "unknown key " + key);
      }
    }
  }

  const std::string& path() const { return path_; }

private:
  RawValue* take(const std::string& key) {
    auto it = raw_.find(key);
    if (it == raw_.end()) return nullptr;
    it->second.consumed = true;
    return &it->second;
  }

  double parse_number(const std::string& key, const RawValue& v) {
    try {
      size_t pos = 0;
      const double d = std::stod(v.text, &pos);
      if (pos != v.text.size()) throw std::invalid_argument(v.text);
      return d;
    } catch (...) {
      fail(path_, v.line, "key " + key + " must be a number, got " + v.text);
    }
  }

  std::string path_;
  RawConfig raw_;
};

} // namespace

PipelineConfig validate_config(const std::string& path) {
  ConfigReader reader(path, parse_file(path));
  PipelineConfig cfg;
  cfg.config_hash = hex64(hash_file(path));

  cfg.dataset_root = reader.get_string("dataset.root", "");
  cfg.dataset_id =
      parse_dataset_id(reader.get_string("dataset.id", "SARS-CoV-2-CT"));

  cfg.k = reader.get_int("split.k", 5);
  cfg.split_seed = reader.get_seed("split.seed", 0);

  cfg.model_name = reader.get_string("model.name", "");
  cfg.pretrained = reader.get_bool("model.pretrained", false);
  cfg.model_seed = reader.get_seed("model.seed", 0);
  cfg.weight_cache = reader.get_string("model.weight_cache", "");

  cfg.train.epochs = reader.get_int("train.epochs", 100);
  cfg.train.batch_size = reader.get_int("train.batch_size", 32);
  cfg.train.hyper.base_lr = reader.get_number("train.base_lr", 0.0003);
  cfg.train.hyper.weight_decay = reader.get_number("train.weight_decay", 1.0);
  cfg.train.hyper.beta1 = reader.get_number("train.beta1", 0.9);
  cfg.train.hyper.beta2 = reader.get_number("train.beta2", 0.999);
  cfg.train.hyper.epsilon = reader.get_number("train.epsilon", 1e-6);
  cfg.train.schedule.base_lr = cfg.train.hyper.base_lr;
  cfg.train.schedule.milestones =
      reader.get_schedule("train.schedule", default_schedule().milestones);
  cfg.train.seed = reader.get_seed("train.seed", 0);
  cfg.train.checkpoint_interval =
      reader.get_int("train.checkpoint_interval", 0);
  cfg.train.config_hash = cfg.config_hash;

  cfg.train.aug.enabled = reader.get_bool("augment.enabled", true);
  cfg.train.aug.crop_scale_range =
      reader.get_pair("augment.crop_scale", {0.8, 1.0});
  cfg.train.aug.blur_probability =
      reader.get_number("augment.blur_probability", 0.25);
  cfg.train.aug.blur_sigma_range =
      reader.get_pair("augment.blur_sigma", {0.5, 1.5});
  cfg.train.aug.noise_std_range =
      reader.get_pair("augment.noise_std", {0.0, 0.05});
  cfg.train.aug.brightness_delta =
      reader.get_number("augment.brightness_delta", 0.1);
  cfg.train.aug.contrast_factor_range =
      reader.get_pair("augment.contrast_factor", {0.8, 1.2});
  cfg.train.aug.hflip_probability =
      reader.get_number("augment.hflip_probability", 0.5);

  cfg.tsne.perplexity = reader.get_number("explain.perplexity", 30.0);
  cfg.tsne.iterations = reader.get_int("explain.iterations", 1000);
  cfg.tsne.learning_rate =
      reader.get_number("explain.learning_rate", 200.0);
  cfg.tsne.seed = reader.get_seed("explain.seed", 0);
  cfg.explain_fold = reader.get_int("explain.fold", 0);
  cfg.gradcam_alpha = reader.get_number("explain.gradcam_alpha", 0.5);
  cfg.gradcam_count = reader.get_int("explain.gradcam_count", 8);

  cfg.output_dir = reader.get_string("output.dir", "out");
  const std::string formats =
      reader.get_string("output.formats", "markdown,csv");
  cfg.report_markdown = formats.find("markdown") != std::string::npos;
  cfg.report_csv = formats.find("csv") != std::string::npos;

  reader.reject_unknown();

  // Semantic checks, each naming its key.
  if (cfg.k < 2) {
    throw CtxError(ErrorKind::config, "split.k must be >= 2, got " +
                                          std::to_string(cfg.k));
  }
  if (!cfg.model_name.empty()) {
    registry_lookup(cfg.model_name); // throws listing valid names
  }
  if (cfg.train.epochs < 0) {
    throw CtxError(ErrorKind::config, "train.epochs must be >= 0");
  }
  if (cfg.train.batch_size < 1) {
    throw CtxError(ErrorKind::config, "train.batch_size must be >= 1");
  }
  cfg.train.hyper.validate();
  cfg.train.schedule.validate();
  cfg.train.aug.validate();
  if (cfg.gradcam_alpha < 0.0 || cfg.gradcam_alpha > 1.0) {
    throw CtxError(ErrorKind::config,
                   "explain.gradcam_alpha must be in [0,1]");
  }
  return cfg;
}

} // namespace ctx
