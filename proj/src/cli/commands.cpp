#include "ctx/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <opencv2/imgcodecs.hpp>

#include <CLI11.hpp>

#include "ctx/cli/config.hpp"
#include "ctx/core/error.hpp"
#include "ctx/eval/report.hpp"
#include "ctx/explain/gradcam.hpp"
#include "ctx/explain/tsne.hpp"
#include "ctx/modelzoo/weights.hpp"

namespace fs = std::filesystem;

namespace ctx {

namespace {

std::string manifest_path(const PipelineConfig& cfg) {
  return cfg.output_dir + "/manifest.csv";
}
std::string folds_path(const PipelineConfig& cfg) {
  return cfg.output_dir + "/folds.csv";
}
std::string checkpoints_dir(const PipelineConfig& cfg) {
  return cfg.output_dir + "/checkpoints";
}

void require_artifact(const std::string& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw CtxError(ErrorKind::data, "missing upstream artifact " + path +
                                        " (run `" + producer + "` first)");
  }
}

PipelineConfig load_config(const std::string& path, bool need_root,
                           bool need_model) {
  PipelineConfig cfg = validate_config(path);
  if (need_root && cfg.dataset_root.empty()) {
    throw CtxError(ErrorKind::config, "config is missing dataset.root");
  }
  if (need_model && cfg.model_name.empty()) {
    throw CtxError(ErrorKind::config, "config is missing model.name");
  }
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) {
    throw CtxError(ErrorKind::config,
                   "cannot create output.dir " + cfg.output_dir + ": " +
                       ec.message());
  }
  return cfg;
}

DatasetManifest load_manifest_artifact(const PipelineConfig& cfg) {
  require_artifact(manifest_path(cfg), "ingest");
  return read_manifest_csv(manifest_path(cfg), cfg.dataset_id);
}

FoldPlan load_folds_artifact(const PipelineConfig& cfg,
                             const DatasetManifest& manifest) {
  require_artifact(folds_path(cfg), "split");
  return read_fold_csv(manifest, folds_path(cfg));
}

// <dir>/<arch>_fold<f>_epoch<E>.ckpt with the highest E.
std::string find_final_checkpoint(const std::string& dir,
                                  const std::string& arch, int fold) {
  const std::string prefix = arch + "_fold" + std::to_string(fold) + "_epoch";
  std::string best;
  int best_epoch = -1;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind(prefix, 0) != 0 ||
          entry.path().extension() != ".ckpt") {
        continue;
      }
      const std::string tail =
          name.substr(prefix.size(), name.size() - prefix.size() - 5);
      try {
        const int epoch = std::stoi(tail);
        if (epoch > best_epoch) {
          best_epoch = epoch;
          best = entry.path().string();
        }
      } catch (...) {
        continue;
      }
    }
  }
  if (best.empty()) {
    throw CtxError(ErrorKind::data,
                   "missing upstream artifact: no checkpoint for " + arch +
                       " fold " + std::to_string(fold) + " under " + dir +
                       " (run `train` first)");
  }
  return best;
}

std::unique_ptr<ClassifierModel> load_trained_model(const PipelineConfig& cfg,
                                                    int fold) {
  const ModelSpec& spec = registry_lookup(cfg.model_name);
  auto model = build_model(spec, /*pretrained=*/false, cfg.model_seed);
  const std::string ckpt =
      find_final_checkpoint(checkpoints_dir(cfg), spec.name, fold);
  model->load_state(load_params(ckpt), /*strict=*/true);
  return model;
}

std::vector<int> parse_fold_selector(const std::string& fold_arg, int k) {
  if (fold_arg == "all") {
    std::vector<int> folds(k);
    for (int i = 0; i < k; ++i) folds[i] = i;
    return folds;
  }
  int fold = 0;
  try {
    fold = std::stoi(fold_arg);
  } catch (...) {
    throw CtxError(ErrorKind::usage,
                   "--fold must be an index or 'all', got " + fold_arg);
  }
  if (fold < 0 || fold >= k) {
    throw CtxError(ErrorKind::usage,
                   "--fold " + fold_arg + " outside [0," + std::to_string(k) +
                       ")");
  }
  return {fold};
}

// For commands that explain with one trained fold.
int parse_single_fold(const std::string& fold_arg, int dflt) {
  if (fold_arg == "default") return dflt;
  if (fold_arg == "all") {
    throw CtxError(ErrorKind::usage, "--fold must be a single index here");
  }
  try {
    const int fold = std::stoi(fold_arg);
    if (fold >= 0) return fold;
  } catch (...) {
  }
  throw CtxError(ErrorKind::usage, "--fold must be an index, got " + fold_arg);
}

// ---------------------------------------------------------------------------
// Subcommand bodies

int cmd_ingest(const std::string& config_path) {
  PipelineConfig cfg = load_config(config_path, true, false);
  DatasetManifest manifest = scan_dataset(cfg.dataset_root, cfg.dataset_id);
  write_manifest_csv(manifest, manifest_path(cfg), cfg.config_hash);
  std::cout << "manifest: " << manifest_path(cfg) << " ("
            << manifest.count(Label::covid) << " COVID, "
            << manifest.count(Label::non_covid) << " NonCOVID";
  if (manifest.skipped > 0) {
    std::cout << ", " << manifest.skipped << " skipped";
  }
  std::cout << ")\n";
  return 0;
}

int cmd_split(const std::string& config_path) {
  PipelineConfig cfg = load_config(config_path, false, false);
  DatasetManifest manifest = load_manifest_artifact(cfg);
  FoldPlan plan = stratified_folds(manifest, cfg.k, cfg.split_seed);
  write_fold_csv(manifest, plan, folds_path(cfg), cfg.config_hash);
  std::cout << "folds: " << folds_path(cfg) << " (k=" << cfg.k << ")\n";
  return 0;
}

void train_one_fold(const PipelineConfig& cfg, const DatasetManifest& manifest,
                    const FoldPlan& plan, int fold, bool quiet) {
  const ModelSpec& spec = registry_lookup(cfg.model_name);
  std::unique_ptr<ClassifierModel> model;
  if (cfg.pretrained) {
    WeightCache cache(cfg.weight_cache.empty() ? default_cache_dir()
                                               : cfg.weight_cache);
    model = build_model(spec, true, cfg.model_seed, &cache);
  } else {
    model = build_model(spec, false, cfg.model_seed);
  }
  TrainConfig train_cfg = cfg.train;
  train_cfg.checkpoint_dir = checkpoints_dir(cfg);
  train_cfg.quiet = quiet;
  EpochHistory history = train_fold(*model, manifest, plan, fold, train_cfg);
  write_history_csv(history,
                    cfg.output_dir + "/history_fold" + std::to_string(fold) +
                        ".csv",
                    cfg.config_hash);
}

int cmd_train(const std::string& config_path, const std::string& fold_arg,
              int parallel) {
  PipelineConfig cfg = load_config(config_path, false, true);
  DatasetManifest manifest = load_manifest_artifact(cfg);
  FoldPlan plan = load_folds_artifact(cfg, manifest);
  std::vector<int> folds = parse_fold_selector(fold_arg, plan.k);

  if (parallel <= 1 || folds.size() == 1) {
    for (int fold : folds) {
      std::cout << "training fold " << fold << "\n";
      train_one_fold(cfg, manifest, plan, fold, /*quiet=*/false);
    }
    return 0;
  }

  // Opt-in parallel fold training; per-epoch progress is suppressed so the
  // output stays readable.
  std::vector<std::exception_ptr> errors(folds.size());
  for (size_t base = 0; base < folds.size();
       base += static_cast<size_t>(parallel)) {
    const size_t end =
        std::min(folds.size(), base + static_cast<size_t>(parallel));
    std::vector<std::thread> workers;
    for (size_t i = base; i < end; ++i) {
      workers.emplace_back([&, i] {
        try {
          train_one_fold(cfg, manifest, plan, folds[i], /*quiet=*/true);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& fold_arg) {
  PipelineConfig cfg = load_config(config_path, false, true);
  DatasetManifest manifest = load_manifest_artifact(cfg);
  FoldPlan plan = load_folds_artifact(cfg, manifest);
  std::vector<int> folds = parse_fold_selector(fold_arg, plan.k);

  ModelReport report;
  report.dataset = to_string(cfg.dataset_id);
  report.model = registry_lookup(cfg.model_name).name;
  for (int fold : folds) {
    auto model = load_trained_model(cfg, fold);
    FoldEvaluation fe = evaluate_fold(*model, manifest, plan, fold,
                                      cfg.train.stats, cfg.train.batch_size);
    std::cout << "fold " << fold << ": acc=" << fe.metrics.accuracy
              << " tp=" << fe.cm.tp << " tn=" << fe.cm.tn
              << " fp=" << fe.cm.fp << " fn=" << fe.cm.fn << "\n";
    report.folds.push_back(fe);
  }

  std::vector<MetricsRow> rows;
  for (const auto& fe : report.folds) rows.push_back(fe.metrics);
  if (rows.size() >= 2) {
    report.summary = aggregate_folds(rows);
  } else {
    report.summary.per_fold = rows;
    report.summary.mean = rows.front();
    report.summary.std = MetricsRow{}; // single fold: zero spread
  }

  const std::string stem = cfg.output_dir + "/metrics_" + report.model;
  write_metrics_json(report, stem + ".json", cfg.config_hash);
  write_confusion_csv(report, cfg.output_dir + "/confusion_" + report.model +
                                  ".csv",
                      cfg.config_hash);
  render_confusion_figure(report, cfg.output_dir + "/confusion_" +
                                      report.model + ".png");
  std::cout << "metrics: " << stem << ".json\n";
  return 0;
}

int cmd_gradcam(const std::string& config_path,
                std::vector<std::string> images, const std::string& fold_arg,
                bool crop_to_content) {
  PipelineConfig cfg = load_config(config_path, false, true);
  const int fold = parse_single_fold(fold_arg, cfg.explain_fold);
  auto model = load_trained_model(cfg, fold);

  if (images.empty()) {
    // Default to COVID-labeled images from the fold's test split.
    DatasetManifest manifest = load_manifest_artifact(cfg);
    FoldPlan plan = load_folds_artifact(cfg, manifest);
    for (size_t idx : plan.test_indices(fold)) {
      if (manifest.records[idx].label != Label::covid) continue;
      images.push_back(manifest.records[idx].path);
      if (static_cast<int>(images.size()) >= cfg.gradcam_count) break;
    }
    if (images.empty()) {
      throw CtxError(ErrorKind::data,
                     "no COVID-labeled test images to explain");
    }
  }

  const std::string out_dir = cfg.output_dir + "/gradcam";
  fs::create_directories(out_dir);
  for (const auto& path : images) {
    GrayImage gray = load_image_file(path);
    ContentRect content;
    GrayImage embedded =
        canvas_embed(gray, model->spec().custom_input, &content);
    RgbImage rgb = replicate_channels(embedded);
    Tensor3 input = normalize(rgb, cfg.train.stats);

    SaliencyMap map = grad_cam(*model, input, model->spec().gradcam_layer);
    RgbImage blended = overlay(map, rgb, cfg.gradcam_alpha);
    if (crop_to_content) {
      RgbImage cropped(content.width, content.height, 3);
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < content.height; ++y) {
          for (int x = 0; x < content.width; ++x) {
            cropped.at(c, y, x) =
                blended.at(c, y + content.y, x + content.x);
          }
        }
      }
      blended = std::move(cropped);
    }

    const std::string stem =
        out_dir + "/" + fs::path(path).stem().string();
    cv::Mat bgr(blended.height, blended.width, CV_8UC3);
    for (int y = 0; y < blended.height; ++y) {
      for (int x = 0; x < blended.width; ++x) {
        auto& px = bgr.at<cv::Vec3b>(y, x);
        for (int c = 0; c < 3; ++c) {
          px[2 - c] = static_cast<uint8_t>(
              std::lround(std::clamp(blended.at(c, y, x), 0.0f, 1.0f) * 255));
        }
      }
    }
    if (!cv::imwrite(stem + "_overlay.png", bgr)) {
      throw CtxError(ErrorKind::io, "cannot write " + stem + "_overlay.png");
    }
    write_map_csv(map, stem + "_map.csv", cfg.config_hash);
    std::cout << "gradcam: " << stem << "_overlay.png\n";
  }
  return 0;
}

int cmd_embed(const std::string& config_path, const std::string& fold_arg) {
  PipelineConfig cfg = load_config(config_path, false, true);
  DatasetManifest manifest = load_manifest_artifact(cfg);
  FoldPlan plan = load_folds_artifact(cfg, manifest);
  const int fold = parse_single_fold(fold_arg, cfg.explain_fold);
  if (fold >= plan.k) {
    throw CtxError(ErrorKind::usage,
                   "--fold " + std::to_string(fold) + " outside [0," +
                       std::to_string(plan.k) + ")");
  }
  auto model = load_trained_model(cfg, fold);
  const CanvasSpec canvas = model->spec().custom_input;

  std::vector<std::vector<double>> features;
  std::vector<PointMeta> meta;
  features.reserve(manifest.records.size());
  const int batch_size = cfg.train.batch_size;
  for (size_t start = 0; start < manifest.records.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(manifest.records.size(),
                                start + static_cast<size_t>(batch_size));
    std::vector<Tensor3> items;
    for (size_t i = start; i < end; ++i) {
      const ImageRecord& rec = manifest.records[i];
      items.push_back(
          prepare_eval(load_image(rec), canvas, cfg.train.stats));
      meta.push_back({rec.label == Label::covid ? 1 : 0,
                      plan.assignments[i] == fold ? Split::test
                                                  : Split::train});
    }
    FeatureMatrix batch_feats = model->extract_features(stack_batch(items));
    const int dim = batch_feats.dim(1);
    for (int row = 0; row < batch_feats.dim(0); ++row) {
      features.emplace_back(
          batch_feats.data.begin() + static_cast<size_t>(row) * dim,
          batch_feats.data.begin() + static_cast<size_t>(row + 1) * dim);
    }
  }

  Embedding2D embedding = tsne_embed(features, cfg.tsne);
  embedding.point_meta = std::move(meta);
  write_embedding_csv(embedding, cfg.output_dir + "/embedding.csv",
                      cfg.config_hash);
  scatter_plot(embedding, cfg.output_dir + "/embedding.png");
  std::cout << "embedding: " << cfg.output_dir << "/embedding.csv\n";
  return 0;
}

int cmd_report(const std::string& config_path, std::string input_dir) {
  std::string out_dir = input_dir;
  if (!config_path.empty()) {
    PipelineConfig cfg = load_config(config_path, false, false);
    if (input_dir.empty()) input_dir = cfg.output_dir;
    out_dir = cfg.output_dir;
  }
  if (input_dir.empty()) {
    throw CtxError(ErrorKind::usage,
                   "report needs --input <dir> or --config");
  }

  std::vector<ModelReport> reports;
  std::vector<std::string> files;
  if (fs::is_directory(input_dir)) {
    for (const auto& entry : fs::directory_iterator(input_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("metrics_", 0) == 0 &&
          entry.path().extension() == ".json") {
        files.push_back(entry.path().string());
      }
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) reports.push_back(read_metrics_json(f));
  if (reports.empty()) {
    throw CtxError(ErrorKind::data,
                   "missing upstream artifact: no metrics_*.json under " +
                       input_dir + " (run `eval` first)");
  }

  const std::string markdown = render_markdown_table(reports);
  std::cout << markdown;
  {
    std::ofstream out(out_dir + "/report.md", std::ios::binary);
    out << markdown;
  }
  {
    std::ofstream out(out_dir + "/report.csv", std::ios::binary);
    out << render_csv_table(reports);
  }
  return 0;
}

} // namespace

int run_command(const std::vector<std::string>& argv) {
  CLI::App app{
      "Chest-CT binary classification and explainability pipeline.\n"
      "Exit codes: 0 ok, 2 usage, 3 config, 4 data/missing artifact, "
      "5 training, 6 evaluation."};
  app.require_subcommand(1);

  std::string config_path, fold_arg = "all", input_dir;
  std::vector<std::string> images;
  int parallel = 1;

  auto add_config = [&config_path](CLI::App* cmd, bool required = true) {
    auto* opt = cmd->add_option("--config", config_path, "pipeline config file");
    if (required) opt->required();
  };

  auto* ingest = app.add_subcommand("ingest", "scan the dataset tree into a manifest");
  add_config(ingest);
  auto* split = app.add_subcommand("split", "plan stratified k folds");
  add_config(split);
  auto* train = app.add_subcommand("train", "fine-tune on the training split");
  add_config(train);
  train->add_option("--fold", fold_arg, "fold index or 'all'");
  train->add_option("--parallel-folds", parallel,
                    "train up to N folds concurrently");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate test folds");
  add_config(eval_cmd);
  eval_cmd->add_option("--fold", fold_arg, "fold index or 'all'");
  auto* gradcam_cmd =
      app.add_subcommand("gradcam", "saliency overlays for CT images");
  add_config(gradcam_cmd);
  gradcam_cmd->add_option("--image", images, "image file(s) to explain");
  std::string gradcam_fold = "default";
  gradcam_cmd->add_option("--fold", gradcam_fold, "trained fold to explain with");
  bool crop_to_content = false;
  gradcam_cmd->add_flag("--crop-to-content", crop_to_content,
                        "crop overlays back to the image content rectangle");
  auto* embed_cmd =
      app.add_subcommand("embed", "t-SNE projection of penultimate features");
  add_config(embed_cmd);
  std::string embed_fold = "default";
  embed_cmd->add_option("--fold", embed_fold, "trained fold to extract with");
  auto* report_cmd =
      app.add_subcommand("report", "comparison table from metrics files");
  add_config(report_cmd, /*required=*/false);
  report_cmd->add_option("--input", input_dir, "directory of metrics_*.json");

  std::vector<const char*> cargs;
  cargs.push_back("ctx");
  for (const auto& a : argv) cargs.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(config_path);
    if (split->parsed()) return cmd_split(config_path);
    if (train->parsed()) return cmd_train(config_path, fold_arg, parallel);
    if (eval_cmd->parsed()) return cmd_eval(config_path, fold_arg);
    if (gradcam_cmd->parsed())
      return cmd_gradcam(config_path, images, gradcam_fold, crop_to_content);
    if (embed_cmd->parsed()) return cmd_embed(config_path, embed_fold);
    if (report_cmd->parsed()) return cmd_report(config_path, input_dir);
  } catch (const CtxError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

} // namespace ctx
