#include "ctx/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ctx/core/error.hpp"
#include "ctx/train/trainer.hpp"

namespace ctx {

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw CtxError(ErrorKind::evaluation,
                   "confusion: prediction/label lengths differ (" +
                       std::to_string(predictions.size()) + " vs " +
                       std::to_string(labels.size()) + ")");
  }
  ConfusionMatrix cm;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] != 0;
    const bool truth = labels[i] != 0;
    if (pred && truth) ++cm.tp;
    else if (!pred && !truth) ++cm.tn;
    else if (pred && !truth) ++cm.fp;
    else ++cm.fn;
  }
  return cm;
}

MetricsRow metrics_from_confusion(const ConfusionMatrix& cm) {
  if (cm.total() < 1) {
    throw CtxError(ErrorKind::evaluation, "metrics: empty confusion matrix");
  }
  MetricsRow row;
  auto ratio = [&row](long num, long den, const char* name) {
    if (den == 0) {
      row.degenerate.push_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  row.accuracy = static_cast<double>(cm.tp + cm.tn) /
                 static_cast<double>(cm.total());
  row.precision = ratio(cm.tp, cm.tp + cm.fp, "precision");
  row.recall = ratio(cm.tp, cm.tp + cm.fn, "recall");
  row.specificity = ratio(cm.tn, cm.tn + cm.fp, "specificity");
  if (row.precision + row.recall > 0.0) {
    row.f1 = 2.0 * row.precision * row.recall / (row.precision + row.recall);
  } else {
    row.degenerate.push_back("f1");
    row.f1 = 0.0;
  }
  return row;
}

FoldSummary aggregate_folds(const std::vector<MetricsRow>& rows,
                            StdKind kind) {
  if (rows.size() < 2) {
    throw CtxError(ErrorKind::evaluation,
                   "aggregate_folds: need at least 2 rows, got " +
                       std::to_string(rows.size()));
  }
  FoldSummary summary;
  summary.per_fold = rows;
  summary.std_kind = kind;

  auto component = [](const MetricsRow& r, int i) {
    switch (i) {
      case 0: return r.accuracy;
      case 1: return r.precision;
      case 2: return r.recall;
      case 3: return r.specificity;
      default: return r.f1;
    }
  };
  auto set_component = [](MetricsRow& r, int i, double v) {
    switch (i) {
      case 0: r.accuracy = v; break;
      case 1: r.precision = v; break;
      case 2: r.recall = v; break;
      case 3: r.specificity = v; break;
      default: r.f1 = v; break;
    }
  };

  const double n = static_cast<double>(rows.size());
  for (int i = 0; i < 5; ++i) {
    double mean = 0.0;
    for (const auto& r : rows) mean += component(r, i);
    mean /= n;
    double ss = 0.0;
    for (const auto& r : rows) {
      const double d = component(r, i) - mean;
      ss += d * d;
    }
    const double denom = kind == StdKind::sample ? n - 1.0 : n;
    set_component(summary.mean, i, mean);
    set_component(summary.std, i, std::sqrt(ss / denom));
  }
  return summary;
}

std::string format_mean_std(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", mean * 100.0,
                std * 100.0);
  return buf;
}

FoldEvaluation evaluate_fold(ClassifierModel& model,
                             const DatasetManifest& manifest,
                             const FoldPlan& fold_plan, int fold_index,
                             const NormalizationStats& stats,
                             int batch_size) {
  const std::vector<size_t> test_idx = fold_plan.test_indices(fold_index);
  if (test_idx.empty()) {
    throw CtxError(ErrorKind::evaluation,
                   "empty test split for fold " + std::to_string(fold_index));
  }
  const CanvasSpec canvas = model.spec().custom_input;

  std::vector<int> predictions;
  std::vector<int> labels;
  predictions.reserve(test_idx.size());
  labels.reserve(test_idx.size());

  for (size_t start = 0; start < test_idx.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(test_idx.size(), start + static_cast<size_t>(batch_size));
    std::vector<Tensor3> items;
    items.reserve(end - start);
    for (size_t i = start; i < end; ++i) {
      const ImageRecord& rec = manifest.records[test_idx[i]];
      items.push_back(prepare_eval(load_image(rec), canvas, stats));
      labels.push_back(rec.label == Label::covid ? 1 : 0);
    }
    nn::Tensor logits = model.logits(stack_batch(items));
    for (double z : logits.data) {
      predictions.push_back(sigmoid(z) >= 0.5 ? 1 : 0);
    }
  }

  FoldEvaluation out;
  out.cm = confusion(predictions, labels);
  out.metrics = metrics_from_confusion(out.cm);
  return out;
}

} // namespace ctx
