#pragma once

#include <string>
#include <vector>

#include "ctx/dataset/folds.hpp"
#include "ctx/modelzoo/model.hpp"
#include "ctx/preprocess/preprocess.hpp"

namespace ctx {

struct ConfusionMatrix {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  long total() const { return tp + tn + fp + fn; }
};

// Accuracy, precision, recall (sensitivity), specificity, F1. A component
// whose defining ratio is 0/0 reports 0 and is listed in `degenerate`.
struct MetricsRow {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double specificity = 0;
  double f1 = 0;
  std::vector<std::string> degenerate;
};

enum class StdKind { sample, population };

struct FoldSummary {
  std::vector<MetricsRow> per_fold;
  MetricsRow mean;
  MetricsRow std;
  StdKind std_kind = StdKind::sample;
};

// tp = #(pred=1, label=1), tn = #(0,0), fp = #(1,0), fn = #(0,1).
ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels);

MetricsRow metrics_from_confusion(const ConfusionMatrix& cm);

// Component-wise mean and standard deviation over >= 2 rows.
FoldSummary aggregate_folds(const std::vector<MetricsRow>& rows,
                            StdKind kind = StdKind::sample);

// "99.4 ± 0.4": fractions rendered as percentages, one decimal.
std::string format_mean_std(double mean, double std);

// Deterministic inference over the records in fold_index: no augmentation,
// threshold 0.5 on sigmoid(logit).
struct FoldEvaluation {
  ConfusionMatrix cm;
  MetricsRow metrics;
};

FoldEvaluation evaluate_fold(ClassifierModel& model,
                             const DatasetManifest& manifest,
                             const FoldPlan& fold_plan, int fold_index,
                             const NormalizationStats& stats,
                             int batch_size = 32);

} // namespace ctx
