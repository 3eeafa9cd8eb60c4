#pragma once

#include <string>
#include <vector>

#include "ctx/eval/metrics.hpp"

namespace ctx {

// Per-fold results for one (dataset, model) pair plus their summary.
struct ModelReport {
  std::string dataset;
  std::string model;
  std::vector<FoldEvaluation> folds;
  FoldSummary summary;
};

// One object per (dataset, model, fold) plus a summary object.
void write_metrics_json(const ModelReport& report, const std::string& path,
                        const std::string& config_hash);
ModelReport read_metrics_json(const std::string& path);

// Comparison table, Table-2 column order (Accuracy, Precision, Recall,
// Specificity, F1-score), "mean ± std" cells in percent.
std::string render_markdown_table(const std::vector<ModelReport>& reports);
std::string render_csv_table(const std::vector<ModelReport>& reports);

// Average confusion counts across folds: CSV plus a heat-table figure.
void write_confusion_csv(const ModelReport& report, const std::string& path,
                         const std::string& config_hash);
void render_confusion_figure(const ModelReport& report,
                             const std::string& path);

} // namespace ctx
