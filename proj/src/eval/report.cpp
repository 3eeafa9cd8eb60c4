#include "ctx/eval/report.hpp"

#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <json.hpp>

#include "ctx/core/error.hpp"

namespace ctx {

using nlohmann::json;

namespace {

json metrics_to_json(const MetricsRow& m) {
  return json{{"accuracy", m.accuracy},       {"precision", m.precision},
              {"recall", m.recall},           {"specificity", m.specificity},
              {"f1", m.f1},                   {"degenerate", m.degenerate}};
}

MetricsRow metrics_from_json(const json& j) {
  MetricsRow m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.specificity = j.at("specificity").get<double>();
  m.f1 = j.at("f1").get<double>();
  if (j.contains("degenerate")) {
    m.degenerate = j.at("degenerate").get<std::vector<std::string>>();
  }
  return m;
}

} // namespace

void write_metrics_json(const ModelReport& report, const std::string& path,
                        const std::string& config_hash) {
  json folds = json::array();
  for (size_t i = 0; i < report.folds.size(); ++i) {
    const auto& fe = report.folds[i];
    json obj{{"dataset", report.dataset},
             {"model", report.model},
             {"fold", i},
             {"tp", fe.cm.tp},
             {"tn", fe.cm.tn},
             {"fp", fe.cm.fp},
             {"fn", fe.cm.fn},
             {"metrics", metrics_to_json(fe.metrics)}};
    folds.push_back(obj);
  }
  json doc{{"config", config_hash},
           {"dataset", report.dataset},
           {"model", report.model},
           {"folds", folds},
           {"summary",
            {{"mean", metrics_to_json(report.summary.mean)},
             {"std", metrics_to_json(report.summary.std)},
             {"std_kind", report.summary.std_kind == StdKind::sample
                              ? "sample"
                              : "population"}}}};
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write metrics: " + path);
  }
  out << doc.dump(2) << "\n";
}

ModelReport read_metrics_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CtxError(ErrorKind::evaluation, "cannot read metrics: " + path);
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw CtxError(ErrorKind::evaluation,
                   "malformed metrics json " + path + ": " + e.what());
  }
  ModelReport report;
  report.dataset = doc.at("dataset").get<std::string>();
  report.model = doc.at("model").get<std::string>();
  for (const auto& obj : doc.at("folds")) {
    FoldEvaluation fe;
    fe.cm.tp = obj.at("tp").get<long>();
    fe.cm.tn = obj.at("tn").get<long>();
    fe.cm.fp = obj.at("fp").get<long>();
    fe.cm.fn = obj.at("fn").get<long>();
    fe.metrics = metrics_from_json(obj.at("metrics"));
    report.folds.push_back(fe);
  }
  const auto& summary = doc.at("summary");
  report.summary.mean = metrics_from_json(summary.at("mean"));
  report.summary.std = metrics_from_json(summary.at("std"));
  report.summary.std_kind =
      summary.at("std_kind").get<std::string>() == "population"
          ? StdKind::population
          : StdKind::sample;
  for (const auto& fe : report.folds) {
    report.summary.per_fold.push_back(fe.metrics);
  }
  return report;
}

std::string render_markdown_table(const std::vector<ModelReport>& reports) {
  std::ostringstream out;
  out << "| Dataset | Model | Accuracy | Precision | Recall | Specificity | "
         "F1-score |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    const auto& mean = r.summary.mean;
    const auto& std = r.summary.std;
    out << "| " << r.dataset << " | " << r.model << " | "
        << format_mean_std(mean.accuracy, std.accuracy) << " | "
        << format_mean_std(mean.precision, std.precision) << " | "
        << format_mean_std(mean.recall, std.recall) << " | "
        << format_mean_std(mean.specificity, std.specificity) << " | "
        << format_mean_std(mean.f1, std.f1) << " |\n";
  }
  return out.str();
}

std::string render_csv_table(const std::vector<ModelReport>& reports) {
  std::ostringstream out;
  out << "dataset,model,accuracy_mean,accuracy_std,precision_mean,"
         "precision_std,recall_mean,recall_std,specificity_mean,"
         "specificity_std,f1_mean,f1_std\n";
  char buf[256];
  for (const auto& r : reports) {
    const auto& m = r.summary.mean;
    const auto& s = r.summary.std;
    std::snprintf(buf, sizeof(buf),
                  "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  r.dataset.c_str(), r.model.c_str(), m.accuracy, s.accuracy,
                  m.precision, s.precision, m.recall, s.recall,
                  m.specificity, s.specificity, m.f1, s.f1);
    out << buf;
  }
  return out.str();
}

namespace {

// Mean counts over folds (Figures 6-7 style).
std::array<double, 4> average_counts(const ModelReport& report) {
  std::array<double, 4> avg{0, 0, 0, 0};
  for (const auto& fe : report.folds) {
    avg[0] += static_cast<double>(fe.cm.tp);
    avg[1] += static_cast<double>(fe.cm.fn);
    avg[2] += static_cast<double>(fe.cm.fp);
    avg[3] += static_cast<double>(fe.cm.tn);
  }
  const double n = std::max<size_t>(report.folds.size(), 1);
  for (double& v : avg) v /= n;
  return avg;
}

} // namespace

void write_confusion_csv(const ModelReport& report, const std::string& path,
                         const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write confusion csv: " + path);
  }
  out << "# config " << config_hash << "\n";
  out << "fold,tp,fn,fp,tn\n";
  for (size_t i = 0; i < report.folds.size(); ++i) {
    const auto& cm = report.folds[i].cm;
    out << i << ',' << cm.tp << ',' << cm.fn << ',' << cm.fp << ',' << cm.tn
        << "\n";
  }
  const auto avg = average_counts(report);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean,%.2f,%.2f,%.2f,%.2f\n", avg[0],
                avg[1], avg[2], avg[3]);
  out << buf;
}

void render_confusion_figure(const ModelReport& report,
                             const std::string& path) {
  const auto avg = average_counts(report);
  const double max_v = std::max({avg[0], avg[1], avg[2], avg[3], 1.0});

  const int cell = 180, label_band = 70;
  const int w = label_band + 2 * cell, h = label_band + 2 * cell;
  cv::Mat canvas(h, w, CV_8UC3, cv::Scalar(255, 255, 255));

  const char* row_names[2] = {"COVID", "NonCOVID"};
  const char* col_names[2] = {"pred COVID", "pred NonCOVID"};
  // Cell layout matches the csv: [tp fn; fp tn].
  const double cells[2][2] = {{avg[0], avg[1]}, {avg[2], avg[3]}};

  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double frac = cells[r][c] / max_v;
      // Light-to-dark blue heat tint.
      const cv::Scalar color(255 - 160 * frac, 240 - 140 * frac,
                             255 - 40 * frac);
      const cv::Rect rect(label_band + c * cell, label_band + r * cell, cell,
                          cell);
      cv::rectangle(canvas, rect, color, cv::FILLED);
      cv::rectangle(canvas, rect, cv::Scalar(80, 80, 80), 1);
      char text[32];
      std::snprintf(text, sizeof(text), "%.1f", cells[r][c]);
      cv::putText(canvas, text,
                  cv::Point(rect.x + cell / 2 - 30, rect.y + cell / 2 + 8),
                  cv::FONT_HERSHEY_SIMPLEX, 0.7, cv::Scalar(20, 20, 20), 2,
                  cv::LINE_AA);
    }
    cv::putText(canvas, row_names[r],
                cv::Point(4, label_band + r * cell + cell / 2),
                cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(20, 20, 20), 1,
                cv::LINE_AA);
    cv::putText(canvas, col_names[r],
                cv::Point(label_band + r * cell + 20, label_band - 12),
                cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(20, 20, 20), 1,
                cv::LINE_AA);
  }
  cv::putText(canvas, report.model + " (" + report.dataset + ")",
              cv::Point(4, 20), cv::FONT_HERSHEY_SIMPLEX, 0.5,
              cv::Scalar(20, 20, 20), 1, cv::LINE_AA);

  if (!cv::imwrite(path, canvas)) {
    throw CtxError(ErrorKind::io, "cannot write figure: " + path);
  }
}

} // namespace ctx
