#include "vsf/eval.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vsf/geometry.hpp"

namespace vsf::eval {

EvalReport evaluate(const std::vector<io::Prediction>& preds,
                    const std::vector<synthgen::LabeledPair>& pairs) {
  if (preds.size() != pairs.size()) {
    std::ostringstream os;
    os << "prediction/dataset pair mismatch: " << preds.size() << " vs "
       << pairs.size() << "; missing ids:";
    const size_t lo = std::min(preds.size(), pairs.size());
    const size_t hi = std::max(preds.size(), pairs.size());
    for (size_t i = lo; i < hi; ++i) os << ' ' << i;
    throw DataError(os.str());
  }

  EvalReport report;
  int ok5 = 0, ok10 = 0, ok15 = 0, ok20 = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const auto& pred = preds[i];
    const auto& gt = pairs[i];
    PairReport pr;
    pr.candidate_count = static_cast<int>(pred.probs.size());
    if (!pred.ok) {
      pr.pose_error_deg = std::numeric_limits<double>::infinity();
    } else {
      pr.pose_error_deg = geometry::pose_error_deg(pred.pose, gt.gt_pose);
      if (pred.verified_flags.size() != gt.correspondences.labels.size())
        throw DataError("flag/label length mismatch at pair " +
                        std::to_string(i));
      int tp = 0, fp = 0, fn = 0;
      for (size_t j = 0; j < pred.verified_flags.size(); ++j) {
        const bool f = pred.verified_flags[j];
        const bool y = gt.correspondences.labels[j];
        tp += f && y;
        fp += f && !y;
        fn += !f && y;
      }
      pr.precision = tp + fp > 0 ? double(tp) / (tp + fp) : 0.0;
      pr.recall = tp + fn > 0 ? double(tp) / (tp + fn) : 0.0;
      pr.f1 = pr.precision + pr.recall > 0
                  ? 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall)
                  : 0.0;
    }
    ok5 += pr.pose_error_deg < 5.0;
    ok10 += pr.pose_error_deg < 10.0;
    ok15 += pr.pose_error_deg < 15.0;
    ok20 += pr.pose_error_deg < 20.0;
    report.mean_precision += pr.precision;
    report.mean_recall += pr.recall;
    report.mean_f1 += pr.f1;
    report.per_pair.push_back(pr);
  }
  const double n = static_cast<double>(preds.size());
  report.acc5 = ok5 / n;
  report.acc10 = ok10 / n;
  report.acc15 = ok15 / n;
  report.acc20 = ok20 / n;
  report.map5 = 100.0 * report.acc5;
  report.map20 =
      100.0 * (report.acc5 + report.acc10 + report.acc15 + report.acc20) / 4.0;
  report.mean_precision /= n;
  report.mean_recall /= n;
  report.mean_f1 /= n;
  return report;
}

std::string to_json(const EvalReport& r) {
  nlohmann::json j;
  j["tool_version"] = io::kToolVersion;
  j["config"] = r.config_echo;
  j["aggregate"] = {
      {"mAP5", r.map5},         {"mAP20", r.map20},
      {"acc5", r.acc5},         {"acc10", r.acc10},
      {"acc15", r.acc15},       {"acc20", r.acc20},
      {"mean_precision", r.mean_precision},
      {"mean_recall", r.mean_recall},
      {"mean_f1", r.mean_f1},
      {"elapsed_seconds", r.elapsed_seconds},
  };
  auto& pp = j["per_pair"] = nlohmann::json::array();
  for (const auto& p : r.per_pair) {
    pp.push_back({{"pose_error_deg",
                   std::isinf(p.pose_error_deg) ? 1e308 : p.pose_error_deg},
                  {"precision", p.precision},
                  {"recall", p.recall},
                  {"f1", p.f1},
                  {"candidates", p.candidate_count}});
  }
  return j.dump(2);
}

std::string to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "pair,pose_error_deg,precision,recall,f1,candidates\n";
  for (size_t i = 0; i < r.per_pair.size(); ++i) {
    const auto& p = r.per_pair[i];
    os << i << ',' << p.pose_error_deg << ',' << p.precision << ','
       << p.recall << ',' << p.f1 << ',' << p.candidate_count << '\n';
  }
  return os.str();
}

}  // namespace vsf::eval
