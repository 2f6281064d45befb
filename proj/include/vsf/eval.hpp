#pragma once

#include <string>
#include <vector>

#include "vsf/io.hpp"
#include "vsf/synthgen.hpp"

namespace vsf::eval {

struct PairReport {
  double pose_error_deg = 0.0;  // infinity for failed estimations
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  int candidate_count = 0;
};

struct EvalReport {
  std::vector<PairReport> per_pair;
  // accuracy at 5/10/15/20 degrees, fractions in [0, 1]
  double acc5 = 0.0, acc10 = 0.0, acc15 = 0.0, acc20 = 0.0;
  double map5 = 0.0;   // percent
  double map20 = 0.0;  // percent; mean of accuracies at {5,10,15,20}
  double mean_precision = 0.0, mean_recall = 0.0, mean_f1 = 0.0;
  double elapsed_seconds = 0.0;
  std::string config_echo;
};

EvalReport evaluate(const std::vector<io::Prediction>& preds,
                    const std::vector<synthgen::LabeledPair>& pairs);

std::string to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);

}  // namespace vsf::eval
