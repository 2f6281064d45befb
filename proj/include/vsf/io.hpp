#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsf/synthgen.hpp"
#include "vsf/types.hpp"

namespace vsf::io {

inline constexpr const char* kToolVersion = "0.1.0";

// Line-delimited dataset: '#'-prefixed header (format tag, tool version,
// resolved config), then one pair per line with every value printed at 17
// significant digits.
void save_dataset(const std::vector<synthgen::LabeledPair>& pairs,
                  const std::string& config_echo, const std::string& path);
std::vector<synthgen::LabeledPair> load_dataset(const std::string& path);

struct Prediction {
  bool ok = true;
  std::string failure_reason;
  VecX probs;                       // over final candidates
  std::vector<int> final_indices;   // into the pair's initial set
  EssentialMatrix essential;
  std::vector<uint8_t> verified_flags;
  RelativePose pose;
};

void save_predictions(const std::vector<Prediction>& preds,
                      const std::string& config_echo, const std::string& path);
std::vector<Prediction> load_predictions(const std::string& path);

std::string format_g17(double v);

}  // namespace vsf::io
