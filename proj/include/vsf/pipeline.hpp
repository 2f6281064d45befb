#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vsf/contextformer.hpp"
#include "vsf/geometry.hpp"
#include "vsf/nncore.hpp"
#include "vsf/synthgen.hpp"
#include "vsf/vcextractor.hpp"

namespace vsf::pipeline {

struct IterationState {
  CorrespondenceSet candidates;
  std::vector<int> candidate_indices;  // into the initial set
  VecX logits;
  TokenMatrix features;
};

struct IterationDiagnostics {
  int candidate_count = 0;
  double logit_min = 0.0, logit_max = 0.0, logit_mean = 0.0;
  int zero_gate_rows = 0;
};

struct PipelineOutput {
  CorrespondenceSet final_candidates;
  std::vector<int> final_indices;
  VecX probs;  // sums to 1
  EssentialMatrix essential;
  std::vector<uint8_t> verified_flags;  // length N over the initial set
  std::vector<IterationDiagnostics> diagnostics;
  // per-iteration predictor outputs, for the classification loss
  std::vector<VecX> iteration_logits;
  std::vector<std::vector<int>> iteration_indices;
};

// Two context-norm blocks and a shared linear map to one logit per candidate.
VecX inlier_predictor(const TokenMatrix& features, const nn::ParamStore& params,
                      const std::string& prefix);

// Keep the ceil(r * N_t) candidates with largest logits, ties by lower
// original index.
IterationState prune(const IterationState& state, double r);

struct ForwardOptions {
  // Replace learned logits with the ground-truth indicator before the final
  // regression; exercises the geometry path independent of weights.
  const std::vector<uint8_t>* oracle_labels = nullptr;
  double verification_tau = 1e-4;
};

// The iterative pruning loop: spatial cues -> (optional) visual-spatial
// fusion -> context stage -> inlier predictor -> prune, then softmax
// weighting, weighted eight-point and full-size verification.
PipelineOutput forward(const vc::ImagePair* img, const CorrespondenceSet& ic,
                       const nn::ParamStore& params, const nn::NetConfig& cfg,
                       const ForwardOptions& opts = {});

// Sum over iterations of mean binary cross-entropy on (omega-scaled) logits.
double classification_loss(const std::vector<VecX>& logits_per_iter,
                           const std::vector<std::vector<uint8_t>>& labels_per_iter,
                           const std::vector<VecX>& omega_per_iter = {});

// Mean symmetric epipolar residual of gt-consistent virtual correspondences
// evaluated under est.
double essential_loss(const EssentialMatrix& est, const EssentialMatrix& gt,
                      int grid = 10);

double hybrid_loss(double cls, double ess, double alpha);

// 0 below step 20000, 0.5 from there on.
double alpha_schedule(int64_t step);

// Labels for forward's per-iteration logits, from the training-time weak
// supervision rule (verification under the ground-truth essential).
std::vector<std::vector<uint8_t>> weak_labels_per_iteration(
    const std::vector<std::vector<int>>& candidate_indices_per_iter,
    const CorrespondenceSet& ic, const EssentialMatrix& gt_essential,
    double tau = 1e-4);

}  // namespace vsf::pipeline
