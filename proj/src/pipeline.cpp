#include "vsf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vsf/vsfusion.hpp"

namespace vsf::pipeline {

VecX inlier_predictor(const TokenMatrix& features, const nn::ParamStore& params,
                      const std::string& prefix) {
  TokenMatrix h = nn::context_norm_block(features, params, prefix + ".cn0");
  h = nn::context_norm_block(h, params, prefix + ".cn1");
  return nn::linear(h, params, prefix + ".out");
}

IterationState prune(const IterationState& state, double r) {
  if (!(r > 0.0 && r < 1.0))
    throw ConfigurationError("prune ratio must be in (0, 1)");
  const int n = state.candidates.count();
  const int keep = static_cast<int>(std::ceil(r * n));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (state.logits(a) != state.logits(b))
      return state.logits(a) > state.logits(b);
    return state.candidate_indices[a] < state.candidate_indices[b];
  });
  order.resize(keep);
  // keep original relative order of survivors
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return state.candidate_indices[a] < state.candidate_indices[b];
  });

  IterationState out;
  out.logits.resize(keep);
  if (state.features.size() > 0) out.features.resize(keep, state.features.cols());
  for (int i = 0; i < keep; ++i) {
    const int src = order[i];
    out.candidates.items.push_back(state.candidates.items[src]);
    out.candidate_indices.push_back(state.candidate_indices[src]);
    out.logits(i) = state.logits(src);
    if (state.features.size() > 0) out.features.row(i) = state.features.row(src);
  }
  return out;
}

namespace {

VecX softmax(const VecX& z) {
  const double m = z.maxCoeff();
  VecX e = (z.array() - m).exp();
  return e / e.sum();
}

}  // namespace

PipelineOutput forward(const vc::ImagePair* img, const CorrespondenceSet& ic,
                       const nn::ParamStore& params, const nn::NetConfig& cfg,
                       const ForwardOptions& opts) {
  cfg.validate();
  const int n = ic.count();
  int final_count = n;
  for (int t = 0; t < cfg.iterations; ++t)
    final_count = static_cast<int>(std::ceil(cfg.prune_ratio * final_count));
  if (final_count < 8)
    throw ConfigurationError(
        "final candidate count " + std::to_string(final_count) +
        " cannot support the eight-point regression");
  for (int t = 0; t < cfg.iterations; ++t) {
    if (cfg.knn[t] >= n * std::pow(cfg.prune_ratio, t))
      throw ConfigurationError("neighbor count too large for iteration " +
                               std::to_string(t + 1));
  }

  TokenMatrix fv;
  if (img) {
    const vc::FeatureMapPair maps = vc::backbone_forward(*img, params, cfg);
    fv = vc::extract_visual_cues(maps, params, cfg);
  }

  PipelineOutput out;
  IterationState state;
  state.candidates.items = ic.items;
  state.candidate_indices.resize(n);
  std::iota(state.candidate_indices.begin(), state.candidate_indices.end(), 0);

  VecX inherited;
  for (int t = 1; t <= cfg.iterations; ++t) {
    const std::string prefix = "iter" + std::to_string(t);
    TokenMatrix fs = vc::extract_spatial_cues(
        state.candidates, params, prefix, t > 1 ? &inherited : nullptr);

    const bool fusion_here =
        img && (!cfg.fuse_final_iteration_only || t == cfg.iterations);
    if (fusion_here) {
      const auto pool =
          fusion::soft_assign_pool(fs, params, prefix + ".fusion");
      const TokenMatrix fvs =
          fusion::fuse(fv, pool.fs_proj, params, prefix + ".fusion", cfg.heads);
      fs = fusion::soft_assign_unpool(fvs, fs, params, prefix + ".fusion");
    }

    nn::AttentionDiagnostics attn_diag;
    state.features =
        ctx::contextformer_forward(fs, state.candidates, cfg.knn[t - 1], params,
                                   prefix + ".ctx", cfg.heads, &attn_diag);
    state.logits = inlier_predictor(state.features, params, prefix + ".pred");

    out.iteration_logits.push_back(state.logits);
    out.iteration_indices.push_back(state.candidate_indices);
    IterationDiagnostics d;
    d.candidate_count = state.candidates.count();
    d.logit_min = state.logits.minCoeff();
    d.logit_max = state.logits.maxCoeff();
    d.logit_mean = state.logits.mean();
    d.zero_gate_rows = attn_diag.zero_gate_rows;
    out.diagnostics.push_back(d);

    state = prune(state, cfg.prune_ratio);
    inherited = state.logits;
  }

  VecX final_logits = state.logits;
  if (opts.oracle_labels) {
    if (static_cast<int>(opts.oracle_labels->size()) != n)
      throw MalformedInputError("oracle label count mismatch");
    for (int i = 0; i < state.candidates.count(); ++i) {
      final_logits(i) = (*opts.oracle_labels)[state.candidate_indices[i]]
                            ? 0.0
                            : -std::numeric_limits<double>::infinity();
    }
  }

  out.final_candidates = state.candidates;
  out.final_indices = state.candidate_indices;
  out.probs = softmax(final_logits);
  out.essential = geometry::weighted_eight_point(out.final_candidates, out.probs);
  out.verified_flags =
      geometry::full_size_verification(ic, out.essential, opts.verification_tau);
  return out;
}

double classification_loss(
    const std::vector<VecX>& logits_per_iter,
    const std::vector<std::vector<uint8_t>>& labels_per_iter,
    const std::vector<VecX>& omega_per_iter) {
  if (logits_per_iter.size() != labels_per_iter.size())
    throw MalformedInputError("iteration count mismatch in classification loss");
  double total = 0.0;
  for (size_t t = 0; t < logits_per_iter.size(); ++t) {
    const VecX& o = logits_per_iter[t];
    const auto& y = labels_per_iter[t];
    if (o.size() != static_cast<int64_t>(y.size()))
      throw MalformedInputError("logit/label length mismatch at iteration " +
                                std::to_string(t + 1));
    double sum = 0.0;
    for (int64_t j = 0; j < o.size(); ++j) {
      double z = o(j);
      if (t < omega_per_iter.size()) z *= omega_per_iter[t](j);
      // stable BCE-with-logits
      sum += std::max(z, 0.0) - z * static_cast<double>(y[j]) +
             std::log1p(std::exp(-std::abs(z)));
    }
    total += sum / static_cast<double>(o.size());
  }
  return total;
}

double essential_loss(const EssentialMatrix& est, const EssentialMatrix& gt,
                      int grid) {
  double sum = 0.0;
  int used = 0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double u = -0.8 + 1.6 * i / (grid - 1);
      const double v = -0.8 + 1.6 * j / (grid - 1);
      const Vec3 line = gt.e * Vec3(u, v, 1.0);
      const double g2 = line(0) * line(0) + line(1) * line(1);
      if (g2 < 1e-12) continue;  // epipole degeneracy
      // exact partner on the ground-truth epipolar line
      Correspondence c;
      c.x = u;
      c.y = v;
      c.xp = -line(2) * line(0) / g2;
      c.yp = -line(2) * line(1) / g2;
      sum += geometry::epipolar_residual(c, est);
      ++used;
    }
  }
  if (used == 0)
    throw DegenerateConfigurationError("essential_loss: all samples degenerate");
  return sum / used;
}

double hybrid_loss(double cls, double ess, double alpha) {
  if (alpha < 0.0) throw MalformedInputError("alpha must be >= 0");
  return cls + alpha * ess;
}

double alpha_schedule(int64_t step) { return step < 20000 ? 0.0 : 0.5; }

std::vector<std::vector<uint8_t>> weak_labels_per_iteration(
    const std::vector<std::vector<int>>& candidate_indices_per_iter,
    const CorrespondenceSet& ic, const EssentialMatrix& gt_essential,
    double tau) {
  const auto full = geometry::full_size_verification(ic, gt_essential, tau);
  std::vector<std::vector<uint8_t>> out;
  for (const auto& indices : candidate_indices_per_iter) {
    std::vector<uint8_t> labels;
    labels.reserve(indices.size());
    for (int idx : indices) labels.push_back(full[idx]);
    out.push_back(std::move(labels));
  }
  return out;
}

}  // namespace vsf::pipeline
