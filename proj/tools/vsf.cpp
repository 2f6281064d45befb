#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vsf/eval.hpp"
#include "vsf/geometry.hpp"
#include "vsf/io.hpp"
#include "vsf/nncore.hpp"
#include "vsf/pipeline.hpp"
#include "vsf/rng.hpp"
#include "vsf/synthgen.hpp"

namespace {

using namespace vsf;

std::string scene_config_json(const synthgen::SceneConfig& c, int n_pairs) {
  nlohmann::json j = {
      {"n_points", c.n_points},
      {"outlier_ratio", c.outlier_ratio},
      {"noise_sigma", c.noise_sigma},
      {"depth_near", c.depth_near},
      {"depth_far", c.depth_far},
      {"rotation_magnitude_deg", c.rotation_magnitude_deg},
      {"baseline_magnitude", c.baseline_magnitude},
      {"seed", c.seed},
      {"n_pairs", n_pairs},
  };
  return j.dump();
}

std::string net_config_json(const nn::NetConfig& c) {
  nlohmann::json j = {
      {"channels", c.channels},
      {"heads", c.heads},
      {"visual_tokens", c.visual_tokens},
      {"n_correspondences", c.n_correspondences},
      {"iterations", c.iterations},
      {"prune_ratio", c.prune_ratio},
      {"knn", c.knn},
      {"backbone_channels", c.backbone_channels},
      {"backbone_blocks", c.backbone_blocks},
      {"image_h", c.image_h},
      {"image_w", c.image_w},
      {"attention_bias", c.attention_bias},
      {"ffn_ratio", c.ffn_ratio},
      {"fuse_final_iteration_only", c.fuse_final_iteration_only},
      {"config_hash", c.hash()},
  };
  return j.dump();
}

void add_net_flags(CLI::App* cmd, nn::NetConfig& cfg) {
  cmd->add_option("--channels", cfg.channels, "feature channels C");
  cmd->add_option("--heads", cfg.heads, "attention heads");
  cmd->add_option("--visual-tokens", cfg.visual_tokens, "cluster token count M");
  cmd->add_option("--iterations", cfg.iterations, "pruning iterations");
  cmd->add_option("--prune-ratio", cfg.prune_ratio, "per-iteration keep ratio");
  cmd->add_option("--knn", cfg.knn, "neighbor counts, one per iteration");
  cmd->add_option("--backbone-channels", cfg.backbone_channels,
                  "backbone output channels C_F");
  cmd->add_option("--backbone-blocks", cfg.backbone_blocks,
                  "residual blocks in the backbone");
  cmd->add_option("--image-h", cfg.image_h, "input image height");
  cmd->add_option("--image-w", cfg.image_w, "input image width");
}

// Deterministic smooth test images; stands in for real image ingestion.
vc::ImagePair procedural_image_pair(const nn::NetConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  vc::ImagePair img;
  for (vc::Image* target : {&img.a, &img.b}) {
    target->clear();
    for (int c = 0; c < 3; ++c) {
      MatX plane(cfg.image_h, cfg.image_w);
      const double fy = rng.uniform(1.0, 6.0), fx = rng.uniform(1.0, 6.0);
      const double py = rng.uniform(0.0, 2 * M_PI), px = rng.uniform(0.0, 2 * M_PI);
      for (int i = 0; i < cfg.image_h; ++i)
        for (int j = 0; j < cfg.image_w; ++j)
          plane(i, j) = 0.5 + 0.25 * std::sin(fy * i * M_PI / cfg.image_h + py) +
                        0.25 * std::sin(fx * j * M_PI / cfg.image_w + px);
      target->push_back(plane);
    }
  }
  return img;
}

RelativePose recover_pose(const io::Prediction& p, const CorrespondenceSet& ic) {
  CorrespondenceSet support;
  for (size_t i = 0; i < p.verified_flags.size(); ++i)
    if (p.verified_flags[i]) support.items.push_back(ic.items[i]);
  if (support.count() == 0)
    for (int idx : p.final_indices) support.items.push_back(ic.items[idx]);
  return geometry::decompose_essential(p.essential, support);
}

int cmd_synth(const synthgen::SceneConfig& cfg, int n_pairs,
              const std::string& out) {
  cfg.validate();
  const auto pairs = synthgen::generate_dataset(cfg, n_pairs);
  io::save_dataset(pairs, scene_config_json(cfg, n_pairs), out);
  std::cout << "wrote " << pairs.size() << " pairs to " << out << "\n";
  return 0;
}

int cmd_weights_init(const nn::NetConfig& cfg, uint64_t seed,
                     const std::string& out) {
  const auto params = nn::init_params(cfg, seed);
  nn::save_params(params, out);
  std::cout << "wrote " << params.entries().size() << " tensors, config hash "
            << params.config_hash() << "\n";
  return 0;
}

int cmd_weights_inspect(const std::string& path) {
  const auto params = nn::load_params(path);
  std::cout << "config_hash " << params.config_hash() << "\n";
  for (const auto& [name, t] : params.entries()) {
    std::cout << name << " [";
    for (size_t i = 0; i < t.dims.size(); ++i)
      std::cout << (i ? "x" : "") << t.dims[i];
    std::cout << "] norm " << t.mat.norm() << "\n";
  }
  return 0;
}

int cmd_weights_hash(const std::string& path) {
  std::cout << nn::load_params(path).config_hash() << "\n";
  return 0;
}

int cmd_infer(const std::string& dataset_path, const std::string& weights_path,
              const std::string& out, nn::NetConfig cfg, bool no_visual,
              bool oracle_weights, uint64_t seed) {
  const auto params = nn::load_params(weights_path);
  if (params.config_hash() != cfg.hash()) {
    std::cerr << "config hash mismatch: weights " << params.config_hash()
              << " vs runtime " << cfg.hash() << "\n";
    return 2;
  }
  const auto pairs = io::load_dataset(dataset_path);
  std::vector<io::Prediction> preds;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    io::Prediction p;
    try {
      pipeline::ForwardOptions opts;
      if (oracle_weights) {
        if (!pair.correspondences.has_labels())
          throw DataError("oracle mode needs labeled pairs");
        opts.oracle_labels = &pair.correspondences.labels;
      }
      std::optional<vc::ImagePair> img;
      if (!no_visual) img = procedural_image_pair(cfg, derive_seed(seed, i));
      const auto out_pipe =
          pipeline::forward(img ? &*img : nullptr, pair.correspondences, params,
                            cfg, opts);
      p.probs = out_pipe.probs;
      p.final_indices = out_pipe.final_indices;
      p.essential = out_pipe.essential;
      p.verified_flags = out_pipe.verified_flags;
      p.pose = recover_pose(p, pair.correspondences);
    } catch (const std::exception& e) {
      p = {};
      p.ok = false;
      p.failure_reason = e.what();
    }
    preds.push_back(std::move(p));
  }
  io::save_predictions(preds, net_config_json(cfg), out);
  std::cout << "wrote " << preds.size() << " predictions to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& predictions_path, const std::string& dataset_path,
             const std::string& out, const std::string& csv_out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto preds = io::load_predictions(predictions_path);
  const auto pairs = io::load_dataset(dataset_path);
  auto report = eval::evaluate(preds, pairs);
  report.config_echo = predictions_path + " vs " + dataset_path;
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const std::string json = eval::to_json(report);
  if (out.empty()) {
    std::cout << json << "\n";
  } else {
    std::ofstream os(out);
    if (!os) throw DataError("cannot open for writing: " + out);
    os << json << "\n";
  }
  if (!csv_out.empty()) {
    std::ofstream os(csv_out);
    if (!os) throw DataError("cannot open for writing: " + csv_out);
    os << eval::to_csv(report);
  }
  std::cout << "mAP5 " << report.map5 << " mAP20 " << report.map20 << " P "
            << report.mean_precision << " R " << report.mean_recall << " F1 "
            << report.mean_f1 << "\n";
  return 0;
}

int cmd_ransac(const std::string& dataset_path,
               const std::string& predictions_path, const std::string& out,
               int iters, double tau, uint64_t seed) {
  const auto pairs = io::load_dataset(dataset_path);
  std::vector<io::Prediction> post;
  if (!predictions_path.empty()) {
    post = io::load_predictions(predictions_path);
    if (post.size() != pairs.size())
      throw DataError("predictions/dataset pair count mismatch");
  }

  std::vector<io::Prediction> preds;
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& ic = pairs[i].correspondences;
    io::Prediction p;
    try {
      CorrespondenceSet input;
      std::vector<int> input_indices;
      if (!predictions_path.empty()) {
        if (!post[i].ok) throw EstimationFailedError("upstream prediction failed");
        for (size_t j = 0; j < post[i].verified_flags.size(); ++j)
          if (post[i].verified_flags[j]) {
            input.items.push_back(ic.items[j]);
            input_indices.push_back(static_cast<int>(j));
          }
      } else {
        input = ic;
        input_indices.resize(ic.count());
        for (int j = 0; j < ic.count(); ++j) input_indices[j] = j;
      }
      const auto res =
          geometry::ransac_essential(input, iters, tau, derive_seed(seed, i));
      p.essential = res.essential;
      p.verified_flags = geometry::full_size_verification(ic, res.essential, tau);
      for (size_t j = 0; j < input_indices.size(); ++j)
        if (res.inliers[j]) p.final_indices.push_back(input_indices[j]);
      p.probs = VecX::Constant(p.final_indices.size(),
                               1.0 / std::max<size_t>(1, p.final_indices.size()));
      p.pose = recover_pose(p, ic);
    } catch (const std::exception& e) {
      p = {};
      p.ok = false;
      p.failure_reason = e.what();
    }
    preds.push_back(std::move(p));
  }
  nlohmann::json cfg = {{"mode", predictions_path.empty() ? "baseline" : "post"},
                        {"iters", iters},
                        {"tau", tau},
                        {"seed", seed}};
  io::save_predictions(preds, cfg.dump(), out);
  std::cout << "wrote " << preds.size() << " predictions to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-view correspondence pruning and pose estimation toolkit"};
  app.require_subcommand(1);

  // synth
  synthgen::SceneConfig scene;
  int n_pairs = 1;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
  synth->add_option("--out", synth_out, "output dataset path")->required();
  synth->add_option("--pairs", n_pairs, "number of pairs");
  synth->add_option("--n-points", scene.n_points, "correspondences per pair");
  synth->add_option("--outlier-ratio", scene.outlier_ratio, "fraction in [0,1)");
  synth->add_option("--noise-sigma", scene.noise_sigma, "inlier coordinate noise");
  synth->add_option("--depth-near", scene.depth_near, "near depth");
  synth->add_option("--depth-far", scene.depth_far, "far depth");
  synth->add_option("--rotation", scene.rotation_magnitude_deg,
                    "max rotation, degrees");
  synth->add_option("--baseline", scene.baseline_magnitude, "baseline magnitude");
  synth->add_option("--seed", scene.seed, "master seed");

  // weights
  nn::NetConfig wcfg;
  uint64_t wseed = 0;
  std::string wpath;
  auto* weights = app.add_subcommand("weights", "weight file management");
  weights->require_subcommand(1);
  auto* winit = weights->add_subcommand("init", "write a fresh weight file");
  winit->add_option("--out", wpath, "output path")->required();
  winit->add_option("--seed", wseed, "init seed");
  add_net_flags(winit, wcfg);
  auto* winspect = weights->add_subcommand("inspect", "list tensors");
  winspect->add_option("file", wpath, "weight file")->required();
  auto* whash = weights->add_subcommand("hash", "print the config hash");
  whash->add_option("file", wpath, "weight file")->required();

  // infer
  nn::NetConfig icfg;
  std::string infer_dataset, infer_weights, infer_out;
  bool no_visual = false, oracle_weights = false;
  uint64_t infer_seed = 0;
  auto* infer = app.add_subcommand("infer", "run the pruning pipeline");
  infer->add_option("--dataset", infer_dataset)->required();
  infer->add_option("--weights", infer_weights)->required();
  infer->add_option("--out", infer_out)->required();
  infer->add_flag("--no-visual", no_visual, "disable the visual branch");
  infer->add_flag("--oracle-weights", oracle_weights,
                  "use ground-truth indicator weights (diagnostic)");
  infer->add_option("--seed", infer_seed);
  add_net_flags(infer, icfg);

  // eval
  std::string eval_preds, eval_dataset, eval_out, eval_csv;
  auto* evalc = app.add_subcommand("eval", "score predictions against a dataset");
  evalc->add_option("--predictions", eval_preds)->required();
  evalc->add_option("--dataset", eval_dataset)->required();
  evalc->add_option("--out", eval_out, "report JSON path (default stdout)");
  evalc->add_option("--csv", eval_csv, "optional per-pair CSV path");

  // ransac
  std::string r_dataset, r_preds, r_out;
  int r_iters = 1000;
  double r_tau = 1e-4;
  uint64_t r_seed = 0;
  auto* ransac = app.add_subcommand(
      "ransac", "robust baseline, or post-processing of predictions");
  ransac->add_option("--dataset", r_dataset)->required();
  ransac->add_option("--predictions", r_preds,
                     "post-process these predictions' verified inliers");
  ransac->add_option("--out", r_out)->required();
  ransac->add_option("--iters", r_iters);
  ransac->add_option("--tau", r_tau);
  ransac->add_option("--seed", r_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(scene, n_pairs, synth_out);
    if (*winit) return cmd_weights_init(wcfg, wseed, wpath);
    if (*winspect) return cmd_weights_inspect(wpath);
    if (*whash) return cmd_weights_hash(wpath);
    if (*infer)
      return cmd_infer(infer_dataset, infer_weights, infer_out, icfg, no_visual,
                       oracle_weights, infer_seed);
    if (*evalc) return cmd_eval(eval_preds, eval_dataset, eval_out, eval_csv);
    if (*ransac)
      return cmd_ransac(r_dataset, r_preds, r_out, r_iters, r_tau, r_seed);
  } catch (const ConfigurationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InfeasibleConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
