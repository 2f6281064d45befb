#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsf/types.hpp"

namespace vsf::nn {

struct NetConfig {
  int channels = 128;        // C
  int heads = 4;             // h; d = C / h
  int visual_tokens = 48;    // M
  int n_correspondences = 2000;
  int iterations = 2;        // lambda
  double prune_ratio = 0.5;  // r
  std::vector<int> knn = {9, 6};  // k per iteration
  int backbone_channels = 64;     // C_F
  int backbone_blocks = 2;
  int image_h = 120;
  int image_w = 160;
  bool attention_bias = false;
  int ffn_ratio = 2;
  bool fuse_final_iteration_only = true;

  int head_dim() const { return channels / heads; }
  void validate() const;
  uint64_t hash() const;
};

// Shaped, named tensor. Rank-N dims with the data held as a dims[0] x
// (product of remaining dims) matrix.
struct Tensor {
  std::vector<int64_t> dims;
  MatX mat;

  int64_t numel() const;
};

// Immutable after construction; shared read-only across forward passes.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(std::map<std::string, Tensor> entries, uint64_t config_hash)
      : entries_(std::move(entries)), config_hash_(config_hash) {}

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const {
    return entries_.count(name) > 0;
  }
  const std::map<std::string, Tensor>& entries() const { return entries_; }
  uint64_t config_hash() const { return config_hash_; }

 private:
  std::map<std::string, Tensor> entries_;
  uint64_t config_hash_ = 0;
};

// Deterministic fan-in-scaled uniform initialization of every parameter the
// pipeline consumes for this config.
ParamStore init_params(const NetConfig& cfg, uint64_t seed);

// Binary weight file: magic "VSPW", version u16, config-hash u64, entry
// count u32, then per entry: name-length u32 + UTF-8 name, rank u32,
// dims i64..., row-major f32 little-endian payload.
void save_params(const ParamStore& params, const std::string& path);
ParamStore load_params(const std::string& path);

// ---- forward primitives (pure; token rows, channel cols) ----

// Shared per-token linear layers, rectified-linear between layers.
// Layer i uses params "<prefix>.w<i>" (in x out) and "<prefix>.b<i>".
TokenMatrix mlp_forward(const TokenMatrix& x, const ParamStore& params,
                        const std::string& prefix, int n_layers);

TokenMatrix linear(const TokenMatrix& x, const ParamStore& params,
                   const std::string& prefix);
TokenMatrix relu(TokenMatrix x);

// Channel-wise standardization across tokens (eps 1e-5), two shared linear
// layers, residual.
TokenMatrix context_norm_block(const TokenMatrix& x, const ParamStore& params,
                               const std::string& prefix);

// Standardize each channel across tokens.
TokenMatrix context_normalize(const TokenMatrix& x, double eps = 1e-5);

struct AttentionDiagnostics {
  int zero_gate_rows = 0;
};

// Row-softmax(QK^T/sqrt(d)) per head, optional multiplicative row gate with
// renormalization, concatenated heads, output projection. Params under
// "<prefix>.wq/.wk/.wv/.wo" (each C x C).
TokenMatrix multi_head_self_attention(const TokenMatrix& x,
                                      const ParamStore& params,
                                      const std::string& prefix, int heads,
                                      const MatX* gate = nullptr,
                                      AttentionDiagnostics* diag = nullptr);

// Queries from qx, keys/values from kvx; output has qx's token count.
TokenMatrix cross_attention(const TokenMatrix& qx, const TokenMatrix& kvx,
                            const ParamStore& params, const std::string& prefix,
                            int heads);

// Pre-normalized two-layer expansion with residual:
// x + W2 relu(W1 norm(x)). Params "<prefix>.w1/.b1/.w2/.b2".
TokenMatrix feed_forward_block(const TokenMatrix& x, const ParamStore& params,
                               const std::string& prefix);

}  // namespace vsf::nn
