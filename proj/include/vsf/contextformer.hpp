#pragma once

#include <string>

#include "vsf/nncore.hpp"
#include "vsf/types.hpp"

namespace vsf::ctx {

struct KnnGraph {
  Eigen::MatrixXi neighbor_idx;  // N x K, self excluded, distance order
  TokenMatrix edge_feats;        // (N*K) x 2C; row i*K+j = [f_i, f_i - f_ij]

  int n() const { return static_cast<int>(neighbor_idx.rows()); }
  int k() const { return static_cast<int>(neighbor_idx.cols()); }
};

// Feature-space Euclidean KNN, ties broken by lower index.
KnnGraph build_knn_graph(const TokenMatrix& f, int k);

// PointCN embedding followed by channel-, spatial-, and neighborhood-wise
// squeeze-excitation gating with a residual to the input graph.
KnnGraph graph_attention_block(const KnnGraph& g, const nn::ParamStore& params,
                               const std::string& prefix);

// Shared edge MLP (2C -> C), per-node max over neighbors.
TokenMatrix aggregate_neighborhood(const KnnGraph& g,
                                   const nn::ParamStore& params,
                                   const std::string& prefix);

// M_ls[i][j] = exp(-| ||dpA|| - ||dpB|| | / sigma), sigma the mean
// off-diagonal difference. Entries in (0, 1], unit diagonal.
MatX length_similarity_matrix(const CorrespondenceSet& ic);

// Length-similarity-gated self-attention plus feed-forward.
TokenMatrix global_context(const TokenMatrix& f, const MatX& mls,
                           const nn::ParamStore& params,
                           const std::string& prefix, int heads,
                           nn::AttentionDiagnostics* diag = nullptr);

// Full local+global stage; output compressed back to C channels.
TokenMatrix contextformer_forward(const TokenMatrix& f,
                                  const CorrespondenceSet& ic, int k,
                                  const nn::ParamStore& params,
                                  const std::string& prefix, int heads,
                                  nn::AttentionDiagnostics* diag = nullptr);

}  // namespace vsf::ctx
