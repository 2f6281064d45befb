#include "vsf/contextformer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace vsf::ctx {

KnnGraph build_knn_graph(const TokenMatrix& f, int k) {
  const int n = static_cast<int>(f.rows());
  const int c = static_cast<int>(f.cols());
  if (k >= n) throw ConfigurationError("build_knn_graph: k must be < N");
  if (k < 1) throw ConfigurationError("build_knn_graph: k must be >= 1");

  // squared distances via ||a||^2 + ||b||^2 - 2 a.b
  const VecX sq = f.rowwise().squaredNorm();
  MatX d2 = (-2.0 * f * f.transpose());
  d2.colwise() += sq;
  d2.rowwise() += sq.transpose();

  KnnGraph g;
  g.neighbor_idx.resize(n, k);
  g.edge_feats.resize(static_cast<int64_t>(n) * k, 2 * c);

  std::vector<int> order;
  order.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);  // no self edge
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) {
                        if (d2(i, a) != d2(i, b)) return d2(i, a) < d2(i, b);
                        return a < b;
                      });
    for (int j = 0; j < k; ++j) {
      const int nb = order[j];
      g.neighbor_idx(i, j) = nb;
      g.edge_feats.row(static_cast<int64_t>(i) * k + j)
          << f.row(i), f.row(i) - f.row(nb);
    }
  }
  return g;
}

KnnGraph graph_attention_block(const KnnGraph& g, const nn::ParamStore& params,
                               const std::string& prefix) {
  if (!g.edge_feats.allFinite())
    throw MalformedInputError("graph_attention_block: non-finite edge features");
  const int n = g.n();
  const int k = g.k();
  const int w = static_cast<int>(g.edge_feats.cols());

  const TokenMatrix embedded =
      nn::context_norm_block(g.edge_feats, params, prefix + ".pointcn");

  // channel logits: pool over all edges, shared two-layer map over channels
  TokenMatrix chan_pool = embedded.colwise().mean();  // 1 x 2C
  const TokenMatrix chan_logits =
      nn::mlp_forward(chan_pool, params, prefix + ".channel", 2);  // 1 x 2C

  // spatial (per-node) logits: pool each node's edges over channels and
  // neighbors, shared scalar map
  TokenMatrix node_pool(n, 1);
  for (int i = 0; i < n; ++i)
    node_pool(i, 0) = embedded.middleRows(static_cast<int64_t>(i) * k, k).mean();
  const TokenMatrix spatial_logits =
      nn::mlp_forward(node_pool, params, prefix + ".spatial", 2);  // N x 1

  // neighborhood logits: avg + max pooling over channels -> N x K map,
  // shared MLP along the neighbor axis
  MatX a1(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      const auto row = embedded.row(static_cast<int64_t>(i) * k + j);
      a1(i, j) = row.mean() + row.maxCoeff();
    }
  const MatX a2 = nn::mlp_forward(a1, params, prefix + ".neigh", 2);  // N x K

  // combined gate: one sigmoid over the summed logit maps, Hadamard with the
  // embedded graph, residual to the input graph
  KnnGraph out = g;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const int64_t row = static_cast<int64_t>(i) * k + j;
      for (int ch = 0; ch < w; ++ch) {
        const double logit =
            chan_logits(0, ch) + spatial_logits(i, 0) + a2(i, j);
        const double gate = 1.0 / (1.0 + std::exp(-logit));
        out.edge_feats(row, ch) =
            embedded(row, ch) * gate + g.edge_feats(row, ch);
      }
    }
  }
  return out;
}

TokenMatrix aggregate_neighborhood(const KnnGraph& g,
                                   const nn::ParamStore& params,
                                   const std::string& prefix) {
  const int n = g.n();
  const int k = g.k();
  const TokenMatrix mapped =
      nn::relu(nn::mlp_forward(g.edge_feats, params, prefix, 1));
  TokenMatrix out(n, mapped.cols());
  for (int i = 0; i < n; ++i) {
    out.row(i) = mapped.row(static_cast<int64_t>(i) * k);
    for (int j = 1; j < k; ++j)
      out.row(i) = out.row(i).cwiseMax(mapped.row(static_cast<int64_t>(i) * k + j));
  }
  return out;
}

MatX length_similarity_matrix(const CorrespondenceSet& ic) {
  const int n = ic.count();
  if (n < 1) throw MalformedInputError("empty correspondence set");
  MatX m(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const auto& a = ic.items[i];
      const auto& b = ic.items[j];
      const double la = std::hypot(a.x - b.x, a.y - b.y);
      const double lb = std::hypot(a.xp - b.xp, a.yp - b.yp);
      m(i, j) = m(j, i) = std::abs(la - lb);
    }
  }
  double sigma = 1e-9;
  if (n > 1) {
    const double off_mean = m.sum() / (static_cast<double>(n) * (n - 1));
    sigma = std::max(off_mean, 1e-9);
  }
  return (-m / sigma).array().exp();
}

TokenMatrix global_context(const TokenMatrix& f, const MatX& mls,
                           const nn::ParamStore& params,
                           const std::string& prefix, int heads,
                           nn::AttentionDiagnostics* diag) {
  if (mls.rows() != f.rows() || mls.cols() != f.rows())
    throw ConfigurationError("global_context: gate shape mismatch");
  TokenMatrix h = nn::multi_head_self_attention(f, params, prefix + ".attn",
                                                heads, &mls, diag);
  return nn::feed_forward_block(h, params, prefix + ".ffn");
}

TokenMatrix contextformer_forward(const TokenMatrix& f,
                                  const CorrespondenceSet& ic, int k,
                                  const nn::ParamStore& params,
                                  const std::string& prefix, int heads,
                                  nn::AttentionDiagnostics* diag) {
  if (ic.count() != f.rows())
    throw ConfigurationError("contextformer: feature/correspondence count mismatch");
  KnnGraph g = build_knn_graph(f, k);
  g = graph_attention_block(g, params, prefix + ".gab");
  const TokenMatrix local = aggregate_neighborhood(g, params, prefix + ".agg");
  const MatX mls = length_similarity_matrix(ic);
  const TokenMatrix global =
      global_context(local, mls, params, prefix, heads, diag);

  TokenMatrix cat(f.rows(), f.cols() + global.cols());
  cat << f, global;
  return nn::linear(cat, params, prefix + ".compress");
}

}  // namespace vsf::ctx
