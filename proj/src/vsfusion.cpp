#include "vsf/vsfusion.hpp"

#include <cmath>

namespace vsf::fusion {

namespace {

MatX score_map(const TokenMatrix& fs, const nn::ParamStore& params,
               const std::string& prefix) {
  return nn::linear(fs, params, prefix);  // N x M
}

}  // namespace

PoolResult soft_assign_pool(const TokenMatrix& fs, const nn::ParamStore& params,
                            const std::string& prefix) {
  MatX scores = score_map(fs, params, prefix + ".pool");
  // softmax over N, per cluster column
  const Eigen::RowVectorXd colmax = scores.colwise().maxCoeff();
  MatX w = (scores.rowwise() - colmax).array().exp();
  w.array().rowwise() /= w.colwise().sum().array();
  return {w.transpose() * fs, std::move(w)};
}

TokenMatrix fuse(const TokenMatrix& fv, const TokenMatrix& fs_proj,
                 const nn::ParamStore& params, const std::string& prefix,
                 int heads) {
  if (fv.rows() != fs_proj.rows() || fv.cols() != fs_proj.cols())
    throw ConfigurationError("fuse: visual/spatial cluster shapes differ");
  const int m = static_cast<int>(fv.rows());

  TokenMatrix ff(2 * m, fv.cols());
  ff << fv, fs_proj;
  ff = nn::multi_head_self_attention(ff, params, prefix + ".attn", heads);
  ff = nn::feed_forward_block(ff, params, prefix + ".ffn");

  const TokenMatrix fv_msg = ff.topRows(m);
  const TokenMatrix fs_msg = ff.bottomRows(m);
  const TokenMatrix r1 =
      nn::context_norm_block(fv + fv_msg, params, prefix + ".r1");
  const TokenMatrix r2 =
      nn::context_norm_block(fs_proj + fs_msg, params, prefix + ".r2");
  return r1 + r2;
}

TokenMatrix soft_assign_unpool(const TokenMatrix& fvs, const TokenMatrix& fs,
                               const nn::ParamStore& params,
                               const std::string& prefix) {
  MatX scores = score_map(fs, params, prefix + ".unpool");  // N x M
  if (scores.cols() != fvs.rows())
    throw ConfigurationError("unpool: cluster count mismatch");
  // softmax over M, per correspondence row
  const VecX rowmax = scores.rowwise().maxCoeff();
  MatX u = (scores.colwise() - rowmax).array().exp();
  u.array().colwise() /= u.rowwise().sum().array();
  return fs + u * fvs;
}

}  // namespace vsf::fusion
