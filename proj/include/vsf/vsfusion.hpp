#pragma once

#include <string>

#include "vsf/nncore.hpp"

namespace vsf::fusion {

struct PoolResult {
  TokenMatrix fs_proj;  // M x C
  MatX assign;          // N x M, columns sum to 1
};

// Input-predicted soft assignment: column-softmax (over N) of a learned
// score map of fs; each cluster is a convex combination of correspondences.
PoolResult soft_assign_pool(const TokenMatrix& fs, const nn::ParamStore& params,
                            const std::string& prefix);

// Joint visual-spatial fusion in the shared M-token space: concatenate,
// self-attention + feed-forward, split, per-modality residual encoders, sum.
TokenMatrix fuse(const TokenMatrix& fv, const TokenMatrix& fs_proj,
                 const nn::ParamStore& params, const std::string& prefix,
                 int heads);

// Project joint cues back to correspondence space with a row-softmax map
// predicted from fs, added residually to fs.
TokenMatrix soft_assign_unpool(const TokenMatrix& fvs, const TokenMatrix& fs,
                               const nn::ParamStore& params,
                               const std::string& prefix);

}  // namespace vsf::fusion
