#pragma once

#include <vector>

#include "vsf/nncore.hpp"
#include "vsf/types.hpp"

namespace vsf::vc {

// One image as per-channel intensity planes in [0, 1].
using Image = std::vector<MatX>;  // 3 planes, each H x W

struct ImagePair {
  Image a, b;
};

struct FeatureMapPair {
  TokenMatrix fa, fb;  // (H/4 * W/4) x C_F, row-major spatial order
};

// Shared-weight residual convolutional stack with total stride 4, flattened
// to tokens.
FeatureMapPair backbone_forward(const ImagePair& img,
                                const nn::ParamStore& params,
                                const nn::NetConfig& cfg);

// Bidirectional cross attention between the two views' feature maps,
// token-axis window averaging down to M tokens, MLP lift C_F -> C.
TokenMatrix extract_visual_cues(const FeatureMapPair& maps,
                                const nn::ParamStore& params,
                                const nn::NetConfig& cfg);

// Per-correspondence MLP on (x, y, x', y') -- plus the inherited weight
// channel on iterations after the first.
TokenMatrix extract_spatial_cues(const CorrespondenceSet& ic,
                                 const nn::ParamStore& params,
                                 const std::string& prefix,
                                 const VecX* prev_weights = nullptr);

// Uniform gray test image of the configured size.
ImagePair constant_image_pair(const nn::NetConfig& cfg, double value = 0.5);

}  // namespace vsf::vc
