#include "vsf/vcextractor.hpp"

#include <cmath>

namespace vsf::vc {

namespace {

// 3x3 convolution, padding 1. Kernel tensor dims [out, in, 3, 3] with the
// matrix laid out out x (in*9).
Image conv3x3(const Image& x, const nn::Tensor& w, const nn::Tensor& b,
              int stride) {
  const int c_in = static_cast<int>(x.size());
  const int c_out = static_cast<int>(w.dims[0]);
  if (w.dims[1] != c_in)
    throw ConfigurationError("conv input channel mismatch");
  const int h = static_cast<int>(x[0].rows());
  const int wd = static_cast<int>(x[0].cols());
  const int ho = (h + stride - 1) / stride;
  const int wo = (wd + stride - 1) / stride;

  Image out(c_out, MatX::Zero(ho, wo));
  for (int oc = 0; oc < c_out; ++oc) {
    for (int ic = 0; ic < c_in; ++ic) {
      const MatX& plane = x[ic];
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = w.mat(oc, ic * 9 + ky * 3 + kx);
          if (wv == 0.0) continue;
          for (int i = 0; i < ho; ++i) {
            const int yi = i * stride + ky - 1;
            if (yi < 0 || yi >= h) continue;
            for (int j = 0; j < wo; ++j) {
              const int xj = j * stride + kx - 1;
              if (xj < 0 || xj >= wd) continue;
              out[oc](i, j) += wv * plane(yi, xj);
            }
          }
        }
      }
    }
    out[oc].array() += b.mat(oc, 0);
  }
  return out;
}

Image relu_image(Image x) {
  for (auto& p : x) p = p.cwiseMax(0.0);
  return x;
}

TokenMatrix flatten_tokens(const Image& x) {
  const int c = static_cast<int>(x.size());
  const int h = static_cast<int>(x[0].rows());
  const int w = static_cast<int>(x[0].cols());
  TokenMatrix t(h * w, c);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) t(i * w + j, ch) = x[ch](i, j);
  return t;
}

TokenMatrix backbone_single(const Image& img, const nn::ParamStore& params,
                            const nn::NetConfig& cfg) {
  Image f = relu_image(conv3x3(img, params.at("vc.backbone.stem0.w"),
                               params.at("vc.backbone.stem0.b"), 2));
  f = relu_image(conv3x3(f, params.at("vc.backbone.stem1.w"),
                         params.at("vc.backbone.stem1.b"), 2));
  for (int i = 0; i < cfg.backbone_blocks; ++i) {
    const std::string p = "vc.backbone.res" + std::to_string(i);
    Image h = relu_image(
        conv3x3(f, params.at(p + ".conv0.w"), params.at(p + ".conv0.b"), 1));
    h = conv3x3(h, params.at(p + ".conv1.w"), params.at(p + ".conv1.b"), 1);
    for (size_t c = 0; c < f.size(); ++c) h[c] += f[c];
    f = relu_image(std::move(h));
  }
  return flatten_tokens(f);
}

}  // namespace

ImagePair constant_image_pair(const nn::NetConfig& cfg, double value) {
  Image img(3, MatX::Constant(cfg.image_h, cfg.image_w, value));
  return {img, img};
}

FeatureMapPair backbone_forward(const ImagePair& img,
                                const nn::ParamStore& params,
                                const nn::NetConfig& cfg) {
  if (img.a.size() != 3 || img.b.size() != 3)
    throw ConfigurationError("images must have 3 channels");
  if (img.a[0].rows() != img.b[0].rows() || img.a[0].cols() != img.b[0].cols())
    throw ConfigurationError("image pair dimensions differ");
  if (img.a[0].rows() % 4 != 0 || img.a[0].cols() % 4 != 0)
    throw ConfigurationError("image dimensions must be divisible by 4");
  return {backbone_single(img.a, params, cfg),
          backbone_single(img.b, params, cfg)};
}

TokenMatrix extract_visual_cues(const FeatureMapPair& maps,
                                const nn::ParamStore& params,
                                const nn::NetConfig& cfg) {
  if (maps.fa.rows() != maps.fb.rows())
    throw ConfigurationError("feature map token counts differ");
  const TokenMatrix fa2 =
      nn::cross_attention(maps.fa, maps.fb, params, "vc.cross", cfg.heads);
  const TokenMatrix fb2 =
      nn::cross_attention(maps.fb, maps.fa, params, "vc.cross", cfg.heads);

  TokenMatrix cat(fa2.rows() + fb2.rows(), fa2.cols());
  cat << fa2, fb2;

  const int m = cfg.visual_tokens;
  if (cat.rows() % m != 0)
    throw ConfigurationError("visual_tokens must divide 2*(H/4)*(W/4) = " +
                             std::to_string(cat.rows()));
  const int window = static_cast<int>(cat.rows()) / m;
  TokenMatrix pooled(m, cat.cols());
  for (int i = 0; i < m; ++i)
    pooled.row(i) = cat.middleRows(i * window, window).colwise().mean();

  return nn::mlp_forward(pooled, params, "vc.mlp", 2);
}

TokenMatrix extract_spatial_cues(const CorrespondenceSet& ic,
                                 const nn::ParamStore& params,
                                 const std::string& prefix,
                                 const VecX* prev_weights) {
  const int n = ic.count();
  if (n < 1) throw MalformedInputError("empty correspondence set");
  const int in_dim = prev_weights ? 5 : 4;
  if (prev_weights && prev_weights->size() != n)
    throw ConfigurationError("inherited weight count mismatch");
  TokenMatrix x(n, in_dim);
  for (int i = 0; i < n; ++i) {
    const auto& c = ic.items[i];
    x(i, 0) = c.x;
    x(i, 1) = c.y;
    x(i, 2) = c.xp;
    x(i, 3) = c.yp;
    if (prev_weights) x(i, 4) = (*prev_weights)(i);
  }
  return nn::mlp_forward(x, params, prefix + ".spatial", 2);
}

}  // namespace vsf::vc
