#include "vsf/nncore.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vsf/rng.hpp"

namespace vsf::nn {

void NetConfig::validate() const {
  if (channels <= 0 || heads <= 0 || channels % heads != 0)
    throw ConfigurationError("channels must be a positive multiple of heads");
  if (backbone_channels % heads != 0)
    throw ConfigurationError("backbone_channels must be a multiple of heads");
  if (!(prune_ratio > 0.0 && prune_ratio < 1.0))
    throw ConfigurationError("prune_ratio must be in (0, 1)");
  if (iterations < 1) throw ConfigurationError("iterations must be >= 1");
  if (static_cast<int>(knn.size()) != iterations)
    throw ConfigurationError("need one neighbor count per iteration");
  for (int k : knn) {
    if (k < 1) throw ConfigurationError("neighbor counts must be >= 1");
  }
  if (visual_tokens < 1) throw ConfigurationError("visual_tokens must be >= 1");
  if (image_h % 4 != 0 || image_w % 4 != 0)
    throw ConfigurationError("image dimensions must be divisible by 4");
  if (ffn_ratio < 1) throw ConfigurationError("ffn_ratio must be >= 1");
  if (backbone_blocks < 0) throw ConfigurationError("backbone_blocks must be >= 0");
}

uint64_t NetConfig::hash() const {
  std::ostringstream os;
  os << "C=" << channels << ";h=" << heads << ";M=" << visual_tokens
     << ";N=" << n_correspondences << ";L=" << iterations << ";r=" << prune_ratio
     << ";k=";
  for (int k : knn) os << k << ",";
  os << ";CF=" << backbone_channels << ";B=" << backbone_blocks
     << ";H=" << image_h << ";W=" << image_w << ";ab=" << attention_bias
     << ";fr=" << ffn_ratio << ";ff=" << fuse_final_iteration_only;
  const std::string s = os.str();
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw ConfigurationError("missing parameter: " + name);
  return it->second;
}

// ---------------------------------------------------------------------------
// Parameter inventory

namespace {

struct Spec {
  std::string name;
  std::vector<int64_t> dims;
};

void add_linear(std::vector<Spec>& v, const std::string& prefix, int64_t in,
                int64_t out, int layer_index) {
  const std::string i = std::to_string(layer_index);
  v.push_back({prefix + ".w" + i, {in, out}});
  v.push_back({prefix + ".b" + i, {out}});
}

void add_attention(std::vector<Spec>& v, const std::string& prefix,
                   int64_t width) {
  for (const char* n : {".wq", ".wk", ".wv", ".wo"})
    v.push_back({prefix + n, {width, width}});
}

void add_context_norm(std::vector<Spec>& v, const std::string& prefix,
                      int64_t width) {
  add_linear(v, prefix, width, width, 0);
  add_linear(v, prefix, width, width, 1);
}

void add_ffn(std::vector<Spec>& v, const std::string& prefix, int64_t width,
             int ratio) {
  v.push_back({prefix + ".w1", {width, width * ratio}});
  v.push_back({prefix + ".b1", {width * ratio}});
  v.push_back({prefix + ".w2", {width * ratio, width}});
  v.push_back({prefix + ".b2", {width}});
}

std::vector<Spec> parameter_inventory(const NetConfig& cfg) {
  std::vector<Spec> v;
  const int64_t c = cfg.channels;
  const int64_t cf = cfg.backbone_channels;
  const int64_t m = cfg.visual_tokens;

  // visual branch
  v.push_back({"vc.backbone.stem0.w", {cf / 2, 3, 3, 3}});
  v.push_back({"vc.backbone.stem0.b", {cf / 2}});
  v.push_back({"vc.backbone.stem1.w", {cf, cf / 2, 3, 3}});
  v.push_back({"vc.backbone.stem1.b", {cf}});
  for (int i = 0; i < cfg.backbone_blocks; ++i) {
    const std::string p = "vc.backbone.res" + std::to_string(i);
    v.push_back({p + ".conv0.w", {cf, cf, 3, 3}});
    v.push_back({p + ".conv0.b", {cf}});
    v.push_back({p + ".conv1.w", {cf, cf, 3, 3}});
    v.push_back({p + ".conv1.b", {cf}});
  }
  add_attention(v, "vc.cross", cf);
  add_linear(v, "vc.mlp", cf, c, 0);
  add_linear(v, "vc.mlp", c, c, 1);

  for (int t = 1; t <= cfg.iterations; ++t) {
    const std::string p = "iter" + std::to_string(t);
    const int64_t in_dim = t == 1 ? 4 : 5;  // inherited logit channel at t > 1
    add_linear(v, p + ".spatial", in_dim, c, 0);
    add_linear(v, p + ".spatial", c, c, 1);

    const bool fusion_here =
        !cfg.fuse_final_iteration_only || t == cfg.iterations;
    if (fusion_here) {
      v.push_back({p + ".fusion.pool.w", {c, m}});
      v.push_back({p + ".fusion.pool.b", {m}});
      v.push_back({p + ".fusion.unpool.w", {c, m}});
      v.push_back({p + ".fusion.unpool.b", {m}});
      add_attention(v, p + ".fusion.attn", c);
      add_ffn(v, p + ".fusion.ffn", c, cfg.ffn_ratio);
      add_context_norm(v, p + ".fusion.r1", c);
      add_context_norm(v, p + ".fusion.r2", c);
    }

    const int64_t k = cfg.knn[t - 1];
    add_context_norm(v, p + ".ctx.gab.pointcn", 2 * c);
    add_linear(v, p + ".ctx.gab.channel", 2 * c, std::max<int64_t>(1, c / 2), 0);
    add_linear(v, p + ".ctx.gab.channel", std::max<int64_t>(1, c / 2), 2 * c, 1);
    add_linear(v, p + ".ctx.gab.spatial", 1, 8, 0);
    add_linear(v, p + ".ctx.gab.spatial", 8, 1, 1);
    add_linear(v, p + ".ctx.gab.neigh", k, k, 0);
    add_linear(v, p + ".ctx.gab.neigh", k, k, 1);
    add_linear(v, p + ".ctx.agg", 2 * c, c, 0);
    add_attention(v, p + ".ctx.attn", c);
    add_ffn(v, p + ".ctx.ffn", c, cfg.ffn_ratio);
    v.push_back({p + ".ctx.compress.w", {2 * c, c}});
    v.push_back({p + ".ctx.compress.b", {c}});

    add_context_norm(v, p + ".pred.cn0", c);
    add_context_norm(v, p + ".pred.cn1", c);
    v.push_back({p + ".pred.out.w", {c, 1}});
    v.push_back({p + ".pred.out.b", {1}});
  }
  return v;
}

}  // namespace

ParamStore init_params(const NetConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::map<std::string, Tensor> entries;
  for (const auto& spec : parameter_inventory(cfg)) {
    Tensor t;
    t.dims = spec.dims;
    const int64_t rows = spec.dims[0];
    const int64_t cols = t.numel() / rows;
    t.mat = MatX::Zero(rows, cols);
    if (spec.dims.size() >= 2) {
      // fan-in: input width for linear weights, in*kh*kw for conv kernels
      const int64_t fan_in = spec.dims.size() == 2 ? spec.dims[0] : cols;
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j)
          t.mat(i, j) = rng.uniform(-bound, bound);
    }
    entries.emplace(spec.name, std::move(t));
  }
  return ParamStore(std::move(entries), cfg.hash());
}

// ---------------------------------------------------------------------------
// Weight file I/O

namespace {

constexpr char kMagic[4] = {'V', 'S', 'P', 'W'};
constexpr uint16_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is)
    throw DataError(std::string("weight file truncated reading ") + what +
                    " at offset " + std::to_string(is.tellg()));
  return v;
}

}  // namespace

void save_params(const ParamStore& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, params.config_hash());
  write_pod(os, static_cast<uint32_t>(params.entries().size()));
  for (const auto& [name, t] : params.entries()) {
    write_pod(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), name.size());
    write_pod(os, static_cast<uint32_t>(t.dims.size()));
    for (int64_t d : t.dims) write_pod(os, d);
    for (int64_t i = 0; i < t.mat.rows(); ++i)
      for (int64_t j = 0; j < t.mat.cols(); ++j)
        write_pod(os, static_cast<float>(t.mat(i, j)));
  }
  if (!os) throw DataError("write failed: " + path);
}

ParamStore load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad magic in weight file " + path + " at offset 0");
  const uint16_t version = read_pod<uint16_t>(is, "version");
  if (version != kVersion)
    throw DataError("unsupported weight format version " +
                    std::to_string(version) + " at offset 4");
  const uint64_t hash = read_pod<uint64_t>(is, "config hash");
  const uint32_t count = read_pod<uint32_t>(is, "entry count");
  std::map<std::string, Tensor> entries;
  for (uint32_t e = 0; e < count; ++e) {
    const uint32_t name_len = read_pod<uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw DataError("weight file truncated reading name");
    const uint32_t rank = read_pod<uint32_t>(is, "rank");
    if (rank == 0 || rank > 8) throw DataError("invalid tensor rank in " + name);
    Tensor t;
    for (uint32_t d = 0; d < rank; ++d)
      t.dims.push_back(read_pod<int64_t>(is, "dims"));
    const int64_t rows = t.dims[0];
    const int64_t cols = t.numel() / rows;
    t.mat.resize(rows, cols);
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j) {
        const float v = read_pod<float>(is, "payload");
        if (!std::isfinite(v)) throw DataError("non-finite value in " + name);
        t.mat(i, j) = v;
      }
    if (!entries.emplace(std::move(name), std::move(t)).second)
      throw DataError("duplicate tensor name in weight file");
  }
  return ParamStore(std::move(entries), hash);
}

// ---------------------------------------------------------------------------
// Forward primitives

TokenMatrix relu(TokenMatrix x) { return x.cwiseMax(0.0); }

TokenMatrix linear(const TokenMatrix& x, const ParamStore& params,
                   const std::string& prefix) {
  const Tensor& w = params.at(prefix + ".w");
  const Tensor& b = params.at(prefix + ".b");
  if (x.cols() != w.mat.rows())
    throw ConfigurationError("shape mismatch at " + prefix + ": input width " +
                             std::to_string(x.cols()) + " vs " +
                             std::to_string(w.mat.rows()));
  return (x * w.mat).rowwise() + b.mat.reshaped().transpose();
}

TokenMatrix mlp_forward(const TokenMatrix& x, const ParamStore& params,
                        const std::string& prefix, int n_layers) {
  TokenMatrix h = x;
  for (int i = 0; i < n_layers; ++i) {
    const std::string idx = std::to_string(i);
    const Tensor& w = params.at(prefix + ".w" + idx);
    const Tensor& b = params.at(prefix + ".b" + idx);
    if (h.cols() != w.mat.rows())
      throw ConfigurationError("shape mismatch at " + prefix + ".w" + idx +
                               ": input width " + std::to_string(h.cols()) +
                               " vs " + std::to_string(w.mat.rows()));
    h = (h * w.mat).rowwise() + b.mat.reshaped().transpose();
    if (i + 1 < n_layers) h = relu(std::move(h));
  }
  return h;
}

TokenMatrix context_normalize(const TokenMatrix& x, double eps) {
  if (x.rows() < 2)
    throw DegenerateConfigurationError("context normalization needs >= 2 tokens");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  TokenMatrix centered = x.rowwise() - mean;
  const Eigen::RowVectorXd var =
      centered.array().square().colwise().mean();
  return centered.array().rowwise() / (var.array() + eps).sqrt();
}

TokenMatrix context_norm_block(const TokenMatrix& x, const ParamStore& params,
                               const std::string& prefix) {
  TokenMatrix h = context_normalize(x);
  h = mlp_forward(h, params, prefix, 2);
  return x + h;
}

namespace {

TokenMatrix attention_core(const TokenMatrix& q_src, const TokenMatrix& kv_src,
                           const ParamStore& params, const std::string& prefix,
                           int heads, const MatX* gate,
                           AttentionDiagnostics* diag) {
  const int width = static_cast<int>(q_src.cols());
  if (kv_src.cols() != width)
    throw ConfigurationError("attention width mismatch at " + prefix);
  if (width % heads != 0)
    throw ConfigurationError("attention width not divisible by head count");
  const int d = width / heads;
  const TokenMatrix q = q_src * params.at(prefix + ".wq").mat;
  const TokenMatrix k = kv_src * params.at(prefix + ".wk").mat;
  const TokenMatrix v = kv_src * params.at(prefix + ".wv").mat;
  if (gate && (gate->rows() != q_src.rows() || gate->cols() != kv_src.rows()))
    throw ConfigurationError("attention gate shape mismatch at " + prefix);

  TokenMatrix out(q_src.rows(), width);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * d, d);
    const auto kh = k.middleCols(h * d, d);
    const auto vh = v.middleCols(h * d, d);
    MatX logits = (qh * kh.transpose()) * scale;
    // row-stable softmax
    const VecX rowmax = logits.rowwise().maxCoeff();
    MatX a = (logits.colwise() - rowmax).array().exp();
    a.array().colwise() /= a.rowwise().sum().array();
    if (gate) {
      MatX gated = a.cwiseProduct(*gate);
      for (int i = 0; i < gated.rows(); ++i) {
        const double s = gated.row(i).sum();
        if (s < 1e-9) {
          // fully suppressed row; keep the ungated distribution
          if (diag) ++diag->zero_gate_rows;
        } else {
          a.row(i) = gated.row(i) / s;
        }
      }
    }
    out.middleCols(h * d, d) = a * vh;
  }
  return out * params.at(prefix + ".wo").mat;
}

}  // namespace

TokenMatrix multi_head_self_attention(const TokenMatrix& x,
                                      const ParamStore& params,
                                      const std::string& prefix, int heads,
                                      const MatX* gate,
                                      AttentionDiagnostics* diag) {
  return attention_core(x, x, params, prefix, heads, gate, diag);
}

TokenMatrix cross_attention(const TokenMatrix& qx, const TokenMatrix& kvx,
                            const ParamStore& params, const std::string& prefix,
                            int heads) {
  return attention_core(qx, kvx, params, prefix, heads, nullptr, nullptr);
}

TokenMatrix feed_forward_block(const TokenMatrix& x, const ParamStore& params,
                               const std::string& prefix) {
  // pre-normalization: token-wise standardization over channels
  const VecX mean = x.rowwise().mean();
  TokenMatrix normed = x.colwise() - mean;
  const VecX var = normed.array().square().rowwise().mean();
  normed.array().colwise() /= (var.array() + 1e-5).sqrt();

  const Tensor& w1 = params.at(prefix + ".w1");
  const Tensor& b1 = params.at(prefix + ".b1");
  const Tensor& w2 = params.at(prefix + ".w2");
  const Tensor& b2 = params.at(prefix + ".b2");
  if (normed.cols() != w1.mat.rows())
    throw ConfigurationError("shape mismatch at " + prefix + ".w1");
  TokenMatrix h =
      relu((normed * w1.mat).rowwise() + b1.mat.reshaped().transpose());
  return x + ((h * w2.mat).rowwise() + b2.mat.reshaped().transpose());
}

}  // namespace vsf::nn
