#pragma once

// Shared helpers for building ad-hoc parameter stores and permutations in the
// unit tests.

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "vsf/nncore.hpp"
#include "vsf/rng.hpp"
#include "vsf/types.hpp"

namespace vsf::test {

inline nn::Tensor tensor2(const MatX& m) {
  nn::Tensor t;
  t.dims = {m.rows(), m.cols()};
  t.mat = m;
  return t;
}

inline nn::Tensor tensor1(const VecX& v) {
  nn::Tensor t;
  t.dims = {v.size()};
  t.mat = v;
  return t;
}

// Incremental builder around the immutable ParamStore.
class StoreBuilder {
 public:
  explicit StoreBuilder(uint64_t seed = 0) : rng_(seed) {}

  StoreBuilder& set(const std::string& name, const MatX& m) {
    entries_[name] = tensor2(m);
    return *this;
  }
  StoreBuilder& set(const std::string& name, const VecX& v) {
    entries_[name] = tensor1(v);
    return *this;
  }

  MatX random_mat(int rows, int cols, double scale = 0.3) {
    MatX m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = rng_.uniform(-scale, scale);
    return m;
  }

  // "<prefix>.w<idx>" (in x out) and zero bias unless randomize_bias.
  StoreBuilder& linear(const std::string& prefix, int in, int out, int idx,
                       bool random = true) {
    set(prefix + ".w" + std::to_string(idx),
        random ? random_mat(in, out) : MatX::Zero(in, out));
    set(prefix + ".b" + std::to_string(idx),
        random ? VecX(random_mat(out, 1)) : VecX(VecX::Zero(out)));
    return *this;
  }

  // single-map linear used via nn::linear: "<prefix>.w"/".b"
  StoreBuilder& flat_linear(const std::string& prefix, int in, int out,
                            bool random = true) {
    set(prefix + ".w", random ? random_mat(in, out) : MatX::Zero(in, out));
    set(prefix + ".b", random ? VecX(random_mat(out, 1)) : VecX(VecX::Zero(out)));
    return *this;
  }

  StoreBuilder& attention(const std::string& prefix, int width,
                          bool random = true) {
    for (const char* n : {".wq", ".wk", ".wv", ".wo"})
      set(prefix + n, random ? random_mat(width, width) : MatX::Zero(width, width));
    return *this;
  }

  StoreBuilder& ffn(const std::string& prefix, int width, int ratio = 2,
                    bool random = true) {
    const int hidden = width * ratio;
    set(prefix + ".w1", random ? random_mat(width, hidden) : MatX::Zero(width, hidden));
    set(prefix + ".b1", random ? VecX(random_mat(hidden, 1)) : VecX(VecX::Zero(hidden)));
    set(prefix + ".w2", random ? random_mat(hidden, width) : MatX::Zero(hidden, width));
    set(prefix + ".b2", random ? VecX(random_mat(width, 1)) : VecX(VecX::Zero(width)));
    return *this;
  }

  StoreBuilder& context_norm(const std::string& prefix, int width,
                             bool random = true) {
    linear(prefix, width, width, 0, random);
    linear(prefix, width, width, 1, random);
    return *this;
  }

  nn::ParamStore build(uint64_t config_hash = 0) const {
    return nn::ParamStore(entries_, config_hash);
  }

 private:
  Rng rng_;
  std::map<std::string, nn::Tensor> entries_;
};

inline std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

inline TokenMatrix permute_rows(const TokenMatrix& x,
                                const std::vector<int>& p) {
  TokenMatrix out(x.rows(), x.cols());
  for (int i = 0; i < static_cast<int>(p.size()); ++i) out.row(i) = x.row(p[i]);
  return out;
}

inline CorrespondenceSet permute_items(const CorrespondenceSet& ic,
                                       const std::vector<int>& p) {
  CorrespondenceSet out;
  for (int i : p) out.items.push_back(ic.items[i]);
  if (ic.has_labels())
    for (int i : p) out.labels.push_back(ic.labels[i]);
  return out;
}

inline TokenMatrix random_tokens(int rows, int cols, uint64_t seed,
                                 double scale = 1.0) {
  Rng rng(seed);
  TokenMatrix x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = rng.uniform(-scale, scale);
  return x;
}

}  // namespace vsf::test
