#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rcmcl/data.hpp"
#include "rcmcl/gradcheck.hpp"
#include "rcmcl/model.hpp"

namespace fixture {

using namespace rcmcl;

// Tiny model so finite differences over every parameter stay cheap.
inline ModelDims tiny_dims() {
  ModelDims d;
  d.shape = {3, 3, 4, 5};
  d.num_classes = 3;
  d.feature_dim = 6;
  d.proj_dim = 8;
  d.rgbd_hidden = {7};
  d.skeleton_hidden = {5};
  d.point_hidden = {4};
  d.head_hidden = 6;
  d.decoder_hidden = 5;
  return d;
}

inline ModalBatch random_batch(const DataShape& shape, std::size_t n, SplitRng& rng) {
  ModalBatch b;
  b.shape = shape;
  for (Modality m : kModalities) b.block(m) = oracle::random_matrix(n, shape.width(m), rng);
  for (std::size_t i = 0; i < n; ++i) b.ids.push_back(100 + i);
  b.availability.assign(n, kAllAvailable);
  return b;
}

// Zero-initialized biases put dead ReLU rows exactly on the kink, where
// central differences see half a slope. Gradient checks run at generic
// points instead.
inline void randomize_biases(ModelParams& p, SplitRng& rng, double scale = 0.1) {
  for (auto& [name, t] : named_tensors(p)) {
    if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0)
      for (double& v : t->values()) v += scale * rng.normal();
  }
}

inline ModelParams generic_params(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p = init_params(dims, seed);
  SplitRng rng = SplitRng(seed).child("bias-jitter");
  randomize_biases(p, rng);
  return p;
}

struct GradReport {
  double worst = 0.0;
  std::string worst_name;
};

// Compares analytic gradients in `grads` against central differences of
// `loss` for every trainable tensor whose name starts with one of `prefixes`
// (all when empty).
inline GradReport check_model_gradients(ModelParams& p, const ModelParams& grads, const std::function<double()>& loss,
                                        const std::vector<std::string>& prefixes = {}) {
  GradReport rep;
  auto pt = named_tensors(p);
  auto gt = named_tensors(grads);
  for (std::size_t i = 0; i < pt.size(); ++i) {
    const std::string& name = pt[i].first;
    if (!prefixes.empty() &&
        std::none_of(prefixes.begin(), prefixes.end(), [&](const std::string& s) { return name.rfind(s, 0) == 0; })) {
      continue;
    }
    const double err = check_param_gradient(*pt[i].second, *gt[i].second, loss);
    if (err > rep.worst) {
      rep.worst = err;
      rep.worst_name = name;
    }
  }
  return rep;
}

}  // namespace fixture
