#include "rcmcl/mlp.hpp"

#include <cmath>
#include <string>

#include "rcmcl/error.hpp"

namespace rcmcl {

std::size_t Mlp::in_dim() const {
  if (layers.empty()) throw ShapeError("empty MLP");
  return layers.front().w.rows();
}

std::size_t Mlp::out_dim() const {
  if (layers.empty()) throw ShapeError("empty MLP");
  return layers.back().w.cols();
}

void Mlp::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.b.rows() != 1 || l.b.cols() != l.w.cols()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias " + l.b.shape_string() + " vs weight " + l.w.shape_string());
    }
    if (i > 0 && layers[i - 1].w.cols() != l.w.rows()) {
      throw ShapeError("layer " + std::to_string(i) + " input " + std::to_string(l.w.rows()) +
                       " does not chain from " + std::to_string(layers[i - 1].w.cols()));
    }
  }
}

DenseMatrix mlp_forward(const Mlp& mlp, const DenseMatrix& x, MlpCache* cache) {
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  DenseMatrix h = x;
  for (const auto& layer : mlp.layers) {
    if (h.cols() != layer.w.rows()) {
      throw ShapeError("mlp_forward: input " + h.shape_string() + " vs weight " + layer.w.shape_string());
    }
    DenseMatrix y = affine_forward(h, layer.w, layer.b);
    activate_inplace(y, layer.act);
    if (cache) cache->inputs.push_back(std::move(h));
    h = std::move(y);
    if (cache) cache->outputs.push_back(h);
  }
  return h;
}

DenseMatrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const DenseMatrix& dy, Mlp& grads, bool need_dx) {
  if (cache.inputs.size() != mlp.layers.size()) throw ShapeError("mlp_backward: cache does not match network");
  DenseMatrix g = dy;
  for (std::size_t i = mlp.layers.size(); i-- > 0;) {
    const auto& layer = mlp.layers[i];
    DenseMatrix dpre = activation_backward(g, cache.outputs[i], layer.act);
    const bool want_dx = need_dx || i > 0;
    AffineGrads ag = affine_backward(dpre, cache.inputs[i], layer.w, want_dx);
    add_inplace(grads.layers[i].w, ag.dw);
    add_inplace(grads.layers[i].b, ag.db);
    g = std::move(ag.dx);
  }
  return need_dx ? g : DenseMatrix{};
}

Mlp zeros_like(const Mlp& mlp) {
  Mlp z;
  for (const auto& l : mlp.layers) {
    z.layers.push_back({DenseMatrix(l.w.rows(), l.w.cols()), DenseMatrix(l.b.rows(), l.b.cols()), l.act});
  }
  return z;
}

Mlp make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation last, SplitRng& rng) {
  if (dims.size() < 2) throw ShapeError("make_mlp: need at least input and output dims");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const Activation act = (i + 2 == dims.size()) ? last : hidden;
    const double fan_in = static_cast<double>(dims[i]);
    const double stddev = std::sqrt((act == Activation::kRelu ? 2.0 : 1.0) / fan_in);
    DenseLayer layer{DenseMatrix(dims[i], dims[i + 1]), DenseMatrix(1, dims[i + 1]), act};
    for (double& v : layer.w.values()) v = rng.normal(0.0, stddev);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace rcmcl
