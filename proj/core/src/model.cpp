#include "rcmcl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rcmcl/error.hpp"

namespace rcmcl {

void ModelDims::validate() const {
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (feature_dim < 1 || proj_dim < 1 || head_hidden < 1 || decoder_hidden < 1) {
    throw ConfigError("model: dimensions must be positive");
  }
  if (shape.frames < 1 || shape.joints < 1 || shape.points < 1 || shape.rgbd_dim < 1) {
    throw ConfigError("model: data shape must be positive");
  }
}

Mlp& ModelParams::encoder(Modality m) noexcept {
  switch (m) {
    case Modality::kRgbd: return enc_r;
    case Modality::kSkeleton: return enc_s;
    case Modality::kPoints: break;
  }
  return enc_p;
}

const Mlp& ModelParams::encoder(Modality m) const noexcept { return const_cast<ModelParams*>(this)->encoder(m); }

Mlp& ModelParams::head(Modality m) noexcept {
  switch (m) {
    case Modality::kRgbd: return proj_r;
    case Modality::kSkeleton: return proj_s;
    case Modality::kPoints: break;
  }
  return proj_p;
}

const Mlp& ModelParams::head(Modality m) const noexcept { return const_cast<ModelParams*>(this)->head(m); }

namespace {

template <class P, class Out>
void collect(P& p, bool include_fixed, Out& out) {
  auto add_mlp = [&](const std::string& name, auto& mlp) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      out.emplace_back(name + "." + std::to_string(i) + ".w", &mlp.layers[i].w);
      out.emplace_back(name + "." + std::to_string(i) + ".b", &mlp.layers[i].b);
    }
  };
  add_mlp("enc_r", p.enc_r);
  add_mlp("enc_s", p.enc_s);
  add_mlp("enc_p", p.enc_p);
  if (include_fixed) out.emplace_back("graph_mix", &p.graph_mix);
  add_mlp("proj_r", p.proj_r);
  add_mlp("proj_s", p.proj_s);
  add_mlp("proj_p", p.proj_p);
  add_mlp("proj_f", p.proj_f);
  add_mlp("dec_s", p.dec_s);
  out.emplace_back("gate.w", &p.gate_w);
  out.emplace_back("gate.b", &p.gate_b);
  out.emplace_back("cls.w", &p.cls_w);
  out.emplace_back("cls.b", &p.cls_b);
}

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

}  // namespace

std::vector<NamedTensor> named_tensors(ModelParams& p, bool include_fixed) {
  std::vector<NamedTensor> out;
  collect(p, include_fixed, out);
  return out;
}

std::vector<ConstNamedTensor> named_tensors(const ModelParams& p, bool include_fixed) {
  std::vector<ConstNamedTensor> out;
  collect(p, include_fixed, out);
  return out;
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  const SplitRng root = SplitRng(seed).child("init");
  const DataShape& s = dims.shape;
  const std::size_t df = dims.feature_dim, dh = dims.proj_dim;
  ModelParams p;
  p.dims = dims;

  auto mlp = [&](std::string_view name, const std::vector<std::size_t>& d, Activation last) {
    SplitRng rng = root.child(name);
    return make_mlp(d, Activation::kRelu, last, rng);
  };
  p.enc_r = mlp("enc_r", chain(s.rgbd_dim, dims.rgbd_hidden, df), Activation::kRelu);
  p.enc_s = mlp("enc_s", chain(s.joints * 3, dims.skeleton_hidden, df), Activation::kRelu);
  p.enc_p = mlp("enc_p", chain(3, dims.point_hidden, df), Activation::kRelu);
  p.graph_mix = chain_graph_mix(s.joints);
  p.proj_r = mlp("proj_r", {df, dims.head_hidden, dh}, Activation::kNone);
  p.proj_s = mlp("proj_s", {df, dims.head_hidden, dh}, Activation::kNone);
  p.proj_p = mlp("proj_p", {df, dims.head_hidden, dh}, Activation::kNone);
  p.proj_f = mlp("proj_f", {df, dims.head_hidden, dh}, Activation::kNone);
  p.dec_s = mlp("dec_s", {df, dims.decoder_hidden, s.skeleton_width()}, Activation::kNone);

  SplitRng gate_rng = root.child("gate");
  p.gate_w = DenseMatrix(kNumModalities, df);
  const double gate_std = std::sqrt(1.0 / static_cast<double>(df));
  for (double& v : p.gate_w.values()) v = gate_rng.normal(0.0, gate_std);
  p.gate_b = DenseMatrix(1, kNumModalities, 1.0);

  SplitRng cls_rng = root.child("cls");
  const auto k = static_cast<std::size_t>(dims.num_classes);
  p.cls_w = DenseMatrix(df, k);
  for (double& v : p.cls_w.values()) v = cls_rng.normal(0.0, gate_std);
  p.cls_b = DenseMatrix(1, k);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& [name, t] : named_tensors(z, true)) t->fill(0.0);
  return z;
}

bool tensors_equal(const ModelParams& a, const ModelParams& b, std::string_view prefix) {
  auto ta = named_tensors(a, true);
  auto tb = named_tensors(b, true);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].first != tb[i].first) return false;
    if (!ta[i].first.starts_with(prefix)) continue;
    const DenseMatrix& x = *ta[i].second;
    const DenseMatrix& y = *tb[i].second;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (x.size() > 0 && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

namespace {

std::size_t frames_of(const ModelParams& p, Modality m, const DenseMatrix& block) {
  const std::size_t fw = p.dims.shape.frame_width(m);
  if (block.cols() == 0 || block.cols() % fw != 0) {
    throw ShapeError(std::string("encode ") + std::string(modality_name(m)) + ": row width " +
                     std::to_string(block.cols()) + " is not a multiple of frame width " + std::to_string(fw));
  }
  return block.cols() / fw;
}

// x'_t = A x_t with joints as rows of the J x 3 frame.
DenseMatrix mix_joints(const DenseMatrix& frames, const DenseMatrix& a) {
  const std::size_t j_count = a.rows();
  DenseMatrix out(frames.rows(), frames.cols());
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    const double* in = frames.data() + r * frames.cols();
    double* o = out.data() + r * frames.cols();
    for (std::size_t j = 0; j < j_count; ++j)
      for (std::size_t i = 0; i < j_count; ++i) {
        const double w = a(j, i);
        if (w == 0.0) continue;
        for (std::size_t c = 0; c < 3; ++c) o[j * 3 + c] += w * in[i * 3 + c];
      }
  }
  return out;
}

}  // namespace

DenseMatrix encode(const ModelParams& p, Modality m, const DenseMatrix& block, EncoderCache* cache) {
  const std::size_t n = block.rows();
  const std::size_t frames = frames_of(p, m, block);
  const std::size_t fw = p.dims.shape.frame_width(m);
  const Mlp& mlp = p.encoder(m);
  MlpCache local;
  MlpCache* mc = cache ? &cache->mlp : nullptr;
  if (cache) {
    cache->modality = m;
    cache->batch = n;
    cache->frames = frames;
    cache->argmax.clear();
  }

  if (m != Modality::kPoints) {
    DenseMatrix per_frame = block.reshaped(n * frames, fw);
    if (m == Modality::kSkeleton) per_frame = mix_joints(per_frame, p.graph_mix);
    DenseMatrix h = mlp_forward(mlp, per_frame, mc);
    return group_mean_rows(h, frames);
  }

  const std::size_t pts = fw / 3;
  DenseMatrix h = mlp_forward(mlp, block.reshaped(n * frames * pts, 3), mc);
  const std::size_t d = h.cols();
  DenseMatrix pooled(n * frames, d);
  if (cache) cache->argmax.assign(n * frames * d, 0);
  for (std::size_t g = 0; g < n * frames; ++g) {
    double* out = pooled.data() + g * d;
    const std::size_t base = g * pts;
    for (std::size_t c = 0; c < d; ++c) out[c] = h(base, c);
    std::vector<std::size_t> best(d, base);
    for (std::size_t q = 1; q < pts; ++q) {
      const double* row = h.data() + (base + q) * d;
      for (std::size_t c = 0; c < d; ++c)
        if (row[c] > out[c]) {
          out[c] = row[c];
          best[c] = base + q;
        }
    }
    if (cache) std::copy(best.begin(), best.end(), cache->argmax.begin() + static_cast<std::ptrdiff_t>(g * d));
  }
  return group_mean_rows(pooled, frames);
}

void encode_backward(const ModelParams& p, const EncoderCache& cache, const DenseMatrix& dz, ModelParams& grads) {
  if (dz.rows() != cache.batch) throw ShapeError("encode_backward: gradient rows do not match cached batch");
  const Mlp& mlp = p.encoder(cache.modality);
  Mlp& g = grads.encoder(cache.modality);
  DenseMatrix dframes = group_mean_rows_backward(dz, cache.frames);
  if (cache.modality != Modality::kPoints) {
    mlp_backward(mlp, cache.mlp, dframes, g, false);
    return;
  }
  const std::size_t d = dz.cols();
  const std::size_t rows = cache.mlp.outputs.back().rows();
  DenseMatrix dh(rows, d);
  for (std::size_t gi = 0; gi < dframes.rows(); ++gi)
    for (std::size_t c = 0; c < d; ++c) dh(cache.argmax[gi * d + c], c) += dframes(gi, c);
  mlp_backward(mlp, cache.mlp, dh, g, false);
}

DenseMatrix project(const Mlp& head, const DenseMatrix& z, ProjectionCache* cache) {
  DenseMatrix pre = mlp_forward(head, z, cache ? &cache->mlp : nullptr);
  RowNormalized n = l2_normalize_rows(pre, kNormEps);
  DenseMatrix h = n.y;
  if (cache) cache->norm = std::move(n);
  return h;
}

DenseMatrix project_backward(const Mlp& head, const ProjectionCache& cache, const DenseMatrix& dh, Mlp& grads) {
  DenseMatrix dpre = l2_normalize_rows_backward(dh, cache.norm, kNormEps);
  return mlp_backward(head, cache.mlp, dpre, grads, true);
}

std::vector<bool> degenerate_rows(const ProjectionCache& cache) {
  std::vector<bool> out(cache.norm.norms.rows());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = !(cache.norm.norms[r] > kNormEps);
  return out;
}

DenseMatrix decode_skeleton(const Mlp& dec, const DenseMatrix& z, MlpCache* cache) {
  return mlp_forward(dec, z, cache);
}

}  // namespace rcmcl
