#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rcmcl/data.hpp"
#include "rcmcl/mlp.hpp"

namespace rcmcl {

struct ModelDims {
  DataShape shape;
  int num_classes = 10;
  std::size_t feature_dim = 64;  // d_f, shared by all encoders
  std::size_t proj_dim = 32;     // d_h, shared by all projection heads
  std::vector<std::size_t> rgbd_hidden = {64};
  std::vector<std::size_t> skeleton_hidden = {64};
  std::vector<std::size_t> point_hidden = {};
  std::size_t head_hidden = 64;
  std::size_t decoder_hidden = 128;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Every learnable tensor of the model. graph_mix is fixed (not trained) but
// is carried here so checkpoints are self-contained.
struct ModelParams {
  ModelDims dims;
  Mlp enc_r, enc_s, enc_p;
  DenseMatrix graph_mix;  // J x J
  Mlp proj_r, proj_s, proj_p, proj_f;
  Mlp dec_s;
  DenseMatrix gate_w;  // 3 x d_f, one row per modality (R, S, P)
  DenseMatrix gate_b;  // 1 x 3
  DenseMatrix cls_w;   // d_f x K
  DenseMatrix cls_b;   // 1 x K

  Mlp& encoder(Modality m) noexcept;
  const Mlp& encoder(Modality m) const noexcept;
  Mlp& head(Modality m) noexcept;
  const Mlp& head(Modality m) const noexcept;
};

using NamedTensor = std::pair<std::string, DenseMatrix*>;
using ConstNamedTensor = std::pair<std::string, const DenseMatrix*>;

// Stable, dotted names ("enc_r.0.w", "gate.b", "cls.w", ...). graph_mix is
// listed only when include_fixed is set.
std::vector<NamedTensor> named_tensors(ModelParams& p, bool include_fixed = false);
std::vector<ConstNamedTensor> named_tensors(const ModelParams& p, bool include_fixed = false);

ModelParams init_params(const ModelDims& dims, std::uint64_t seed);
// Same structure with every tensor zeroed; used as a gradient accumulator.
ModelParams zeros_like(const ModelParams& p);
// Exact byte equality of every named tensor selected by `prefix` ("" = all).
bool tensors_equal(const ModelParams& a, const ModelParams& b, std::string_view prefix = "");

// ---------------------------------------------------------------------------
// Encoders. Each takes one sample per row in the flattened DataShape layout
// (any frame count that divides the row width, so temporal windows work) and
// returns N x d_f features.
//   rgbd:     per-frame MLP, mean over frames
//   skeleton: joints mixed by graph_mix per frame, flattened, MLP, mean over frames
//   points:   shared per-point MLP, max over the frame's points, mean over frames
// Max-pool ties go to the lowest point index in backward.

struct EncoderCache {
  Modality modality = Modality::kRgbd;
  std::size_t batch = 0;
  std::size_t frames = 0;
  MlpCache mlp;
  std::vector<std::size_t> argmax;  // points: winning row per (sample, frame, feature)
};

DenseMatrix encode(const ModelParams& p, Modality m, const DenseMatrix& block, EncoderCache* cache = nullptr);
void encode_backward(const ModelParams& p, const EncoderCache& cache, const DenseMatrix& dz, ModelParams& grads);

inline DenseMatrix encode_rgbd(const ModelParams& p, const DenseMatrix& x, EncoderCache* c = nullptr) {
  return encode(p, Modality::kRgbd, x, c);
}
inline DenseMatrix encode_skeleton(const ModelParams& p, const DenseMatrix& x, EncoderCache* c = nullptr) {
  return encode(p, Modality::kSkeleton, x, c);
}
inline DenseMatrix encode_points(const ModelParams& p, const DenseMatrix& x, EncoderCache* c = nullptr) {
  return encode(p, Modality::kPoints, x, c);
}

struct ProjectionCache {
  MlpCache mlp;
  RowNormalized norm;
};

inline constexpr double kNormEps = 1e-12;

// Head MLP followed by row L2 normalization. Rows whose pre-normalization
// norm is below kNormEps come out (near) zero; see degenerate_rows().
DenseMatrix project(const Mlp& head, const DenseMatrix& z, ProjectionCache* cache = nullptr);
DenseMatrix project_backward(const Mlp& head, const ProjectionCache& cache, const DenseMatrix& dh, Mlp& grads);
std::vector<bool> degenerate_rows(const ProjectionCache& cache);

// N x d_f -> N x (T*J*3).
DenseMatrix decode_skeleton(const Mlp& dec, const DenseMatrix& z, MlpCache* cache = nullptr);

}  // namespace rcmcl
