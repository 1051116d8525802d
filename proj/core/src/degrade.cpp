#include "rcmcl/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rcmcl/error.hpp"

namespace rcmcl {

DegradationSpec DegradationSpec::none() { return {}; }

DegradationSpec DegradationSpec::dropout(Availability dropped, std::uint64_t seed) {
  DegradationSpec d;
  d.kind = Kind::kDropout;
  d.dropped = dropped;
  d.seed = seed;
  d.validate();
  return d;
}

DegradationSpec DegradationSpec::dropout(std::string_view letters, std::uint64_t seed) {
  Availability dropped = {false, false, false};
  for (char c : letters) dropped[index_of(modality_from_letter(c))] = true;
  return dropout(dropped, seed);
}

DegradationSpec DegradationSpec::skeleton_noise(double sigma, std::uint64_t seed) {
  DegradationSpec d;
  d.kind = Kind::kSkeletonNoise;
  d.sigma = sigma;
  d.seed = seed;
  d.validate();
  return d;
}

DegradationSpec DegradationSpec::point_sparsity(double fraction, std::uint64_t seed, SparsityFill fill) {
  DegradationSpec d;
  d.kind = Kind::kPointSparsity;
  d.drop_fraction = fraction;
  d.fill = fill;
  d.seed = seed;
  d.validate();
  return d;
}

DegradationSpec DegradationSpec::skeleton_mask(double joint_ratio, double frame_ratio, std::uint64_t seed) {
  DegradationSpec d;
  d.kind = Kind::kSkeletonMask;
  d.joint_ratio = joint_ratio;
  d.frame_ratio = frame_ratio;
  d.seed = seed;
  d.validate();
  return d;
}

void DegradationSpec::validate() const {
  if (!(sigma >= 0.0)) throw ConfigError("degradation: sigma must be >= 0");
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw ConfigError("degradation: drop fraction must be in [0, 1)");
  if (!(joint_ratio >= 0.0 && joint_ratio <= 1.0) || !(frame_ratio >= 0.0 && frame_ratio <= 1.0)) {
    throw ConfigError("degradation: mask ratios must be in [0, 1]");
  }
  if (kind == Kind::kDropout && !allow_all_dropped && dropped[0] && dropped[1] && dropped[2]) {
    throw ConfigError("degradation: dropout must leave at least one modality");
  }
}

std::string DegradationSpec::label() const {
  char buf[64];
  switch (kind) {
    case Kind::kNone: return "clean";
    case Kind::kDropout: {
      std::string s = "drop:";
      for (Modality m : kModalities)
        if (dropped[index_of(m)]) s += modality_letter(m);
      return s;
    }
    case Kind::kSkeletonNoise: std::snprintf(buf, sizeof buf, "sjn:%.2f", sigma); return buf;
    case Kind::kPointSparsity: std::snprintf(buf, sizeof buf, "pcs:%.2f", drop_fraction); return buf;
    case Kind::kSkeletonMask: std::snprintf(buf, sizeof buf, "mask:%.2f/%.2f", joint_ratio, frame_ratio); return buf;
  }
  return "?";
}

std::size_t retained_point_count(double drop_fraction, std::size_t points) {
  const double keep = (1.0 - drop_fraction) * static_cast<double>(points);
  auto n = static_cast<std::size_t>(std::ceil(keep - 1e-9));
  return std::clamp<std::size_t>(n, 1, points);
}

namespace {

void mask_one(std::span<const double> in, std::span<double> out, std::span<double> mask, const DataShape& shape,
              double joint_ratio, double frame_ratio, SplitRng& rng) {
  const std::size_t t_count = shape.frames, j_count = shape.joints;
  std::vector<bool> joint_off(j_count), frame_off(t_count);
  for (std::size_t j = 0; j < j_count; ++j) joint_off[j] = rng.bernoulli(joint_ratio);
  for (std::size_t t = 0; t < t_count; ++t) frame_off[t] = rng.bernoulli(frame_ratio);
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t j = 0; j < j_count; ++j) {
      const bool off = joint_off[j] || frame_off[t];
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t i = (t * j_count + j) * 3 + c;
        out[i] = off ? 0.0 : in[i];
        mask[i] = off ? 0.0 : 1.0;
      }
    }
}

void sparsify_frame(std::span<double> pts, std::size_t points, std::size_t keep, SparsityFill fill, SplitRng& rng) {
  std::vector<std::size_t> order(points);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < keep; ++i) std::swap(order[i], order[i + rng.uniform_index(points - i)]);
  std::vector<bool> kept(points, false);
  for (std::size_t i = 0; i < keep; ++i) kept[order[i]] = true;
  std::vector<std::size_t> kept_idx;
  for (std::size_t p = 0; p < points; ++p)
    if (kept[p]) kept_idx.push_back(p);

  double centroid[3] = {0.0, 0.0, 0.0};
  for (std::size_t p : kept_idx)
    for (std::size_t c = 0; c < 3; ++c) centroid[c] += pts[p * 3 + c];
  for (double& v : centroid) v /= static_cast<double>(kept_idx.size());

  std::size_t next = 0;
  for (std::size_t p = 0; p < points; ++p) {
    if (kept[p]) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      pts[p * 3 + c] = fill == SparsityFill::kCentroid ? centroid[c] : pts[kept_idx[next] * 3 + c];
    }
    next = (next + 1) % kept_idx.size();
  }
}

}  // namespace

MaskedSkeleton mask_skeleton(const DenseMatrix& block, const DataShape& shape, double joint_ratio,
                             double frame_ratio, SplitRng& rng) {
  if (block.size() != shape.skeleton_width()) {
    throw ShapeError("mask_skeleton: block " + block.shape_string() + " does not hold T*J*3 values");
  }
  MaskedSkeleton out{DenseMatrix(block.rows(), block.cols()), DenseMatrix(block.rows(), block.cols())};
  mask_one(block.values(), out.masked.values(), out.mask.values(), shape, joint_ratio, frame_ratio, rng);
  return out;
}

MaskedSkeleton mask_skeleton_rows(const DenseMatrix& block, const DataShape& shape, double joint_ratio,
                                  double frame_ratio, const SplitRng& rng, std::span<const std::uint64_t> ids) {
  if (block.cols() != shape.skeleton_width() || ids.size() != block.rows()) {
    throw ShapeError("mask_skeleton_rows: block " + block.shape_string() + " does not match shape/ids");
  }
  MaskedSkeleton out{DenseMatrix(block.rows(), block.cols()), DenseMatrix(block.rows(), block.cols())};
  for (std::size_t r = 0; r < block.rows(); ++r) {
    SplitRng row_rng = rng.child(ids[r]);
    mask_one(block.row(r), out.masked.row(r), out.mask.row(r), shape, joint_ratio, frame_ratio, row_rng);
  }
  return out;
}

DegradedBatch apply_degradation(const ModalBatch& batch, const DegradationSpec& spec) {
  spec.validate();
  DegradedBatch out{batch, {}};
  ModalBatch& b = out.batch;
  const SplitRng root = SplitRng(spec.seed).child("degrade").child(spec.label());
  switch (spec.kind) {
    case DegradationSpec::Kind::kNone: break;
    case DegradationSpec::Kind::kDropout:
      for (Modality m : kModalities) {
        if (!spec.dropped[index_of(m)]) continue;
        b.block(m).fill(0.0);
        for (auto& a : b.availability) a[index_of(m)] = false;
      }
      break;
    case DegradationSpec::Kind::kSkeletonNoise:
      if (spec.sigma == 0.0) break;
      for (std::size_t r = 0; r < b.size(); ++r) {
        SplitRng rng = root.child(b.ids[r]);
        for (double& v : b.skeleton.row(r)) v += rng.normal(0.0, spec.sigma);
      }
      break;
    case DegradationSpec::Kind::kPointSparsity: {
      const std::size_t p = b.shape.points;
      const std::size_t keep = retained_point_count(spec.drop_fraction, p);
      if (keep == p) break;
      for (std::size_t r = 0; r < b.size(); ++r) {
        SplitRng rng = root.child(b.ids[r]);
        auto row = b.points.row(r);
        for (std::size_t t = 0; t < b.shape.frames; ++t) {
          sparsify_frame(row.subspan(t * p * 3, p * 3), p, keep, spec.fill, rng);
        }
      }
      break;
    }
    case DegradationSpec::Kind::kSkeletonMask: {
      MaskedSkeleton ms = mask_skeleton_rows(batch.skeleton, batch.shape, spec.joint_ratio, spec.frame_ratio, root, b.ids);
      b.skeleton = std::move(ms.masked);
      out.skeleton_mask = std::move(ms.mask);
      break;
    }
  }
  return out;
}

}  // namespace rcmcl
