#include "rcmcl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "rcmcl/error.hpp"

namespace rcmcl {

void AugmentParams::validate() const {
  if (!(rotation_deg >= 0.0 && rotation_deg <= 180.0)) throw ConfigError("augment: rotation_deg must be in [0, 180]");
  if (!(jitter >= 0.0)) throw ConfigError("augment: jitter must be >= 0");
  if (!(feature_drop >= 0.0 && feature_drop < 1.0)) throw ConfigError("augment: feature_drop must be in [0, 1)");
}

namespace {

void add_jitter(std::span<double> row, SplitRng& rng, double jitter) {
  if (jitter <= 0.0) return;
  for (double& v : row) v += rng.normal(0.0, jitter);
}

}  // namespace

void augment_row(std::span<double> row, Modality m, const DataShape& shape, SplitRng& rng, const AugmentParams& p) {
  if (row.size() != shape.width(m)) {
    throw ShapeError("augment_row: " + std::string(modality_name(m)) + " row has " + std::to_string(row.size()) +
                     " values, expected " + std::to_string(shape.width(m)));
  }
  switch (m) {
    case Modality::kSkeleton: {
      if (p.rotation_deg > 0.0) {
        const double theta = rng.uniform(-p.rotation_deg, p.rotation_deg) * std::numbers::pi / 180.0;
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t k = 0; k + 2 < row.size(); k += 3) {
          const double x = row[k], z = row[k + 2];
          row[k] = c * x + s * z;
          row[k + 2] = -s * x + c * z;
        }
      }
      add_jitter(row, rng, p.jitter);
      break;
    }
    case Modality::kPoints: {
      if (p.resample_points) {
        const std::size_t pts = shape.points, fw = pts * 3;
        std::vector<double> frame(fw);
        for (std::size_t t = 0; t < shape.frames; ++t) {
          double* base = row.data() + t * fw;
          std::copy(base, base + fw, frame.begin());
          for (std::size_t i = 0; i < pts; ++i) {
            const std::size_t src = rng.uniform_index(pts);
            for (std::size_t a = 0; a < 3; ++a) base[i * 3 + a] = frame[src * 3 + a];
          }
        }
      }
      add_jitter(row, rng, p.jitter);
      break;
    }
    case Modality::kRgbd: {
      if (p.feature_drop > 0.0) {
        for (double& v : row) {
          if (rng.bernoulli(p.feature_drop)) v = 0.0;
        }
      }
      add_jitter(row, rng, p.jitter);
      break;
    }
  }
}

namespace {

DenseMatrix& sample_block(Sample& s, Modality m) {
  switch (m) {
    case Modality::kRgbd: return s.rgbd;
    case Modality::kSkeleton: return s.skeleton;
    case Modality::kPoints: break;
  }
  return s.points;
}

}  // namespace

Sample augment(const Sample& s, Modality m, SplitRng& rng, const AugmentParams& p, const DataShape& shape) {
  Sample out = s;
  DenseMatrix& b = sample_block(out, m);
  augment_row(std::span<double>(b.data(), b.size()), m, shape, rng, p);
  return out;
}

ModalBatch augment_batch(const ModalBatch& batch, const SplitRng& rng, const AugmentParams& p) {
  ModalBatch out = batch;
  for (Modality m : kModalities) {
    DenseMatrix& b = out.block(m);
    for (std::size_t r = 0; r < out.size(); ++r) {
      if (!out.availability.empty() && !out.availability[r][index_of(m)]) continue;
      SplitRng child = rng.child(out.ids[r]).child(static_cast<std::uint64_t>(index_of(m)));
      augment_row(b.row(r), m, out.shape, child, p);
    }
  }
  return out;
}

}  // namespace rcmcl
