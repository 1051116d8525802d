#include "rcmcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rcmcl/error.hpp"
#include "rcmcl/rng.hpp"

namespace rcmcl {

std::string_view modality_name(Modality m) noexcept {
  switch (m) {
    case Modality::kRgbd: return "rgbd";
    case Modality::kSkeleton: return "skeleton";
    case Modality::kPoints: return "points";
  }
  return "?";
}

char modality_letter(Modality m) noexcept { return "RSP"[index_of(m)]; }

Modality modality_from_letter(char c) {
  switch (c) {
    case 'R': case 'r': return Modality::kRgbd;
    case 'S': case 's': return Modality::kSkeleton;
    case 'P': case 'p': return Modality::kPoints;
  }
  throw ConfigError(std::string("unknown modality letter '") + c + "' (expected R, S or P)");
}

std::size_t DataShape::width(Modality m) const noexcept {
  switch (m) {
    case Modality::kRgbd: return rgbd_width();
    case Modality::kSkeleton: return skeleton_width();
    case Modality::kPoints: return points_width();
  }
  return 0;
}

std::size_t DataShape::frame_width(Modality m) const noexcept { return width(m) / frames; }

DenseMatrix& ModalBatch::block(Modality m) noexcept {
  switch (m) {
    case Modality::kRgbd: return rgbd;
    case Modality::kSkeleton: return skeleton;
    case Modality::kPoints: break;
  }
  return points;
}

const DenseMatrix& ModalBatch::block(Modality m) const noexcept {
  return const_cast<ModalBatch*>(this)->block(m);
}

namespace {

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw ShapeError("row index " + std::to_string(rows[i]) + " out of range");
    std::copy_n(m.data() + rows[i] * m.cols(), m.cols(), out.data() + i * m.cols());
  }
  return out;
}

}  // namespace

ModalBatch ModalBatch::subset(std::span<const std::size_t> rows) const {
  ModalBatch out;
  out.shape = shape;
  out.rgbd = gather_rows(rgbd, rows);
  out.skeleton = gather_rows(skeleton, rows);
  out.points = gather_rows(points, rows);
  out.ids.reserve(rows.size());
  out.availability.reserve(rows.size());
  for (std::size_t r : rows) {
    out.ids.push_back(ids.at(r));
    out.availability.push_back(availability.at(r));
  }
  return out;
}

Sample ModalBatch::sample(std::size_t row, int label) const {
  if (row >= size()) throw ShapeError("sample row out of range");
  Sample s;
  s.id = ids[row];
  s.label = label;
  const std::size_t t = shape.frames;
  auto take = [&](const DenseMatrix& m) {
    auto r = m.row(row);
    return DenseMatrix(t, m.cols() / t, std::vector<double>(r.begin(), r.end()));
  };
  s.rgbd = take(rgbd);
  s.skeleton = take(skeleton);
  s.points = take(points);
  s.availability = availability[row];
  return s;
}

ModalBatch ModalBatch::from_samples(const DataShape& shape, std::span<const Sample> samples) {
  ModalBatch out;
  out.shape = shape;
  out.rgbd = DenseMatrix(samples.size(), shape.rgbd_width());
  out.skeleton = DenseMatrix(samples.size(), shape.skeleton_width());
  out.points = DenseMatrix(samples.size(), shape.points_width());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    auto put = [&](DenseMatrix& dst, const DenseMatrix& src, std::string_view what) {
      if (src.size() != dst.cols()) {
        throw ShapeError(std::string(what) + " block has " + std::to_string(src.size()) + " values, expected " +
                         std::to_string(dst.cols()));
      }
      std::copy(src.values().begin(), src.values().end(), dst.row(i).begin());
    };
    put(out.rgbd, s.rgbd, "rgbd");
    put(out.skeleton, s.skeleton, "skeleton");
    put(out.points, s.points, "points");
    out.ids.push_back(s.id);
    out.availability.push_back(s.availability);
  }
  return out;
}

void ModalBatch::validate() const {
  const std::size_t n = ids.size();
  if (availability.size() != n) throw ShapeError("availability length does not match batch size");
  for (Modality m : kModalities) {
    const DenseMatrix& b = block(m);
    if (b.rows() != n || b.cols() != shape.width(m)) {
      throw ShapeError(std::string(modality_name(m)) + " block is " + b.shape_string() + ", expected " +
                       std::to_string(n) + "x" + std::to_string(shape.width(m)));
    }
  }
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
  LabeledSet out;
  out.inputs = inputs.subset(rows);
  out.num_classes = num_classes;
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels.at(r));
  return out;
}

void GeneratorSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("generator spec: " + msg); };
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (frames < 2) fail("frames must be >= 2");
  if (joints < 2) fail("joints must be >= 2");
  if (points_per_frame < 4) fail("points_per_frame must be >= 4");
  if (rgbd_dim < latent_dim) fail("rgbd_dim must be >= latent_dim");
  if (!(instance_noise >= 0.0)) fail("instance_noise must be >= 0");
  if (!(modality_noise >= 0.0)) fail("modality_noise must be >= 0");
  if (!(temporal_amplitude >= 0.0)) fail("temporal_amplitude must be >= 0");
  if (!(nuisance_scale >= 0.0)) fail("nuisance_scale must be >= 0");
}

namespace {

DenseMatrix gaussian(std::size_t rows, std::size_t cols, double stddev, SplitRng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, stddev);
  return m;
}

// out += m * v for a rows x cols matrix and length-cols vector.
void add_matvec(std::span<double> out, const DenseMatrix& m, std::span<const double> v) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * v[c];
    out[r] += s;
  }
}

// Shape of the fixed world the generator renders from; drawn once per seed.
struct World {
  DenseMatrix prototypes;   // K x dz
  DenseMatrix amplitudes;   // K x dz
  std::vector<double> omega;
  DenseMatrix skel_map;     // (J*3) x dz
  DenseMatrix rgbd_map;     // F x dz
  DenseMatrix rgbd_bias;    // 1 x F
  DenseMatrix point_map;    // (P*3) x dz
  std::vector<DenseMatrix> base_clouds;  // K x (1 x P*3)
  DenseMatrix skel_nuisance;   // (J*3) x du
  DenseMatrix rgbd_nuisance;   // F x du
  DenseMatrix point_nuisance;  // (P*3) x du
};

World draw_world(const GeneratorSpec& spec, SplitRng rng) {
  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  const std::size_t dz = spec.latent_dim;
  const std::size_t du = std::max<std::size_t>(spec.nuisance_dim, 1);
  const double inv_dz = 1.0 / std::sqrt(static_cast<double>(dz));
  const double inv_du = 1.0 / std::sqrt(static_cast<double>(du));
  const std::size_t skel = spec.joints * 3, pts = spec.points_per_frame * 3;

  World w;
  SplitRng r_proto = rng.child("prototypes");
  w.prototypes = gaussian(k, dz, 1.0, r_proto);
  SplitRng r_amp = rng.child("amplitudes");
  w.amplitudes = gaussian(k, dz, spec.temporal_amplitude * inv_dz, r_amp);
  SplitRng r_omega = rng.child("omega");
  for (std::size_t c = 0; c < k; ++c) w.omega.push_back(r_omega.uniform(0.3, 1.2));

  SplitRng r_maps = rng.child("maps");
  w.skel_map = gaussian(skel, dz, inv_dz, r_maps);
  w.rgbd_map = gaussian(spec.rgbd_dim, dz, inv_dz, r_maps);
  w.rgbd_bias = gaussian(1, spec.rgbd_dim, 0.1, r_maps);
  w.point_map = gaussian(pts, dz, 0.5 * inv_dz, r_maps);

  SplitRng r_cloud = rng.child("clouds");
  const DenseMatrix shared = gaussian(1, pts, 1.0, r_cloud);
  for (std::size_t c = 0; c < k; ++c) {
    DenseMatrix cloud = gaussian(1, pts, 0.25, r_cloud);
    for (std::size_t i = 0; i < pts; ++i) cloud[i] += shared[i];
    w.base_clouds.push_back(std::move(cloud));
  }

  SplitRng r_nuis = rng.child("nuisance");
  w.skel_nuisance = gaussian(skel, du, inv_du, r_nuis);
  w.rgbd_nuisance = gaussian(spec.rgbd_dim, du, inv_du, r_nuis);
  w.point_nuisance = gaussian(pts, du, 0.5 * inv_du, r_nuis);
  return w;
}

}  // namespace

Dataset generate(const GeneratorSpec& spec, std::size_t n_per_class) {
  spec.validate();
  if (n_per_class < 2) throw ConfigError("generate: n_per_class must be >= 2");
  const SplitRng root = SplitRng(spec.seed).child("datagen");
  const World world = draw_world(spec, root.child("world"));

  const std::size_t k = static_cast<std::size_t>(spec.num_classes);
  const std::size_t n = k * n_per_class;
  const std::size_t dz = spec.latent_dim, du = spec.nuisance_dim;
  const DataShape shape = spec.shape();
  const std::size_t skel = spec.joints * 3, pts = spec.points_per_frame * 3, f = spec.rgbd_dim;

  Dataset ds;
  ds.spec = spec;
  LabeledSet& out = ds.samples;
  out.num_classes = spec.num_classes;
  ModalBatch& b = out.inputs;
  b.shape = shape;
  b.rgbd = DenseMatrix(n, shape.rgbd_width());
  b.skeleton = DenseMatrix(n, shape.skeleton_width());
  b.points = DenseMatrix(n, shape.points_width());
  b.availability.assign(n, kAllAvailable);

  std::vector<double> z(dz), eps(dz), u(std::max<std::size_t>(du, 1));
  std::vector<double> frame;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const std::size_t row = c * n_per_class + i;
      b.ids.push_back(row);
      out.labels.push_back(static_cast<int>(c));
      SplitRng rng = root.child("sample").child(row);
      for (double& e : eps) e = rng.normal();
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

      // Modality-private nuisance, fixed over the sequence.
      auto draw_nuisance = [&](const DenseMatrix& map, std::size_t width) {
        std::vector<double> off(width, 0.0);
        if (du == 0 || spec.nuisance_scale == 0.0) return off;
        for (double& v : u) v = rng.normal(0.0, spec.nuisance_scale);
        add_matvec(off, map, u);
        return off;
      };
      const std::vector<double> skel_off = draw_nuisance(world.skel_nuisance, skel);
      const std::vector<double> rgbd_off = draw_nuisance(world.rgbd_nuisance, f);
      const std::vector<double> point_off = draw_nuisance(world.point_nuisance, pts);

      for (std::size_t t = 0; t < spec.frames; ++t) {
        const double s = std::sin(world.omega[c] * static_cast<double>(t) + phase);
        for (std::size_t d = 0; d < dz; ++d) {
          z[d] = world.prototypes(c, d) + spec.instance_noise * eps[d] + world.amplitudes(c, d) * s;
        }

        frame.assign(skel_off.begin(), skel_off.end());
        add_matvec(frame, world.skel_map, z);
        for (std::size_t j = 0; j < skel; ++j) {
          b.skeleton(row, t * skel + j) = frame[j] + rng.normal(0.0, spec.modality_noise);
        }

        frame.assign(rgbd_off.begin(), rgbd_off.end());
        add_matvec(frame, world.rgbd_map, z);
        for (std::size_t j = 0; j < f; ++j) {
          b.rgbd(row, t * f + j) = std::tanh(frame[j] + world.rgbd_bias[j]) + rng.normal(0.0, spec.modality_noise);
        }

        frame.assign(point_off.begin(), point_off.end());
        add_matvec(frame, world.point_map, z);
        const DenseMatrix& cloud = world.base_clouds[c];
        for (std::size_t j = 0; j < pts; ++j) {
          b.points(row, t * pts + j) = cloud[j] + frame[j] + rng.normal(0.0, spec.modality_noise);
        }
      }
    }
  }
  return ds;
}

SplitIds split_indices(const LabeledSet& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split: train_fraction must be in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(std::max(data.num_classes, 0)));
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const int y = data.labels[i];
    if (y < 0 || y >= data.num_classes) throw ConfigError("split: label out of range");
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }
  SplitIds ids;
  SplitRng rng = SplitRng(seed).child("split");
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < 2) throw ConfigError("split: class " + std::to_string(c) + " has fewer than 2 samples");
    SplitRng cr = rng.child(c);
    for (std::size_t i = rows.size() - 1; i > 0; --i) std::swap(rows[i], rows[cr.uniform_index(i + 1)]);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    ids.train.insert(ids.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    ids.test.insert(ids.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(ids.train.begin(), ids.train.end());
  std::sort(ids.test.begin(), ids.test.end());
  return ids;
}

std::pair<LabeledSet, LabeledSet> split(const LabeledSet& data, double train_fraction, std::uint64_t seed) {
  const SplitIds ids = split_indices(data, train_fraction, seed);
  return {data.subset(ids.train), data.subset(ids.test)};
}

DenseMatrix chain_graph_mix(std::size_t joints) {
  DenseMatrix a = DenseMatrix::identity(joints);
  for (std::size_t j = 0; j + 1 < joints; ++j) {
    a(j, j + 1) = 1.0;
    a(j + 1, j) = 1.0;
  }
  std::vector<double> d(joints, 0.0);
  for (std::size_t i = 0; i < joints; ++i)
    for (std::size_t j = 0; j < joints; ++j) d[i] += a(i, j);
  for (std::size_t i = 0; i < joints; ++i)
    for (std::size_t j = 0; j < joints; ++j) a(i, j) /= std::sqrt(d[i] * d[j]);
  return a;
}

}  // namespace rcmcl
