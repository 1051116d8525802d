#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "rcmcl/matrix.hpp"

namespace rcmcl {

enum class Modality : int { kRgbd = 0, kSkeleton = 1, kPoints = 2 };
inline constexpr std::array<Modality, 3> kModalities = {Modality::kRgbd, Modality::kSkeleton, Modality::kPoints};
inline constexpr std::size_t kNumModalities = 3;

constexpr std::size_t index_of(Modality m) noexcept { return static_cast<std::size_t>(m); }
std::string_view modality_name(Modality m) noexcept;   // "rgbd", "skeleton", "points"
char modality_letter(Modality m) noexcept;             // 'R', 'S', 'P'
Modality modality_from_letter(char c);

using Availability = std::array<bool, kNumModalities>;
inline constexpr Availability kAllAvailable = {true, true, true};

// Per-sample tensor extents. Blocks are stored flattened, one sample per row:
//   rgbd     T x F       -> row width T*F
//   skeleton T x J x 3   -> row width T*J*3 (frame-major, then joint, then xyz)
//   points   T x P x 3   -> row width T*P*3 (frame-major, then point, then xyz)
struct DataShape {
  std::size_t frames = 8;
  std::size_t joints = 5;
  std::size_t points = 32;
  std::size_t rgbd_dim = 48;

  std::size_t rgbd_width() const noexcept { return frames * rgbd_dim; }
  std::size_t skeleton_width() const noexcept { return frames * joints * 3; }
  std::size_t points_width() const noexcept { return frames * points * 3; }
  std::size_t width(Modality m) const noexcept;
  // Values per frame of one modality.
  std::size_t frame_width(Modality m) const noexcept;

  friend bool operator==(const DataShape&, const DataShape&) = default;
};

// One labeled action instance with per-frame rows.
struct Sample {
  std::uint64_t id = 0;
  int label = 0;
  DenseMatrix rgbd;      // T x F
  DenseMatrix skeleton;  // T x (J*3)
  DenseMatrix points;    // T x (P*3)
  Availability availability = kAllAvailable;
};

// Unlabeled multi-modal inputs. Pre-training only ever sees this type.
struct ModalBatch {
  DataShape shape;
  DenseMatrix rgbd;
  DenseMatrix skeleton;
  DenseMatrix points;
  std::vector<std::uint64_t> ids;
  std::vector<Availability> availability;

  std::size_t size() const noexcept { return ids.size(); }
  DenseMatrix& block(Modality m) noexcept;
  const DenseMatrix& block(Modality m) const noexcept;

  ModalBatch subset(std::span<const std::size_t> rows) const;
  Sample sample(std::size_t row, int label = 0) const;
  static ModalBatch from_samples(const DataShape& shape, std::span<const Sample> samples);
  // Throws ShapeError if any block disagrees with `shape` or the row count.
  void validate() const;
};

struct LabeledSet {
  ModalBatch inputs;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  LabeledSet subset(std::span<const std::size_t> rows) const;
};

struct GeneratorSpec {
  int num_classes = 10;
  std::size_t latent_dim = 8;
  std::size_t frames = 8;
  std::size_t joints = 5;
  std::size_t points_per_frame = 32;
  std::size_t rgbd_dim = 48;
  double instance_noise = 0.3;
  double modality_noise = 0.05;
  std::uint64_t seed = 7;
  // Scale of the class-specific sinusoid a_c sin(w_c t + phi); 0 disables it.
  double temporal_amplitude = 0.5;
  // Per-sample, per-modality nuisance factors that no other modality sees.
  std::size_t nuisance_dim = 4;
  double nuisance_scale = 2.0;

  DataShape shape() const noexcept { return {frames, joints, points_per_frame, rgbd_dim}; }
  // Throws ConfigError naming the first invalid field.
  void validate() const;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct Dataset {
  GeneratorSpec spec;
  LabeledSet samples;
};

// Class-stratified synthetic dataset of spec.num_classes * n_per_class
// samples, rows ordered by class then instance. Bit-identical per spec.
Dataset generate(const GeneratorSpec& spec, std::size_t n_per_class);

struct SplitIds {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified, disjoint split; each class contributes round(fraction * count)
// (clamped to [1, count-1]) training rows. Row indices are returned sorted.
SplitIds split_indices(const LabeledSet& data, double train_fraction, std::uint64_t seed);
std::pair<LabeledSet, LabeledSet> split(const LabeledSet& data, double train_fraction, std::uint64_t seed);

// Fixed chain adjacency over `joints` nodes, D^{-1/2}(A+I)D^{-1/2}.
DenseMatrix chain_graph_mix(std::size_t joints);

}  // namespace rcmcl
