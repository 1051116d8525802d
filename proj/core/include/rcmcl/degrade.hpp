#pragma once

#include <cstdint>
#include <string>

#include "rcmcl/data.hpp"
#include "rcmcl/rng.hpp"

namespace rcmcl {

// How point-cloud sparsity fills the removed slots so tensors keep shape P.
enum class SparsityFill {
  kCentroid,   // centroid of the retained points
  kDuplicate,  // copies of retained points (exact removal under max-pooling)
};

struct DegradationSpec {
  enum class Kind { kNone, kDropout, kSkeletonNoise, kPointSparsity, kSkeletonMask };

  Kind kind = Kind::kNone;
  Availability dropped = {false, false, false};  // kDropout
  double sigma = 0.0;                            // kSkeletonNoise
  double drop_fraction = 0.0;                    // kPointSparsity
  SparsityFill fill = SparsityFill::kCentroid;
  double joint_ratio = 0.0;                      // kSkeletonMask
  double frame_ratio = 0.0;
  std::uint64_t seed = 0;
  bool allow_all_dropped = false;

  static DegradationSpec none();
  static DegradationSpec dropout(Availability dropped, std::uint64_t seed = 0);
  // Letters from "RSP", e.g. "RP" drops RGB-D and points.
  static DegradationSpec dropout(std::string_view letters, std::uint64_t seed = 0);
  static DegradationSpec skeleton_noise(double sigma, std::uint64_t seed);
  static DegradationSpec point_sparsity(double fraction, std::uint64_t seed,
                                        SparsityFill fill = SparsityFill::kCentroid);
  static DegradationSpec skeleton_mask(double joint_ratio, double frame_ratio, std::uint64_t seed);

  void validate() const;
  // Stable scenario label: "clean", "drop:RP", "sjn:0.10", "pcs:0.50", "mask:0.30/0.30".
  std::string label() const;
};

struct DegradedBatch {
  ModalBatch batch;
  DenseMatrix skeleton_mask;  // only for kSkeletonMask: 1 where kept
};

// Pure: returns a fresh batch. Random draws are keyed by (spec.seed, sample
// id), so a sample is corrupted identically regardless of batch composition.
DegradedBatch apply_degradation(const ModalBatch& batch, const DegradationSpec& spec);

struct MaskedSkeleton {
  DenseMatrix masked;  // same layout as the input block
  DenseMatrix mask;
};

// Masks whole joints (across all frames) with probability joint_ratio and
// whole frames with probability frame_ratio. `block` holds T*J*3 values per row.
MaskedSkeleton mask_skeleton(const DenseMatrix& block, const DataShape& shape, double joint_ratio,
                             double frame_ratio, SplitRng& rng);
// Row-wise variant drawing each row from rng.child(ids[row]).
MaskedSkeleton mask_skeleton_rows(const DenseMatrix& block, const DataShape& shape, double joint_ratio,
                                  double frame_ratio, const SplitRng& rng, std::span<const std::uint64_t> ids);

std::size_t retained_point_count(double drop_fraction, std::size_t points);

}  // namespace rcmcl
