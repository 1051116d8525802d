#pragma once

#include "rcmcl/data.hpp"
#include "rcmcl/rng.hpp"

namespace rcmcl {

struct AugmentParams {
  double rotation_deg = 30.0;   // skeleton: uniform yaw in [-deg, deg] about the vertical (y) axis
  double jitter = 0.02;         // all modalities: additive N(0, jitter^2)
  bool resample_points = true;  // points: draw P points with replacement per frame
  double feature_drop = 0.1;    // rgbd: zero each value with this probability

  static AugmentParams identity() { return {0.0, 0.0, false, 0.0}; }
  void validate() const;
  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

// Augments one modality of one sample in place (row holds the flattened block).
void augment_row(std::span<double> row, Modality m, const DataShape& shape, SplitRng& rng, const AugmentParams& p);

Sample augment(const Sample& s, Modality m, SplitRng& rng, const AugmentParams& p, const DataShape& shape);

// Fresh batch where row r / modality m is drawn from rng.child(id_r).child(m).
// Unavailable modalities are left untouched (they stay zero-filled).
ModalBatch augment_batch(const ModalBatch& batch, const SplitRng& rng, const AugmentParams& p);

}  // namespace rcmcl
