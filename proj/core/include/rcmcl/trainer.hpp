#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rcmcl/augment.hpp"
#include "rcmcl/data.hpp"
#include "rcmcl/degrade.hpp"
#include "rcmcl/losses.hpp"
#include "rcmcl/model.hpp"
#include "rcmcl/optim.hpp"

namespace rcmcl {

enum class FusionMode {
  kAdaptive,  // learned gates
  kAverage,   // gates forced equal
};

std::string_view fusion_mode_name(FusionMode m);
FusionMode fusion_mode_from_name(std::string_view s);

struct TrainConfig {
  // Self-supervised phase.
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 10;
  std::size_t batch_size = 128;
  double base_lr = 1e-3;
  double weight_decay = 1e-4;
  LossConfig loss;
  AugmentParams augment;
  double degrade_prob = 0.3;  // per-sample, per-modality dropout chance in the fusion batch
  double mask_joint_ratio = 0.3;
  double mask_frame_ratio = 0.3;
  FusionMode fusion = FusionMode::kAdaptive;

  // Supervised phase.
  std::size_t probe_epochs = 50;
  double probe_lr = 1e-2;
  std::size_t finetune_epochs = 30;
  double finetune_lr = 1e-3;

  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochLosses {
  std::size_t epoch = 0;
  LossComponents mean;  // per-batch means of each component
  double total = 0.0;
  double lr = 0.0;      // learning rate at the epoch's last step
};

struct PretrainResult {
  ModelParams params;
  std::vector<EpochLosses> history;
};

using EpochCallback = std::function<void(const EpochLosses&)>;

// Self-supervised pre-training on unlabeled inputs. Each batch: two augmented
// views per modality, Barlow loss per modality between the views, pairwise
// InfoNCE across modalities on the first views, masked-skeleton
// reconstruction, and fused-to-modality alignment on a copy of the first
// views where each modality of each sample is dropped with degrade_prob.
// Components with a zero weight are skipped. Throws NumericError with
// epoch/batch context on non-finite losses.
PretrainResult pretrain(const ModalBatch& data, const ModelParams& init, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {});

// Loss components of one pre-training step on `batch` without updating
// anything; draws are keyed by (cfg.seed, epoch).
LossComponents pretrain_losses(const ModelParams& params, const ModalBatch& batch, const TrainConfig& cfg,
                               std::size_t epoch = 0);

struct FusedFeatures {
  DenseMatrix z[kNumModalities];
  DenseMatrix gates;  // N x 3 (all ones in average mode)
  DenseMatrix fused;  // N x d_f
  std::vector<bool> degenerate;
};

// Encodes in chunks of `chunk` rows; no caches are kept.
FusedFeatures fused_features(const ModelParams& params, const ModalBatch& batch, FusionMode mode,
                             std::size_t chunk = 256);

DenseMatrix classifier_logits(const ModelParams& params, const DenseMatrix& fused);
std::vector<int> predict(const ModelParams& params, const ModalBatch& batch, FusionMode mode);
// Top-1 accuracy in percent.
double accuracy_percent(std::span<const int> predicted, std::span<const int> labels);
double evaluate_accuracy(const ModelParams& params, const LabeledSet& data, FusionMode mode,
                         const DegradationSpec& degradation = DegradationSpec::none());

struct SupervisedResult {
  ModelParams params;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Trains only the classifier on frozen Z_fusion features; every other tensor
// is returned byte-identical.
SupervisedResult linear_probe(const ModelParams& params, const LabeledSet& train, const LabeledSet& test,
                              const TrainConfig& cfg);

// Cross-entropy through the fused features, updating every trainable tensor.
SupervisedResult full_finetune(const ModelParams& params, const LabeledSet& train, const LabeledSet& test,
                               const TrainConfig& cfg);

}  // namespace rcmcl
