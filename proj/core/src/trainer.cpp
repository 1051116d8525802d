#include "rcmcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rcmcl/error.hpp"
#include "rcmcl/fusion.hpp"
#include "rcmcl/ops.hpp"

namespace rcmcl {

std::string_view fusion_mode_name(FusionMode m) { return m == FusionMode::kAdaptive ? "adaptive" : "average"; }

FusionMode fusion_mode_from_name(std::string_view s) {
  if (s == "adaptive" || s == "amg") return FusionMode::kAdaptive;
  if (s == "average" || s == "mean") return FusionMode::kAverage;
  throw ConfigError("unknown fusion mode '" + std::string(s) + "' (expected adaptive or average)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (warmup_epochs >= epochs) throw ConfigError("train: warmup_epochs must be < epochs");
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (!(base_lr >= 0.0) || !(probe_lr >= 0.0) || !(finetune_lr >= 0.0)) {
    throw ConfigError("train: learning rates must be >= 0");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(degrade_prob >= 0.0 && degrade_prob <= 1.0)) throw ConfigError("train: degrade_prob must be in [0, 1]");
  if (!(mask_joint_ratio >= 0.0 && mask_joint_ratio <= 1.0) || !(mask_frame_ratio >= 0.0 && mask_frame_ratio <= 1.0)) {
    throw ConfigError("train: mask ratios must be in [0, 1]");
  }
  loss.validate();
  augment.validate();
}

namespace {

std::vector<DenseMatrix*> trainable(ModelParams& p, bool include_classifier, bool include_rest) {
  std::vector<DenseMatrix*> out;
  for (auto& [name, t] : named_tensors(p, false)) {
    const bool is_cls = name.rfind("cls.", 0) == 0;
    if (is_cls ? include_classifier : include_rest) out.push_back(t);
  }
  return out;
}

std::vector<std::size_t> shuffled(std::size_t n, SplitRng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
  return idx;
}

// Replaces dropped rows of z with the zero-input feature row z0.
DenseMatrix with_dropped_rows(const DenseMatrix& z, const DenseMatrix& z0, const std::vector<Availability>& av,
                              std::size_t m) {
  DenseMatrix out = z;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (!av[r][m]) std::copy(z0.data(), z0.data() + z0.cols(), out.row(r).begin());
  }
  return out;
}

// One pre-training step; accumulates weighted gradients when `grads` is set.
LossComponents ssl_step(const ModelParams& p, const ModalBatch& batch, const TrainConfig& cfg, const SplitRng& rng,
                        ModelParams* grads) {
  const LossConfig& lc = cfg.loss;
  LossComponents comps;
  const std::size_t n = batch.size();
  const bool use_cm = lc.lambda_cm > 0.0, use_im = lc.lambda_im > 0.0;
  const bool use_deg = lc.lambda_deg > 0.0, use_fuse = lc.lambda_fuse > 0.0;

  DenseMatrix z1[kNumModalities], h1[kNumModalities], dz1[kNumModalities], dh1[kNumModalities];
  EncoderCache ec1[kNumModalities];
  ProjectionCache pc1[kNumModalities];
  if (use_cm || use_im || use_fuse) {
    const ModalBatch v1 = augment_batch(batch, rng.child("view1"), cfg.augment);
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      z1[i] = encode(p, m, v1.block(m), &ec1[i]);
      h1[i] = project(p.head(m), z1[i], &pc1[i]);
      dz1[i] = DenseMatrix(z1[i].rows(), z1[i].cols());
      dh1[i] = DenseMatrix(h1[i].rows(), h1[i].cols());
    }
  }

  if (use_cm) {
    TripleLoss tl = cross_modal_total(h1[0], h1[1], h1[2], lc.tau);
    comps.cross_modal = tl.value;
    if (grads) {
      add_inplace(dh1[0], tl.grad_r, lc.lambda_cm);
      add_inplace(dh1[1], tl.grad_s, lc.lambda_cm);
      add_inplace(dh1[2], tl.grad_p, lc.lambda_cm);
    }
  }

  if (use_im) {
    const ModalBatch v2 = augment_batch(batch, rng.child("view2"), cfg.augment);
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      EncoderCache ec2;
      ProjectionCache pc2;
      const DenseMatrix z2 = encode(p, m, v2.block(m), grads ? &ec2 : nullptr);
      const DenseMatrix h2 = project(p.head(m), z2, grads ? &pc2 : nullptr);
      BarlowLoss bl = barlow_loss(h1[i], h2, lc.lambda_bt);
      comps.intra_modal += bl.value;
      if (grads) {
        add_inplace(dh1[i], bl.grad_a, lc.lambda_im);
        scale_inplace(bl.grad_b, lc.lambda_im);
        DenseMatrix dz2 = project_backward(p.head(m), pc2, bl.grad_b, grads->head(m));
        encode_backward(p, ec2, dz2, *grads);
      }
    }
  }

  if (use_deg) {
    const MaskedSkeleton ms = mask_skeleton_rows(batch.skeleton, batch.shape, cfg.mask_joint_ratio,
                                                 cfg.mask_frame_ratio, rng.child("mask"), batch.ids);
    EncoderCache ec;
    const DenseMatrix zm = encode(p, Modality::kSkeleton, ms.masked, grads ? &ec : nullptr);
    ReconstructionLoss rl = degradation_loss(batch.skeleton, zm, p.dec_s);
    comps.degradation = rl.value;
    if (grads) {
      for (std::size_t l = 0; l < rl.grad_decoder.layers.size(); ++l) {
        add_inplace(grads->dec_s.layers[l].w, rl.grad_decoder.layers[l].w, lc.lambda_deg);
        add_inplace(grads->dec_s.layers[l].b, rl.grad_decoder.layers[l].b, lc.lambda_deg);
      }
      scale_inplace(rl.grad_feature, lc.lambda_deg);
      encode_backward(p, ec, rl.grad_feature, *grads);
    }
  }

  if (use_fuse) {
    // Per-sample modality dropout; at least one modality survives.
    std::vector<Availability> av(n, kAllAvailable);
    const SplitRng drop_rng = rng.child("fusion");
    for (std::size_t r = 0; r < n; ++r) {
      SplitRng s = drop_rng.child(batch.ids[r]);
      std::size_t kept = 0;
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        av[r][m] = !s.bernoulli(cfg.degrade_prob);
        kept += av[r][m] ? 1 : 0;
      }
      if (kept == 0) av[r][s.uniform_index(kNumModalities)] = true;
    }
    // The zero-input feature is a constant here: no gradient flows back
    // through it, so the encoders cannot make a blank stream look useful.
    DenseMatrix zd[kNumModalities], z0[kNumModalities];
    const DenseMatrix* zp[kNumModalities];
    const DenseMatrix* hp[kNumModalities];
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      z0[i] = encode(p, m, DenseMatrix(1, batch.shape.width(m)));
      zd[i] = with_dropped_rows(z1[i], z0[i], av, i);
      zp[i] = &zd[i];
      hp[i] = &h1[i];
    }
    // Clean copy: trains the fusion head, gates and encoders. Degraded copy:
    // scored against the same head and targets held fixed, so only the gates
    // and the surviving features can compensate for a blank stream.
    const DenseMatrix* zc[kNumModalities] = {&z1[0], &z1[1], &z1[2]};
    for (int pass = 0; pass < 2; ++pass) {
      const bool degraded = pass == 1;
      FusionInputs in;
      for (std::size_t i = 0; i < kNumModalities; ++i) {
        in.z[i] = degraded ? zp[i] : zc[i];
        in.h[i] = hp[i];
      }
      if (degraded) in.availability = av;
      FusionLoss fl = fusion_alignment_loss(in, p.gate_w, p.gate_b, p.proj_f, lc.tau);
      comps.fusion += fl.value;
      if (!grads) continue;
      const double w = lc.lambda_fuse;
      add_inplace(grads->gate_w, fl.grad_gate_w, w);
      add_inplace(grads->gate_b, fl.grad_gate_b, w);
      if (!degraded) {
        for (std::size_t l = 0; l < fl.grad_proj_f.layers.size(); ++l) {
          add_inplace(grads->proj_f.layers[l].w, fl.grad_proj_f.layers[l].w, w);
          add_inplace(grads->proj_f.layers[l].b, fl.grad_proj_f.layers[l].b, w);
        }
      }
      for (Modality m : kModalities) {
        const std::size_t i = index_of(m);
        if (!degraded) add_inplace(dh1[i], fl.grad_h[i], w);
        for (std::size_t r = 0; r < n; ++r) {
          if (degraded && !av[r][i]) continue;
          auto g = fl.grad_z[i].row(r);
          auto d = dz1[i].row(r);
          for (std::size_t c = 0; c < g.size(); ++c) d[c] += w * g[c];
        }
      }
    }
  }

  if (grads && (use_cm || use_im || use_fuse)) {
    for (Modality m : kModalities) {
      const std::size_t i = index_of(m);
      DenseMatrix dz = project_backward(p.head(m), pc1[i], dh1[i], grads->head(m));
      add_inplace(dz, dz1[i]);
      encode_backward(p, ec1[i], dz, *grads);
    }
  }
  return comps;
}

bool finite(const LossComponents& c) {
  return std::isfinite(c.cross_modal) && std::isfinite(c.intra_modal) && std::isfinite(c.degradation) &&
         std::isfinite(c.fusion);
}

SplitRng step_rng(const TrainConfig& cfg, std::size_t epoch, std::size_t batch) {
  return SplitRng(cfg.seed).child("pretrain").child(epoch).child(batch);
}

bool all_finite(const std::vector<DenseMatrix*>& ts) {
  return std::all_of(ts.begin(), ts.end(), [](const DenseMatrix* t) { return t->all_finite(); });
}

}  // namespace

PretrainResult pretrain(const ModalBatch& data, const ModelParams& init, const TrainConfig& cfg,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  const std::size_t n = data.size();
  if (n < 2) throw ConfigError("pretrain: need at least 2 samples");
  const std::size_t bs = std::min(cfg.batch_size, n);
  const std::size_t batches = n / bs;  // drop_last

  PretrainResult out{init, {}};
  ModelParams& p = out.params;
  std::vector<DenseMatrix*> params = trainable(p, false, true);
  OptimState state;
  const AdamWConfig ac{0.9, 0.999, 1e-8, cfg.weight_decay};
  const LrSchedule sched{cfg.base_lr, static_cast<double>(cfg.epochs), static_cast<double>(cfg.warmup_epochs)};
  const double total_steps = static_cast<double>(cfg.epochs * batches);
  const SplitRng shuffle_rng = SplitRng(cfg.seed).child("shuffle");

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffled(n, shuffle_rng.child(epoch));
    EpochLosses rec;
    rec.epoch = epoch + 1;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(b * bs),
                                    perm.begin() + static_cast<std::ptrdiff_t>((b + 1) * bs));
      std::sort(rows.begin(), rows.end());
      const ModalBatch batch = data.subset(rows);
      ModelParams g = zeros_like(p);
      const LossComponents c = ssl_step(p, batch, cfg, step_rng(cfg, epoch, b), &g);
      const std::string where = "pretrain: epoch " + std::to_string(epoch + 1) + " batch " + std::to_string(b + 1);
      if (!finite(c)) throw NumericError(where + ": non-finite loss");
      std::vector<DenseMatrix*> gs = trainable(g, false, true);
      if (!all_finite(gs)) throw NumericError(where + ": non-finite gradient");
      ++step;
      rec.lr = lr_at(static_cast<double>(step) / total_steps, sched);
      adamw_step(params, gs, state, ac, rec.lr);
      if (!all_finite(params)) throw NumericError(where + ": parameters became non-finite");
      rec.mean.cross_modal += c.cross_modal;
      rec.mean.intra_modal += c.intra_modal;
      rec.mean.degradation += c.degradation;
      rec.mean.fusion += c.fusion;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    rec.mean.cross_modal *= inv;
    rec.mean.intra_modal *= inv;
    rec.mean.degradation *= inv;
    rec.mean.fusion *= inv;
    rec.total = total_loss(rec.mean, cfg.loss);
    out.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return out;
}

LossComponents pretrain_losses(const ModelParams& params, const ModalBatch& batch, const TrainConfig& cfg,
                               std::size_t epoch) {
  cfg.validate();
  batch.validate();
  return ssl_step(params, batch, cfg, step_rng(cfg, epoch, 0), nullptr);
}

FusedFeatures fused_features(const ModelParams& params, const ModalBatch& batch, FusionMode mode, std::size_t chunk) {
  batch.validate();
  const std::size_t n = batch.size();
  if (chunk == 0) chunk = n == 0 ? 1 : n;
  FusedFeatures out;
  const std::size_t d = params.dims.feature_dim;
  for (auto& z : out.z) z = DenseMatrix(n, d);
  out.gates = DenseMatrix(n, kNumModalities);
  out.fused = DenseMatrix(n, d);
  out.degenerate.assign(n, false);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t stop = std::min(n, start + chunk);
    std::vector<std::size_t> rows(stop - start);
    std::iota(rows.begin(), rows.end(), start);
    const ModalBatch part = batch.subset(rows);
    DenseMatrix z[kNumModalities];
    const DenseMatrix* zp[kNumModalities];
    for (Modality m : kModalities) {
      z[index_of(m)] = encode(params, m, part.block(m));
      zp[index_of(m)] = &z[index_of(m)];
    }
    const FusionForward fwd =
        fusion_forward(zp, params.gate_w, params.gate_b, mode == FusionMode::kAdaptive, part.availability);
    const DenseMatrix& g = fwd.gates;
    const FusionResult& fr = fwd.result;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t i = 0; i < kNumModalities; ++i) {
        std::copy(z[i].row(r).begin(), z[i].row(r).end(), out.z[i].row(start + r).begin());
        out.gates(start + r, i) = g(r, i);
      }
      std::copy(fr.fused.row(r).begin(), fr.fused.row(r).end(), out.fused.row(start + r).begin());
      out.degenerate[start + r] = fr.degenerate[r];
    }
  }
  return out;
}

DenseMatrix classifier_logits(const ModelParams& params, const DenseMatrix& fused) {
  return affine_forward(fused, params.cls_w, params.cls_b);
}

namespace {

std::vector<int> argmax_rows(const DenseMatrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace

std::vector<int> predict(const ModelParams& params, const ModalBatch& batch, FusionMode mode) {
  return argmax_rows(classifier_logits(params, fused_features(params, batch, mode).fused));
}

double accuracy_percent(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw ShapeError("accuracy_percent: length mismatch");
  if (labels.empty()) throw ConfigError("accuracy_percent: empty evaluation set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i] ? 1 : 0;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(labels.size());
}

double evaluate_accuracy(const ModelParams& params, const LabeledSet& data, FusionMode mode,
                         const DegradationSpec& degradation) {
  if (data.size() == 0) throw ConfigError("evaluate_accuracy: empty split");
  const DegradedBatch db = apply_degradation(data.inputs, degradation);
  return accuracy_percent(predict(params, db.batch, mode), data.labels);
}

SupervisedResult linear_probe(const ModelParams& params, const LabeledSet& train, const LabeledSet& test,
                              const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0 || test.size() == 0) throw ConfigError("linear_probe: empty split");
  SupervisedResult out{params, 0.0, 0.0};
  ModelParams& p = out.params;
  const DenseMatrix feats = fused_features(p, train.inputs, cfg.fusion).fused;
  const std::size_t n = train.size();
  const std::size_t bs = std::min(cfg.batch_size, n);
  const std::size_t batches = (n + bs - 1) / bs;
  std::vector<DenseMatrix*> cls = trainable(p, true, false);
  OptimState state;
  const AdamWConfig ac{0.9, 0.999, 1e-8, cfg.weight_decay};
  const LrSchedule sched{cfg.probe_lr, static_cast<double>(cfg.probe_epochs), 0.0};
  const SplitRng rng = SplitRng(cfg.seed).child("probe");
  std::size_t step = 0;
  const double total_steps = static_cast<double>(cfg.probe_epochs * batches);
  for (std::size_t epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffled(n, rng.child(epoch));
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * bs, hi = std::min(n, lo + bs);
      DenseMatrix x(hi - lo, feats.cols());
      std::vector<int> y(hi - lo);
      for (std::size_t r = lo; r < hi; ++r) {
        std::copy(feats.row(perm[r]).begin(), feats.row(perm[r]).end(), x.row(r - lo).begin());
        y[r - lo] = train.labels[perm[r]];
      }
      const CrossEntropy ce = cross_entropy(classifier_logits(p, x), y);
      if (!std::isfinite(ce.value)) {
        throw NumericError("linear_probe: epoch " + std::to_string(epoch + 1) + ": non-finite loss");
      }
      AffineGrads ag = affine_backward(ce.grad_logits, x, p.cls_w, false);
      const std::vector<const DenseMatrix*> gs = {&ag.dw, &ag.db};
      ++step;
      adamw_step(cls, gs, state, ac, lr_at(static_cast<double>(step) / total_steps, sched));
    }
  }
  out.train_accuracy = accuracy_percent(argmax_rows(classifier_logits(p, feats)), train.labels);
  out.test_accuracy = evaluate_accuracy(p, test, cfg.fusion);
  return out;
}

SupervisedResult full_finetune(const ModelParams& params, const LabeledSet& train, const LabeledSet& test,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0 || test.size() == 0) throw ConfigError("full_finetune: empty split");
  SupervisedResult out{params, 0.0, 0.0};
  ModelParams& p = out.params;
  const std::size_t n = train.size();
  const std::size_t bs = std::min(cfg.batch_size, n);
  const std::size_t batches = (n + bs - 1) / bs;
  std::vector<DenseMatrix*> all = trainable(p, true, true);
  OptimState state;
  const AdamWConfig ac{0.9, 0.999, 1e-8, cfg.weight_decay};
  const LrSchedule sched{cfg.finetune_lr, static_cast<double>(cfg.finetune_epochs), 0.0};
  const SplitRng rng = SplitRng(cfg.seed).child("finetune");
  std::size_t step = 0;
  const double total_steps = static_cast<double>(cfg.finetune_epochs * batches);
  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffled(n, rng.child(epoch));
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(b * bs),
                                    perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, (b + 1) * bs)));
      const LabeledSet part = train.subset(rows);
      DenseMatrix z[kNumModalities];
      const DenseMatrix* zp[kNumModalities];
      EncoderCache ec[kNumModalities];
      for (Modality m : kModalities) {
        z[index_of(m)] = encode(p, m, part.inputs.block(m), &ec[index_of(m)]);
        zp[index_of(m)] = &z[index_of(m)];
      }
      const bool adaptive = cfg.fusion == FusionMode::kAdaptive;
      const FusionForward fwd = fusion_forward(zp, p.gate_w, p.gate_b, adaptive, part.inputs.availability);
      const FusionResult& fr = fwd.result;
      const CrossEntropy ce = cross_entropy(classifier_logits(p, fr.fused), part.labels);
      if (!std::isfinite(ce.value)) {
        throw NumericError("full_finetune: epoch " + std::to_string(epoch + 1) + ": non-finite loss");
      }
      ModelParams grads = zeros_like(p);
      AffineGrads ag = affine_backward(ce.grad_logits, fr.fused, p.cls_w, true);
      grads.cls_w = std::move(ag.dw);
      grads.cls_b = std::move(ag.db);
      FusionBackward fg = fusion_backward(zp, p.gate_w, fwd, ag.dx, adaptive, part.inputs.availability);
      grads.gate_w = std::move(fg.dgate_w);
      grads.gate_b = std::move(fg.dgate_b);
      for (Modality m : kModalities) encode_backward(p, ec[index_of(m)], fg.dz[index_of(m)], grads);
      std::vector<DenseMatrix*> gs = trainable(grads, true, true);
      ++step;
      adamw_step(all, gs, state, ac, lr_at(static_cast<double>(step) / total_steps, sched));
    }
  }
  out.train_accuracy = evaluate_accuracy(p, train, cfg.fusion);
  out.test_accuracy = evaluate_accuracy(p, test, cfg.fusion);
  return out;
}

}  // namespace rcmcl
