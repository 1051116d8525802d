// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "rcmcl/degrade.hpp"
#include "rcmcl/fusion.hpp"
#include "rcmcl/losses.hpp"
#include "rcmcl/ops.hpp"
#include "rcmcl/parallel.hpp"
#include "rcmcl/robustness.hpp"
#include "rcmcl/trainer.hpp"

using namespace rcmcl;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail, double secs) {
  if (!pass) ++failures;
  std::printf("[%s] criterion %d %-26s %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str(),
              secs);
  std::fflush(stdout);
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------- 1

void metric_oracle() {
  const auto t0 = Clock::now();
  // Accuracy cells (all three, R&P missing) and printed RDP per row.
  struct Row {
    const char* method;
    double clean, rp, printed_rdp;
  };
  const Row rows[] = {{"supervised", 85.9, 45.2, 47.5}, {"baseline", 82.5, 51.0, 38.3}, {"full", 86.7, 65.1, 25.0}};
  double worst = 0.0;
  for (const Row& r : rows) worst = std::max(worst, std::abs(rdp(r.clean, r.rp) - r.printed_rdp));
  // Gains recomputed from the printed RDPs.
  const double g_base = rgs(47.5, 38.3), g_full = rgs(47.5, 25.0);
  const bool rgs_exact = std::round(g_base * 10) / 10 == 9.2 && std::round(g_full * 10) / 10 == 22.5 &&
                         std::abs(g_base - 9.2) < 1e-9 && std::abs(g_full - 22.5) < 1e-9;
  const double secs = since(t0);
  report(1, "metric oracle", worst <= 0.2 && rgs_exact && secs < 1.0,
         fmt("max |rdp - printed| = %.3f pp", worst) + fmt(", rgs = %.1f", g_base) + fmt(" / %.1f", g_full), secs);
}

// ---------------------------------------------------------------- 2

struct Worst {
  double err = 0.0;
  std::string name;
  std::size_t checks = 0;
  void add(const std::string& n, double e) {
    ++checks;
    if (!(e <= err)) {
      err = e;
      name = n;
    }
  }
};

DenseMatrix unit(const DenseMatrix& u) { return l2_normalize_rows(u).y; }
DenseMatrix through_norm(const DenseMatrix& u, const DenseMatrix& dh) {
  return l2_normalize_rows_backward(dh, l2_normalize_rows(u));
}

void gradient_suite() {
  const auto t0 = Clock::now();
  constexpr std::size_t kN = 8;
  const ModelDims dims = fixture::tiny_dims();  // d_h = 8
  Worst w;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SplitRng rng = SplitRng(seed).child("grad-suite");
    const auto rnd = [&](std::size_t r, std::size_t c, double s = 1.0) { return oracle::random_matrix(r, c, rng, s); };
    const std::string sfx = " seed " + std::to_string(seed);

    // Kernels.
    {
      const DenseMatrix x = rnd(kN, 5), wt = rnd(5, 4), b = rnd(1, 4), probe = rnd(kN, 4);
      const AffineGrads g = affine_backward(probe, x, wt, true);
      const auto f = [&](const DenseMatrix& xx, const DenseMatrix& ww, const DenseMatrix& bb) {
        return oracle::weighted_sum(affine_forward(xx, ww, bb), probe);
      };
      w.add("affine.dx" + sfx, oracle::grad_error(x, g.dx, [&](const DenseMatrix& v) { return f(v, wt, b); }));
      w.add("affine.dw" + sfx, oracle::grad_error(wt, g.dw, [&](const DenseMatrix& v) { return f(x, v, b); }));
      w.add("affine.db" + sfx, oracle::grad_error(b, g.db, [&](const DenseMatrix& v) { return f(x, wt, v); }));
    }
    for (Activation act : {Activation::kSigmoid, Activation::kTanh, Activation::kRelu, Activation::kNone}) {
      DenseMatrix x = rnd(kN, 5, 2.0);
      for (double& v : x.values())
        if (std::abs(v) < 1e-3) v = 0.5;
      const DenseMatrix probe = rnd(kN, 5);
      const DenseMatrix dx = activation_backward(probe, activate(x, act), act);
      w.add(std::string("activation.") + std::string(activation_name(act)) + sfx,
            oracle::grad_error(x, dx, [&](const DenseMatrix& v) { return oracle::weighted_sum(activate(v, act), probe); }));
    }
    {
      const DenseMatrix x = rnd(kN, 8), probe = rnd(kN, 8);
      w.add("l2_normalize" + sfx, oracle::grad_error(x, l2_normalize_rows_backward(probe, l2_normalize_rows(x)),
                                                     [&](const DenseMatrix& v) {
                                                       return oracle::weighted_sum(l2_normalize_rows(v).y, probe);
                                                     }));
      w.add("batch_standardize" + sfx,
            oracle::grad_error(x, batch_standardize_backward(probe, batch_standardize(x)), [&](const DenseMatrix& v) {
              return oracle::weighted_sum(batch_standardize(v).y, probe);
            }));
      const DenseMatrix gx = rnd(kN * 4, 3), gp = rnd(kN, 3);
      w.add("group_mean" + sfx, oracle::grad_error(gx, group_mean_rows_backward(gp, 4), [&](const DenseMatrix& v) {
              return oracle::weighted_sum(group_mean_rows(v, 4), gp);
            }));
    }

    ModelParams p = fixture::generic_params(dims, seed);
    const ModalBatch batch = fixture::random_batch(dims.shape, kN, rng);
    for (Modality m : kModalities) {
      const DenseMatrix probe = rnd(kN, dims.feature_dim);
      EncoderCache cache;
      (void)encode(p, m, batch.block(m), &cache);
      ModelParams g = zeros_like(p);
      encode_backward(p, cache, probe, g);
      const auto rep = fixture::check_model_gradients(
          p, g, [&] { return oracle::weighted_sum(encode(p, m, batch.block(m)), probe); },
          {"enc_" + std::string(1, static_cast<char>(std::tolower(modality_letter(m))))});
      w.add(rep.worst_name + sfx, rep.worst);
    }
    for (Modality m : kModalities) {
      const DenseMatrix z = rnd(kN, dims.feature_dim), probe = rnd(kN, dims.proj_dim);
      ProjectionCache cache;
      (void)project(p.head(m), z, &cache);
      ModelParams g = zeros_like(p);
      const DenseMatrix dz = project_backward(p.head(m), cache, probe, g.head(m));
      const std::string prefix = std::string("proj_") + static_cast<char>(std::tolower(modality_letter(m)));
      const auto rep = fixture::check_model_gradients(
          p, g, [&] { return oracle::weighted_sum(project(p.head(m), z), probe); }, {prefix});
      w.add(rep.worst_name + sfx, rep.worst);
      w.add(prefix + ".dz" + sfx, oracle::grad_error(z, dz, [&](const DenseMatrix& v) {
              return oracle::weighted_sum(project(p.head(m), v), probe);
            }));
    }
    {
      const DenseMatrix z = rnd(kN, dims.feature_dim), probe = rnd(kN, dims.shape.skeleton_width());
      MlpCache cache;
      (void)decode_skeleton(p.dec_s, z, &cache);
      ModelParams g = zeros_like(p);
      const DenseMatrix dz = mlp_backward(p.dec_s, cache, probe, g.dec_s, true);
      const auto rep = fixture::check_model_gradients(
          p, g, [&] { return oracle::weighted_sum(decode_skeleton(p.dec_s, z), probe); }, {"dec_s"});
      w.add(rep.worst_name + sfx, rep.worst);
      w.add("dec_s.dz" + sfx, oracle::grad_error(z, dz, [&](const DenseMatrix& v) {
              return oracle::weighted_sum(decode_skeleton(p.dec_s, v), probe);
            }));
    }
    {
      DenseMatrix z[3];
      const DenseMatrix* zp[3];
      for (int m = 0; m < 3; ++m) {
        z[m] = rnd(kN, 5);
        zp[m] = &z[m];
      }
      const DenseMatrix gw = rnd(3, 5, 0.5), gb = rnd(1, 3), probe = rnd(kN, 5);
      for (bool adaptive : {true, false}) {
        const FusionForward fwd = fusion_forward(zp, gw, gb, adaptive);
        const FusionBackward bw = fusion_backward(zp, gw, fwd, probe, adaptive);
        const auto value = [&](const DenseMatrix* const zz[3], const DenseMatrix& ww, const DenseMatrix& bb) {
          return oracle::weighted_sum(fusion_forward(zz, ww, bb, adaptive).result.fused, probe);
        };
        const std::string tag = adaptive ? "fusion.adaptive" : "fusion.average";
        if (adaptive) {
          w.add(tag + ".gate_w" + sfx, oracle::grad_error(gw, bw.dgate_w, [&](const DenseMatrix& v) {
                  return value(zp, v, gb);
                }));
          w.add(tag + ".gate_b" + sfx, oracle::grad_error(gb, bw.dgate_b, [&](const DenseMatrix& v) {
                  return value(zp, gw, v);
                }));
        }
        for (int m = 0; m < 3; ++m) {
          w.add(tag + ".dz" + sfx, oracle::grad_error(z[m], bw.dz[m], [&](const DenseMatrix& v) {
                  const DenseMatrix* zz[3] = {zp[0], zp[1], zp[2]};
                  zz[m] = &v;
                  return value(zz, gw, gb);
                }));
        }
      }
    }

    // Losses.
    {
      const DenseMatrix ua = rnd(kN, 8), ub = rnd(kN, 8);
      const double tau = 0.2;
      const PairLoss l = info_nce_pair(unit(ua), unit(ub), tau);
      w.add("info_nce.a" + sfx, oracle::grad_error(ua, through_norm(ua, l.grad_a), [&](const DenseMatrix& v) {
              return info_nce_pair(unit(v), unit(ub), tau).value;
            }));
      w.add("info_nce.b" + sfx, oracle::grad_error(ub, through_norm(ub, l.grad_b), [&](const DenseMatrix& v) {
              return info_nce_pair(unit(ua), unit(v), tau).value;
            }));
    }
    {
      const DenseMatrix a = rnd(kN, 8), b = rnd(kN, 8);
      const BarlowLoss g = barlow_loss(a, b, 5e-3);
      w.add("barlow.a" + sfx,
            oracle::grad_error(a, g.grad_a, [&](const DenseMatrix& v) { return barlow_loss(v, b, 5e-3).value; }));
      w.add("barlow.b" + sfx,
            oracle::grad_error(b, g.grad_b, [&](const DenseMatrix& v) { return barlow_loss(a, v, 5e-3).value; }));
    }
    {
      const DenseMatrix x = rnd(kN, dims.shape.skeleton_width()), z = rnd(kN, dims.feature_dim);
      const ReconstructionLoss rl = degradation_loss(x, z, p.dec_s);
      w.add("degradation.dz" + sfx, oracle::grad_error(z, rl.grad_feature, [&](const DenseMatrix& v) {
              return degradation_loss(x, v, p.dec_s).value;
            }));
      ModelParams g = zeros_like(p);
      g.dec_s = rl.grad_decoder;
      const auto rep =
          fixture::check_model_gradients(p, g, [&] { return degradation_loss(x, z, p.dec_s).value; }, {"dec_s"});
      w.add("degradation." + rep.worst_name + sfx, rep.worst);
    }
    {
      DenseMatrix z[3], uh[3], h[3];
      for (int m = 0; m < 3; ++m) {
        z[m] = rnd(kN, dims.feature_dim);
        uh[m] = rnd(kN, dims.proj_dim);
        h[m] = unit(uh[m]);
      }
      const auto eval = [&](const DenseMatrix* zz, const DenseMatrix* hh) {
        FusionInputs in;
        for (int m = 0; m < 3; ++m) {
          in.z[m] = &zz[m];
          in.h[m] = &hh[m];
        }
        return fusion_alignment_loss(in, p.gate_w, p.gate_b, p.proj_f, 0.3);
      };
      const FusionLoss fl = eval(z, h);
      ModelParams g = zeros_like(p);
      g.gate_w = fl.grad_gate_w;
      g.gate_b = fl.grad_gate_b;
      g.proj_f = fl.grad_proj_f;
      const auto rep = fixture::check_model_gradients(p, g, [&] { return eval(z, h).value; }, {"gate.", "proj_f"});
      w.add("fusion_loss." + rep.worst_name + sfx, rep.worst);
      for (int m = 0; m < 3; ++m) {
        w.add("fusion_loss.dz" + sfx, oracle::grad_error(z[m], fl.grad_z[m], [&](const DenseMatrix& v) {
                DenseMatrix zz[3] = {z[0], z[1], z[2]};
                zz[m] = v;
                return eval(zz, h).value;
              }));
        w.add("fusion_loss.dh" + sfx, oracle::grad_error(uh[m], through_norm(uh[m], fl.grad_h[m]),
                                                         [&](const DenseMatrix& v) {
                                                           DenseMatrix hh[3] = {h[0], h[1], h[2]};
                                                           hh[m] = unit(v);
                                                           return eval(z, hh).value;
                                                         }));
      }
    }
    {
      const DenseMatrix logits = rnd(kN, 5, 3.0);
      std::vector<int> y(kN);
      for (int& v : y) v = static_cast<int>(rng.uniform_index(5));
      const CrossEntropy ce = cross_entropy(logits, y);
      w.add("cross_entropy" + sfx, oracle::grad_error(logits, ce.grad_logits, [&](const DenseMatrix& v) {
              return cross_entropy(v, y).value;
            }));
    }
  }
  const double secs = since(t0);
  report(2, "gradient suite", w.err < 1e-4 && secs < 120.0,
         std::to_string(w.checks) + " checks, worst rel err " + fmt("%.2e", w.err) + " (" + w.name + ")", secs);
}

// ---------------------------------------------------------------- 3

void closed_forms() {
  const auto t0 = Clock::now();
  SplitRng rng(33);
  std::vector<std::string> bad;

  const DenseMatrix one = oracle::random_unit_rows(1, 8, rng);
  if (info_nce_pair(one, one, 0.07).value != 0.0 ||
      info_nce_pair(one, oracle::random_unit_rows(1, 8, rng), 0.07).value != 0.0) {
    bad.push_back("infonce-n1");
  }

  double inv = 0.0;
  for (int i = 0; i < 5; ++i) {
    const DenseMatrix h = oracle::random_matrix(16, 8, rng);
    inv = std::max(inv, barlow_loss(h, h, 5e-3).invariance);
  }
  if (!(inv < 1e-12)) bad.push_back("barlow-self");

  double mean_err = 0.0, scale_err = 0.0;
  for (int i = 0; i < 5; ++i) {
    DenseMatrix z[3];
    const DenseMatrix* zp[3];
    for (int m = 0; m < 3; ++m) {
      z[m] = oracle::random_matrix(6, 5, rng);
      zp[m] = &z[m];
    }
    const double c = 0.1 + rng.uniform();
    const DenseMatrix equal(6, 3, c);
    const DenseMatrix fused = fuse(zp, equal).fused;
    for (std::size_t k = 0; k < fused.size(); ++k) {
      mean_err = std::max(mean_err, std::abs(fused[k] - (z[0][k] + z[1][k] + z[2][k]) / 3.0));
    }
    DenseMatrix g(6, 3), g_scaled(6, 3);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = 0.05 + 0.9 * rng.uniform();
    const double s = 0.01 + 10.0 * rng.uniform();
    for (std::size_t k = 0; k < g.size(); ++k) g_scaled[k] = s * g[k];
    scale_err = std::max(scale_err, max_abs_diff(fuse(zp, g).fused, fuse(zp, g_scaled).fused));
  }
  if (!(mean_err < 1e-12)) bad.push_back("equal-gate-mean");
  if (!(scale_err < 1e-12)) bad.push_back("gate-scale");
  if (sigmoid(0.0) != 0.5) bad.push_back("sigmoid0");
  const std::vector<double> zz = {1.0, 2.0}, w0 = {0.0, 0.0};
  if (gate(zz, w0, 0.0) != 0.5) bad.push_back("gate0");

  const double secs = since(t0);
  std::string detail = fmt("barlow self inv %.1e", inv) + fmt(", mean err %.1e", mean_err) +
                       fmt(", scale err %.1e", scale_err);
  for (const auto& b : bad) detail += " FAILED:" + b;
  report(3, "closed-form identities", bad.empty() && secs < 5.0, detail, secs);
}

// ---------------------------------------------------------------- 4

void oracle_equivalence() {
  const auto t0 = Clock::now();
  double nce = 0.0, bt = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SplitRng rng = SplitRng(seed).child("oracle-eq");
    const std::size_t n = 1 + rng.uniform_index(16), d = 2 + rng.uniform_index(15);
    const double tau = 0.05 + rng.uniform();
    const DenseMatrix a = oracle::random_unit_rows(n, d, rng), b = oracle::random_unit_rows(n, d, rng);
    nce = std::max(nce, std::abs(info_nce_pair(a, b, tau).value - oracle::info_nce(a, b, tau)));
    const std::size_t nb = std::max<std::size_t>(2, n);
    const DenseMatrix h1 = oracle::random_matrix(nb, d, rng), h2 = oracle::random_matrix(nb, d, rng);
    bt = std::max(bt, std::abs(barlow_loss(h1, h2, 5e-3).value - oracle::barlow(h1, h2, 5e-3)));
  }
  const double secs = since(t0);
  report(4, "oracle equivalence", nce < 1e-10 && bt < 1e-10 && secs < 10.0,
         fmt("max |info_nce - loop| %.1e", nce) + fmt(", max |barlow - loop| %.1e", bt), secs);
}

// ---------------------------------------------------------------- 5-8

struct Bench {
  LabeledSet train, test;
  ModelDims dims;
  TrainConfig base;
};

Bench make_bench() {
  GeneratorSpec spec;  // K = 10
  const Dataset ds = generate(spec, 250);
  Bench b;
  std::tie(b.train, b.test) = split(ds.samples, 0.8, 11);  // 200 / 50 per class
  b.dims.shape = spec.shape();
  b.dims.num_classes = spec.num_classes;
  b.base.epochs = 20;
  b.base.warmup_epochs = 2;
  b.base.batch_size = 64;
  b.base.base_lr = 2e-3;
  return b;
}

// Mean cosine over cross-modality pairs of distinct samples, same class
// minus different class.
double alignment_gap(const ModelParams& p, const LabeledSet& set) {
  DenseMatrix h[3];
  for (Modality m : kModalities) h[index_of(m)] = project(p.head(m), encode(p, m, set.inputs.block(m)));
  double same = 0.0, diff = 0.0, n_same = 0.0, n_diff = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      const DenseMatrix cos = matmul_nt(h[a], h[b]);
      for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = 0; j < set.size(); ++j) {
          if (i == j) continue;
          if (set.labels[i] == set.labels[j]) {
            same += cos(i, j);
            n_same += 1.0;
          } else {
            diff += cos(i, j);
            n_diff += 1.0;
          }
        }
    }
  return same / n_same - diff / n_diff;
}

std::array<double, 3> mean_gates(const ModelParams& p, const ModalBatch& batch) {
  const DenseMatrix g = fused_features(p, batch, FusionMode::kAdaptive).gates;
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (int m = 0; m < 3; ++m) out[m] += g(i, m) / static_cast<double>(g.rows());
  return out;
}

void training_criteria() {
  const Bench bench = make_bench();
  const std::uint64_t seeds[] = {1, 2, 3};
  const AblationConfig order[] = {AblationConfig::kFull, AblationConfig::kAmgNoDeg, AblationConfig::kPlusIntra,
                                  AblationConfig::kPlusDegradation};
  std::map<AblationConfig, double> rdp_mean;
  std::map<AblationConfig, std::string> rdp_cells;
  std::vector<ModelParams> full_models;
  double full_secs = 0.0;
  const auto t_matrix = Clock::now();
  for (AblationConfig c : order) {
    for (std::uint64_t s : seeds) {
      const auto t0 = Clock::now();
      ModelParams trained;
      const AblationCell cell = run_ablation_cell(c, bench.train, bench.test, bench.dims, bench.base, s, &trained);
      if (c == AblationConfig::kFull) {
        full_models.push_back(trained);
        full_secs += since(t0);
      }
      rdp_mean[c] += cell.rdp_headline / 3.0;
      rdp_cells[c] += fmt(rdp_cells[c].empty() ? "%.2f" : "/%.2f", cell.rdp_headline);
      std::fprintf(stderr, "  config %d seed %llu: clean %.2f%%, rdp %.2f (%.0f s)\n", static_cast<int>(c),
                   static_cast<unsigned long long>(s), cell.clean_accuracy, cell.rdp_headline, since(t0));
    }
  }
  const double matrix_secs = since(t_matrix);

  // 5: probe on pre-trained encoders vs probe on random-init encoders.
  {
    const auto t0 = Clock::now();
    double pre = 0.0, rnd = 0.0;
    std::string cells;
    for (std::size_t i = 0; i < 3; ++i) {
      TrainConfig tc = ablation_train_config(AblationConfig::kFull, bench.base);
      tc.seed = seeds[i];
      const double acc_pre = evaluate_accuracy(full_models[i], bench.test, tc.fusion);
      const double acc_rnd =
          linear_probe(init_params(bench.dims, seeds[i]), bench.train, bench.test, tc).test_accuracy;
      pre += acc_pre / 3.0;
      rnd += acc_rnd / 3.0;
      cells += fmt(cells.empty() ? "%.1f" : " %.1f", acc_pre - acc_rnd);
    }
    const double secs = full_secs + since(t0);
    report(5, "pre-training efficacy", pre - rnd >= 15.0 && secs < 600.0,
           fmt("probe %.2f%%", pre) + fmt(" vs random-init %.2f%%", rnd) + fmt(", gain %.2f pp", pre - rnd) +
               " (per seed " + cells + ")",
           secs);
  }

  // 6: headline RDP ordering across the ablation rows.
  {
    const double r7 = rdp_mean[AblationConfig::kFull], r6 = rdp_mean[AblationConfig::kAmgNoDeg],
                 r5 = rdp_mean[AblationConfig::kPlusDegradation], r4 = rdp_mean[AblationConfig::kPlusIntra];
    const bool ok = r7 <= r6 && r6 <= r4 && r7 <= r5;
    std::string detail = fmt("mean RDP c7 %.2f", r7) + fmt(" <= c6 %.2f", r6) + fmt(" <= c4 %.2f", r4) +
                         fmt(", c7 <= c5 %.2f", r5) + " [c7 " + rdp_cells[AblationConfig::kFull] + ", c6 " +
                         rdp_cells[AblationConfig::kAmgNoDeg] + "]";
    report(6, "robustness ordering", ok && matrix_secs < 1800.0, detail, matrix_secs);
  }

  // 7: gates respond to a zeroed skeleton stream.
  {
    const auto t0 = Clock::now();
    double ds = 0.0, dr = 0.0, dp = 0.0;
    const ModalBatch no_s = apply_degradation(bench.test.inputs, DegradationSpec::dropout("S", 0)).batch;
    for (const ModelParams& p : full_models) {
      const auto clean = mean_gates(p, bench.test.inputs);
      const auto cut = mean_gates(p, no_s);
      ds += (clean[1] - cut[1]) / clean[1] / 3.0;
      dr += (clean[0] - cut[0]) / clean[0] / 3.0;
      dp += (clean[2] - cut[2]) / clean[2] / 3.0;
    }
    report(7, "gate responsiveness", ds >= 0.30 && dr <= 0.05 && dp <= 0.05,
           fmt("G_S drop %.1f%%", 100 * ds) + fmt(", G_R drop %.1f%%", 100 * dr) + fmt(", G_P drop %.1f%%", 100 * dp),
           since(t0));
  }

  // 8: class structure across modalities in the embedding space.
  {
    const auto t0 = Clock::now();
    double trained = 0.0, initial = 0.0;
    std::string cells;
    for (std::size_t i = 0; i < 3; ++i) {
      const double gt = alignment_gap(full_models[i], bench.test);
      const double g0 = alignment_gap(init_params(bench.dims, seeds[i]), bench.test);
      trained += gt / 3.0;
      initial += g0 / 3.0;
      cells += fmt(cells.empty() ? "%.3f" : " %.3f", gt);
    }
    report(8, "cross-modal alignment", trained > 0.1 && trained > initial,
           fmt("same-class minus cross-class cosine %.3f", trained) + fmt(" (init %.3f)", initial) + " (per seed " +
               cells + ")",
           since(t0));
  }
}

// ---------------------------------------------------------------- 9

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RCMCL_CLI_PATH) + " " + args + " 2>>" + log.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    out[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(is), {}};
  }
  return out;
}

double json_drift(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return std::abs(a.get<double>() - b.get<double>());
  if (a.type() != b.type() || a.size() != b.size()) return INFINITY;
  if (a.is_object()) {
    double d = 0.0;
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key())) return INFINITY;
      d = std::max(d, json_drift(it.value(), b[it.key()]));
    }
    return d;
  }
  if (a.is_array()) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, json_drift(a[i], b[i]));
    return d;
  }
  return a == b ? 0.0 : INFINITY;
}

void determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / ("rcmcl-accept-" + std::to_string(::getpid()));
  fs::create_directories(root);
  const json cfg = {{"seed", 5},
                    {"dataset", {{"n_per_class", 20}}},
                    {"train",
                     {{"epochs", 3}, {"warmup_epochs", 1}, {"batch_size", 32}, {"base_lr", 2e-3},
                      {"probe_epochs", 10}}}};
  std::ofstream(root / "config.json") << cfg.dump(2);
  const fs::path log = root / "stderr.log";
  bool ran = true;
  const auto pipeline = [&](const std::string& name, int threads) {
    const std::string args = "--config " + (root / "config.json").string() + " --out " + (root / name).string() +
                             " --threads " + std::to_string(threads);
    for (const char* cmd : {"gen-data", "pretrain", "robustness"}) ran = ran && run_cli(std::string(cmd) + " " + args, log) == 0;
    return root / name;
  };
  const fs::path a = pipeline("t1a", 1), b = pipeline("t1b", 1), c = pipeline("t4", 4);

  bool bytes_equal = false, ckpt4_equal = false;
  double drift = INFINITY;
  if (ran) {
    bytes_equal = read_tree(a) == read_tree(b);
    ckpt4_equal = read_tree(a / "checkpoint") == read_tree(c / "checkpoint");
    drift = 0.0;
    for (const char* f : {"robustness_dropout.json", "robustness_corruption.json"}) {
      std::ifstream ia(a / f), ic(c / f);
      drift = std::max(drift, json_drift(json::parse(ia), json::parse(ic)));
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  report(9, "determinism", ran && bytes_equal && drift < 1e-9,
         std::string("threads 1 reruns byte-identical: ") + (bytes_equal ? "yes" : "no") +
             fmt(", threads 4 report drift %.1e", drift) + ", threads 4 checkpoint identical: " +
             (ckpt4_equal ? "yes" : "no"),
         since(t0));
}

}  // namespace

int main() {
  configure_allocator();
  metric_oracle();
  gradient_suite();
  closed_forms();
  oracle_equivalence();
  training_criteria();
  determinism();
  std::printf("acceptance: %d of 9 criteria passed\n", 9 - failures);
  return failures;
}
