// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nsteer/errors.hpp"
#include "nsteer/io.hpp"

namespace nsteer {

namespace {

constexpr std::uint64_t kStreamOffgrid = 6;

// Runs body(q) for q in [0, n), rethrowing the first (lowest index) failure.
template <typename F>
void for_items(std::ptrdiff_t n, Execution exec, F&& body) {
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t q = 0; q < n; ++q) body(q);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t q = 0; q < n; ++q) {
    try {
      body(q);
    } catch (...) {
      errors[static_cast<std::size_t>(q)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool finite(const LossTerms& t) {
  return std::isfinite(t.logmag) && std::isfinite(t.phase) && std::isfinite(t.time) && std::isfinite(t.causal) &&
         std::isfinite(t.total);
}

std::string describe_batch(std::int64_t epoch, std::size_t index, const BatchSpec& b, const LossTerms& t) {
  nlohmann::json j = {{"epoch", epoch},
                      {"batch", index},
                      {"nodes", b.nodes},
                      {"freq_bins", b.freq_bins},
                      {"logmag", std::isfinite(t.logmag) ? nlohmann::json(t.logmag) : nlohmann::json("nan")},
                      {"phase", std::isfinite(t.phase) ? nlohmann::json(t.phase) : nlohmann::json("nan")},
                      {"time", std::isfinite(t.time) ? nlohmann::json(t.time) : nlohmann::json("nan")},
                      {"causal", std::isfinite(t.causal) ? nlohmann::json(t.causal) : nlohmann::json("nan")}};
  return j.dump();
}

void check_compatible(const NeuralSteerer& model, const GridMeasurementSet& set) {
  if (model.num_channels() != static_cast<std::size_t>(set.num_channels())) {
    throw FormatError("model has " + std::to_string(model.num_channels()) + " channels but the dataset has " +
                      std::to_string(set.num_channels()));
  }
  if (!(model.axis() == set.axis)) {
    throw FormatError("model frequency axis (F = " + std::to_string(model.axis().num_bins()) +
                      ") does not match the dataset (F = " + std::to_string(set.num_bins()) + ")");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs_max < 0) throw std::invalid_argument("epochs_max must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr0 > 0.0) || !(lr_decay > 0.0)) throw std::invalid_argument("lr0 and lr_decay must be positive");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (freq_subset_size < 0) throw std::invalid_argument("freq_subset_size must be >= 0");
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be >= 0");
  weights.validate();
}

OffgridSample sample_offgrid(const NeuralSteerer& model, int count, std::uint64_t seed, std::int64_t epoch,
                             std::int64_t batch) {
  auto rng = seeded_rng({seed, kStreamOffgrid, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch)});
  OffgridSample s;
  s.axis = model.axis();
  if (model.config().freq_mode == FreqMode::Continuous) {
    const int n = model.axis().fft_size();
    const int sizes[3] = {std::max(4, n / 2), n, 2 * n};
    const int pick = static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
    s.axis = FrequencyAxis(model.axis().sample_rate_hz(), sizes[pick] / 2 + 1);
  }
  s.doas.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) s.doas.push_back(sample_sphere(rng));
  return s;
}

BatchGradient batch_gradient(const NeuralSteerer& model, const GridMeasurementSet& set, const BatchSpec& batch,
                             const OffgridSample& offgrid, const LossWeights& weights, Execution exec) {
  const std::size_t nb = batch.nodes.size();
  const bool use_offgrid = weights.lambda_causal > 0.0 && !offgrid.doas.empty();
  const std::size_t no = use_offgrid ? offgrid.doas.size() : 0;
  const std::size_t items = nb + no;

  std::vector<ModelOutput> outs(items);
  std::vector<FieldTrace> traces(items);
  std::vector<Spectra> refs(nb);
  for_items(static_cast<std::ptrdiff_t>(items), exec, [&](std::ptrdiff_t q) {
    const auto j = static_cast<std::size_t>(q);
    if (j < nb) {
      const int node = batch.nodes[j];
      outs[j] = field_forward(model, set.node_doa(node), model.axis(), &traces[j]);
      refs[j] = set.node_spectra(node);
    } else {
      outs[j] = field_forward(model, offgrid.doas[j - nb], offgrid.axis, &traces[j]);
    }
  });

  std::vector<Spectra> preds(nb), off(no);
  for (std::size_t j = 0; j < nb; ++j) preds[j] = outs[j].h_hat;
  for (std::size_t j = 0; j < no; ++j) off[j] = outs[nb + j].h_hat;

  LossBatch lb{preds, refs, batch.freq_bins, off, {}};
  if (lb.freq_bins.empty()) {
    lb.freq_bins.resize(static_cast<std::size_t>(set.num_bins()));
    for (int k = 0; k < set.num_bins(); ++k) lb.freq_bins[static_cast<std::size_t>(k)] = k;
  }
  LossGradients lg;
  BatchGradient out;
  out.terms = total_loss(lb, weights, &lg);

  const auto np = static_cast<Eigen::Index>(model.num_parameters());
  // Per-item buffers are reused across calls; fresh large allocations per step
  // dominate the runtime otherwise.
  thread_local std::vector<Eigen::VectorXd> partial;
  if (partial.size() < items) partial.resize(items);
  for_items(static_cast<std::ptrdiff_t>(items), exec, [&](std::ptrdiff_t q) {
    const auto j = static_cast<std::size_t>(q);
    const Spectra& dh = j < nb ? lg.predictions[j] : lg.offgrid[j - nb];
    if (partial[j].size() != np) partial[j].resize(np);
    partial[j].setZero();
    if (dh.size() == 0) return;
    field_backward(model, traces[j], outs[j], dh, {partial[j].data(), static_cast<std::size_t>(np)});
  });
  out.grad = Eigen::VectorXd::Zero(np);
  for (std::size_t j = 0; j < items; ++j) out.grad += partial[j];
  return out;
}

double validation_loss(const NeuralSteerer& model, const GridMeasurementSet& set, std::span<const int> nodes,
                       const LossWeights& weights, Execution exec) {
  if (nodes.empty()) throw std::invalid_argument("validation_loss: no nodes");
  LossWeights w = weights;
  w.epsilon_freq = 0.0;
  w.lambda_causal = 0.0;
  std::vector<Spectra> preds(nodes.size()), refs(nodes.size());
  for_items(static_cast<std::ptrdiff_t>(nodes.size()), exec, [&](std::ptrdiff_t q) {
    const auto j = static_cast<std::size_t>(q);
    preds[j] = field_forward(model, set.node_doa(nodes[j]), model.axis()).h_hat;
    refs[j] = set.node_spectra(nodes[j]);
  });
  std::vector<int> bins(static_cast<std::size_t>(set.num_bins()));
  for (int k = 0; k < set.num_bins(); ++k) bins[static_cast<std::size_t>(k)] = k;
  const LossTerms t = total_loss(LossBatch{preds, refs, bins, {}, {}}, w);
  return t.total / static_cast<double>(nodes.size());
}

std::string training_log_csv(std::span<const EpochLog> log, bool header) {
  std::string s = header ? "epoch,lr,logmag,phase,time,causal,total,validation,wall_seconds\n" : "";
  char buf[512];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                  static_cast<long long>(e.epoch), e.learning_rate, e.train.logmag, e.train.phase, e.train.time,
                  e.train.causal, e.train.total, e.validation, e.wall_seconds);
    s += buf;
  }
  return s;
}

void write_training_log(const std::string& path, std::span<const EpochLog> log) {
  write_file_atomic(path, training_log_csv(log, true));
}

namespace {

TrainResult run(NeuralSteerer model, NeuralSteerer best, TrainingSnapshot snap, const GridMeasurementSet& set,
                const Split& split, const TrainConfig& cfg) {
  cfg.validate();
  check_compatible(model, set);
  if (split.validation.empty()) throw std::invalid_argument("train: validation split is empty");
  if (split.train.empty()) throw std::invalid_argument("train: training split is empty");

  const int batch_size = std::min<int>(cfg.batch_size, static_cast<int>(split.train.size()));
  // DF batches always cover the full axis.
  const bool cf = model.config().freq_mode == FreqMode::Continuous;
  const int subset = !cf || cfg.freq_subset_size >= set.num_bins() ? 0 : cfg.freq_subset_size;
  const BatchIterator batches(split.train, batch_size, subset, set.num_bins(), cfg.seed);
  const Eigen::VectorXd lr_scale = model.learning_rate_scale();
  Eigen::VectorXd params = model.pack();

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t epoch = snap.next_epoch; epoch < cfg.epochs_max && !snap.stopped_early; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    entry.learning_rate = snap.optimizer.learning_rate();
    const auto specs = batches.epoch(epoch);
    for (std::size_t b = 0; b < specs.size(); ++b) {
      const OffgridSample offgrid =
          sample_offgrid(model, batch_size, cfg.seed, epoch, static_cast<std::int64_t>(b));
      BatchGradient g = batch_gradient(model, set, specs[b], offgrid, cfg.weights, cfg.execution);
      if (!finite(g.terms) || !g.grad.allFinite()) {
        const std::string dump = describe_batch(epoch, b, specs[b], g.terms);
        if (!cfg.log_path.empty()) write_file_atomic(cfg.log_path + ".nan.json", dump + "\n");
        throw std::runtime_error("non-finite loss or gradient: " + dump);
      }
      if (cfg.grad_clip > 0.0) {
        const double norm = g.grad.norm();
        if (norm > cfg.grad_clip) g.grad *= cfg.grad_clip / norm;
      }
      optimizer_step(snap.optimizer, params, g.grad, lr_scale);
      model.unpack(params);
      entry.train.logmag += g.terms.logmag;
      entry.train.phase += g.terms.phase;
      entry.train.time += g.terms.time;
      entry.train.causal += g.terms.causal;
      entry.train.total += g.terms.total;
    }
    const double nbatch = static_cast<double>(std::max<std::size_t>(1, specs.size()));
    entry.train.logmag /= nbatch;
    entry.train.phase /= nbatch;
    entry.train.time /= nbatch;
    entry.train.causal /= nbatch;
    entry.train.total /= nbatch;
    optimizer_end_epoch(snap.optimizer);

    entry.validation = validation_loss(model, set, split.validation, cfg.weights, cfg.execution);
    if (!std::isfinite(entry.validation)) throw std::runtime_error("non-finite validation loss at epoch " +
                                                                    std::to_string(epoch));
    if (snap.best_epoch < 0 || entry.validation < snap.best_validation) {
      snap.best_validation = entry.validation;
      snap.best_epoch = epoch;
      snap.epochs_without_improvement = 0;
      best = model;
    } else if (++snap.epochs_without_improvement >= cfg.patience) {
      snap.stopped_early = true;
    }
    snap.next_epoch = epoch + 1;
    snap.current_params = params;
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);

    if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, best, &snap);
    if (!cfg.log_path.empty()) write_training_log(cfg.log_path, result.log);
    if (cfg.log_every > 0 && (epoch % cfg.log_every == 0 || snap.stopped_early)) {
      std::fprintf(stderr, "epoch %lld lr %.3g train %.5g val %.5g%s\n", static_cast<long long>(epoch),
                   entry.learning_rate, entry.train.total, entry.validation,
                   snap.stopped_early ? " (early stop)" : "");
    }
  }
  snap.current_params = params;
  result.model = best;
  result.final_model = model;
  result.snapshot = snap;
  return result;
}

}  // namespace

TrainResult train(const NeuralSteerer& initial, const GridMeasurementSet& set, const Split& split,
                  const TrainConfig& cfg) {
  TrainingSnapshot snap;
  snap.optimizer = make_optimizer(initial.num_parameters(), cfg.lr0, cfg.lr_decay);
  snap.current_params = initial.pack();
  snap.best_validation = std::numeric_limits<double>::infinity();
  return run(initial, initial, std::move(snap), set, split, cfg);
}

TrainResult resume(const std::string& checkpoint_path, const GridMeasurementSet& set, const Split& split,
                   const TrainConfig& cfg) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (!ck.training) throw FormatError("checkpoint '" + checkpoint_path + "' holds no training state");
  check_compatible(ck.model, set);
  NeuralSteerer current = ck.model;
  if (ck.training->current_params.size() != static_cast<Eigen::Index>(current.num_parameters())) {
    throw FormatError("checkpoint training state has the wrong parameter count");
  }
  current.unpack(ck.training->current_params);
  // The schedule constants come from the checkpoint, not from cfg.
  return run(current, ck.model, *ck.training, set, split, cfg);
}

}  // namespace nsteer
