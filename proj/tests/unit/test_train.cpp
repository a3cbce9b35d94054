// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nsteer/errors.hpp"
#include "nsteer/train.hpp"

using namespace nsteer;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nsteer_test_" + name)).string();
}

// 8 x 5 grid, F = 17, two microphones, noiseless.
struct Tiny {
  GridMeasurementSet set;
  Split split;
  NeuralSteerer model;
};

Tiny tiny(FreqMode mode = FreqMode::Discrete, int mics = 2) {
  SyntheticSceneConfig scene;
  scene.geometry.mic_positions = {{0.06, 0.02, 0.0}, {-0.05, 0.03, 0.01}, {0.0, -0.07, 0.0}};
  scene.geometry.mic_positions.resize(static_cast<std::size_t>(mics));
  Tiny t;
  t.set = generate_synthetic(scene, 8, 5, FrequencyAxis(16000.0, 17));
  SplitSpec spec;
  spec.mode = SplitMode::RandomFraction;
  spec.fraction = 0.6;
  t.split = make_split(t.set, spec);
  SteererConfig sc;
  sc.freq_mode = mode;
  sc.hidden = {32, 32};
  sc.phase_hidden = {32};
  sc.omega0 = 3.0;
  t.model = NeuralSteerer(sc, t.set.geometry, t.set.axis);
  return t;
}

TrainConfig quick(std::int64_t epochs) {
  TrainConfig c;
  c.epochs_max = epochs;
  c.batch_size = 6;
  c.patience = 1000;
  c.execution = Execution::Serial;
  return c;
}

}  // namespace

TEST_CASE("zero epochs return the initial model and an empty log") {
  const Tiny t = tiny();
  const TrainResult r = train(t.model, t.set, t.split, quick(0));
  CHECK(r.log.empty());
  CHECK(r.model.pack() == t.model.pack());
  CHECK(r.final_model.pack() == t.model.pack());
}

TEST_CASE("training on a tiny noiseless scene reduces the loss below 10 percent") {
  for (FreqMode mode : {FreqMode::Discrete, FreqMode::Continuous}) {
    CAPTURE(to_string(mode));
    const Tiny t = tiny(mode);
    const TrainResult r = train(t.model, t.set, t.split, quick(200));
    REQUIRE(r.log.size() == 200);
    CHECK(r.log.back().train.total < 0.1 * r.log.front().train.total);
    // The returned model is the best on validation.
    const double best = validation_loss(r.model, t.set, t.split.validation, LossWeights{}, Execution::Serial);
    const double last = validation_loss(r.final_model, t.set, t.split.validation, LossWeights{}, Execution::Serial);
    CHECK(best <= last);
    CHECK(best == r.snapshot.best_validation);
  }
}

TEST_CASE("training is deterministic and independent of the execution mode") {
  const Tiny t = tiny(FreqMode::Continuous);
  TrainConfig c = quick(4);
  const TrainResult a = train(t.model, t.set, t.split, c);
  const TrainResult b = train(t.model, t.set, t.split, c);
  c.execution = Execution::Parallel;
  const TrainResult p = train(t.model, t.set, t.split, c);
  CHECK(a.final_model.pack() == b.final_model.pack());
  CHECK(a.final_model.pack() == p.final_model.pack());
  CHECK(a.snapshot.optimizer.second_moment == p.snapshot.optimizer.second_moment);
  for (std::size_t e = 0; e < a.log.size(); ++e) CHECK(a.log[e].train.total == p.log[e].train.total);
  c.seed = 1;
  const TrainResult other = train(t.model, t.set, t.split, c);
  CHECK(other.final_model.pack() != a.final_model.pack());
}

TEST_CASE("learning rate follows lr0 * decay^epoch") {
  const Tiny t = tiny();
  TrainConfig c = quick(5);
  c.lr0 = 2e-3;
  c.lr_decay = 0.9;
  const TrainResult r = train(t.model, t.set, t.split, c);
  for (const EpochLog& e : r.log) CHECK(e.learning_rate == 2e-3 * std::pow(0.9, static_cast<double>(e.epoch)));
}

TEST_CASE("early stopping fires after exactly `patience` epochs without improvement") {
  const Tiny t = tiny();
  TrainConfig c = quick(50);
  // A vanishing step leaves the parameters, and so the validation loss, unchanged.
  c.lr0 = 1e-300;
  c.patience = 4;
  const TrainResult r = train(t.model, t.set, t.split, c);
  CHECK(r.log.size() == 5);
  CHECK(r.snapshot.stopped_early);
  CHECK(r.snapshot.best_epoch == 0);
  CHECK(r.snapshot.epochs_without_improvement == 4);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  const Tiny t = tiny(FreqMode::Continuous);
  const std::string ck = temp_path("resume.nst");
  TrainConfig full = quick(6);
  const TrainResult whole = train(t.model, t.set, t.split, full);

  TrainConfig first = quick(3);
  first.checkpoint_path = ck;
  train(t.model, t.set, t.split, first);
  const TrainResult rest = resume(ck, t.set, t.split, full);
  CHECK(rest.final_model.pack() == whole.final_model.pack());
  CHECK(rest.model.pack() == whole.model.pack());
  REQUIRE(rest.log.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(rest.log[e].epoch == whole.log[e + 3].epoch);
    CHECK(rest.log[e].train.total == whole.log[e + 3].train.total);
    CHECK(rest.log[e].validation == whole.log[e + 3].validation);
    CHECK(rest.log[e].learning_rate == whole.log[e + 3].learning_rate);
  }
  std::filesystem::remove(ck);
}

TEST_CASE("resume rejects unusable checkpoints") {
  const Tiny t = tiny();
  const std::string ck = temp_path("resume_bad.nst");
  TrainConfig c = quick(1);
  c.checkpoint_path = ck;
  train(t.model, t.set, t.split, c);

  const Tiny three = tiny(FreqMode::Discrete, 3);
  CHECK_THROWS_AS(resume(ck, three.set, three.split, quick(2)), FormatError);

  save_checkpoint(ck, t.model);
  CHECK_THROWS_AS(resume(ck, t.set, t.split, quick(2)), FormatError);

  {
    std::ofstream out(ck, std::ios::binary | std::ios::trunc);
    out << "NSTEER1\n{not json";
  }
  CHECK_THROWS_AS(resume(ck, t.set, t.split, quick(2)), FormatError);
  std::filesystem::remove(ck);
}

TEST_CASE("checkpoint and log are written every epoch") {
  const Tiny t = tiny();
  TrainConfig c = quick(3);
  c.checkpoint_path = temp_path("epoch.nst");
  c.log_path = temp_path("epoch.csv");
  const TrainResult r = train(t.model, t.set, t.split, c);
  const Checkpoint ck = load_checkpoint(c.checkpoint_path);
  CHECK(ck.model.pack() == r.model.pack());
  REQUIRE(ck.training.has_value());
  CHECK(ck.training->next_epoch == 3);
  std::ifstream in(c.log_path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,lr,logmag,phase,time,causal,total,validation,wall_seconds");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
  std::filesystem::remove(c.checkpoint_path);
  std::filesystem::remove(c.log_path);
}

TEST_CASE("a non-finite loss aborts with a batch dump") {
  Tiny t = tiny();
  t.model.tau = std::nan("");
  TrainConfig c = quick(2);
  c.log_path = temp_path("nan.csv");
  CHECK_THROWS_AS(train(t.model, t.set, t.split, c), std::runtime_error);
  CHECK(std::filesystem::exists(c.log_path + ".nan.json"));
  std::filesystem::remove(c.log_path + ".nan.json");
}

TEST_CASE("off-grid samples are seeded and sized per frequency mode") {
  const Tiny d = tiny(FreqMode::Discrete);
  const OffgridSample a = sample_offgrid(d.model, 5, 3, 2, 1);
  const OffgridSample b = sample_offgrid(d.model, 5, 3, 2, 1);
  REQUIRE(a.doas.size() == 5);
  CHECK(a.axis == d.model.axis());
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.doas[i].azimuth == b.doas[i].azimuth);
    CHECK(a.doas[i].elevation == b.doas[i].elevation);
  }
  CHECK(sample_offgrid(d.model, 5, 3, 2, 2).doas[0].azimuth != a.doas[0].azimuth);

  const Tiny c = tiny(FreqMode::Continuous);
  const int n = c.model.axis().fft_size();
  for (int batch = 0; batch < 20; ++batch) {
    const int got = sample_offgrid(c.model, 2, 0, 0, batch).axis.fft_size();
    CHECK((got == std::max(4, n / 2) || got == n || got == 2 * n));
  }
}
