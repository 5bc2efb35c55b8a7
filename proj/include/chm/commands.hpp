// Copyright 2026 The CHM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// The batch commands behind the `chm` tool. Each one is deterministic for a
// fixed seed and reports problems through exceptions; `run_cli` maps those
// to exit codes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "chm/io.hpp"
#include "chm/synth.hpp"

namespace chm {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInvariant = 3 };

struct TrainOptions {
  fs::path manifest;
  std::optional<fs::path> config;  // defaults when absent
  fs::path outDir;
  std::optional<std::uint64_t> seed;  // overrides the config's seed
};

/// Trains on the manifest's train split and writes the model directory plus
/// `train_log.jsonl` (one record per classifier and per stage/class).
TrainResult cmd_train(const TrainOptions& options, std::ostream& progress);

struct PredictOptions {
  fs::path model;
  fs::path input;  // an image, or a dataset manifest (.json) for its test split
  fs::path outDir;
  bool multiscale = false;
  bool nms = false;
  double threshold = 0.5;
  std::optional<Task> task;  // from the manifest; label for single images
};

/// Output file names derived from an input image path.
std::string probability_file(const fs::path& image, int cls, int classModels);
std::string label_file(const fs::path& image);

/// Writes `<stem>_prob.png` (binary) or `<stem>_class<c>.png` per class, and
/// `<stem>_labels.png` for label tasks. Returns the number of images.
int cmd_predict(const PredictOptions& options, std::ostream& progress);

struct EvalOptions {
  fs::path predictions;
  fs::path manifest;
  std::optional<Task> task;
  double threshold = 0.5;
  double tolerance = kDefaultTolerance;
  std::optional<fs::path> report;  // default: <predictions>/scores.json
};

/// Scores the test split. Label tasks use the probability maps (binary) or
/// label maps (multiclass); edge tasks run the boundary benchmark and also
/// write `pr_curve.csv` next to the report.
nlohmann::json cmd_eval(const EvalOptions& options);

struct SynthOptions {
  SynthKind kind = SynthKind::Textures;
  int count = 20;
  int size = 64;
  std::uint64_t seed = 1;
  fs::path outDir;
  int classes = 2;
  double testFraction = 0.5;  // trailing images go to the test split
};

/// Image datasets: images/, labels/ and manifest.json. xor-blobs writes
/// points.csv (x,y,label) instead.
void cmd_synth(const SynthOptions& options);

/// Parses arguments, honours --workers / CHM_WORKERS, dispatches, and
/// returns an ExitCode. Diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chm
