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

// File formats: PNG and binary PGM/PPM images, JSON dataset manifests and
// configs, and the model directory (manifest.json + one f64 blob per
// classifier).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "chm/core.hpp"
#include "chm/metrics.hpp"
#include "chm/model.hpp"

namespace chm {

namespace fs = std::filesystem;

/// Raw decoded samples, interleaved, before scaling.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 or 3
  int bits = 8;      // 8 or 16
  std::vector<std::uint16_t> samples;

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

/// Format follows the extension: .png, .pgm, .ppm (.pnm picks by channels).
RawImage read_raw_image(const fs::path& path);
void write_raw_image(const fs::path& path, const RawImage& image);

/// Values are scaled to [0,1] by the maximum sample value; alpha is dropped.
ImagePlane load_image(const fs::path& path);
void save_image(const fs::path& path, const ImagePlane& image, int bits = 8);

/// 16-bit grayscale, sample = round(p * 65535).
std::uint16_t encode_probability(double p);
void save_probability(const fs::path& path, const ProbabilityMap& map);
ProbabilityMap load_probability(const fs::path& path);

/// Class ids from a single-channel image. With two classes any nonzero value
/// is 1; otherwise a value >= classCount is a DataError.
LabelMap load_labels(const fs::path& path, int classCount);
void save_labels(const fs::path& path, const LabelMap& labels);

/// A single boundary map, or every image file of a directory (sorted by
/// name) as one annotator each; pixels > 0 are boundary.
AnnotatorSet load_annotators(const fs::path& path);

enum class Task { Label, Edge };
enum class Split { Train, Test };

Task parse_task(const std::string& s);
std::string to_string(Task task);
Split parse_split(const std::string& s);
std::string to_string(Split split);

struct ManifestEntry {
  fs::path image;  // absolute after loading
  fs::path labels;
  Split split = Split::Train;
};

struct DatasetManifest {
  int classCount = 2;
  Task task = Task::Label;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(Split which) const;
};

/// Relative paths resolve against the manifest's directory. Every referenced
/// file must exist.
DatasetManifest load_manifest(const fs::path& path);
/// Paths are written relative to the manifest's directory when possible.
void save_manifest(const fs::path& path, const DatasetManifest& manifest);

/// Images and label maps of one split. For edge tasks the training target
/// marks pixels that any annotator labels as boundary.
std::vector<TrainingImage> load_training_set(const DatasetManifest& manifest, Split which);

nlohmann::json config_to_json(const ChmConfig& config);
/// Missing keys keep their defaults; unknown keys and bad types are errors.
ChmConfig config_from_json(const nlohmann::json& json);
ChmConfig load_config(const fs::path& path);

inline constexpr const char* kModelFormat = "chm/1";

/// Blob names: stage{s}_level{l}.w and stage{s}_topdown.w, with a _class{c}
/// suffix before ".w" for one-vs-all models. Level 1 of stages after the
/// first repeats the previous top-down classifier and is not written.
std::string blob_name(int stage, int level, int cls, int classModels);
void save_model(const ChmModel& model, const fs::path& dir);
ChmModel load_model(const fs::path& dir);

std::vector<std::uint8_t> encode_blob(const LdnnModel& model);
LdnnModel decode_blob(const std::vector<std::uint8_t>& bytes, int groups, int perGroup, std::size_t featureCount,
                      bool dropout);

}  // namespace chm
