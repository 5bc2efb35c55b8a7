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


#include "chm/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "chm/edges.hpp"
#include "chm/metrics.hpp"

namespace chm {
namespace {

using nlohmann::json;

std::string shown(const fs::path& p) { return "'" + p.string() + "'"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + shown(path));
}

json level_record(const LevelRecord& r) {
  return {{"record", "classifier"}, {"stage", r.stage},       {"class", r.cls},
          {"level", r.level},       {"topDown", r.level == 0}, {"reused", r.reused},
          {"samples", r.samples},   {"logLoss", r.logLoss},    {"trainF", r.trainF},
          {"epochLoss", r.epochLoss}};
}

json stage_record(const StageRecord& r) {
  return {{"record", "stage"}, {"stage", r.stage}, {"class", r.cls}, {"J1", r.J1}, {"J2", r.J2}, {"trainF", r.trainF}};
}

bool is_manifest(const fs::path& p) { return p.extension() == ".json"; }

// Test-split image paths (manifest input) or the single image given.
std::vector<ManifestEntry> prediction_inputs(const fs::path& input, std::optional<Task>& task) {
  if (!is_manifest(input)) {
    if (!fs::exists(input)) throw DataError("input image " + shown(input) + " does not exist");
    if (!task) task = Task::Label;
    return {ManifestEntry{input, {}, Split::Test}};
  }
  const DatasetManifest m = load_manifest(input);
  if (!task) task = m.task;
  auto entries = m.split(Split::Test);
  if (entries.empty()) throw DataError(shown(input) + ": manifest has no test entries");
  return entries;
}

void require_unique_stems(const std::vector<ManifestEntry>& entries) {
  std::set<std::string> stems;
  for (const auto& e : entries)
    if (!stems.insert(e.image.stem().string()).second)
      throw DataError("two test images share the name stem '" + e.image.stem().string() +
                      "'; prediction files would collide");
}

}  // namespace

TrainResult cmd_train(const TrainOptions& o, std::ostream& progress) {
  const DatasetManifest manifest = load_manifest(o.manifest);
  ChmConfig config = o.config ? load_config(*o.config) : ChmConfig{};
  if (o.seed) config.training.seed = *o.seed;
  if (config.classCount != manifest.classCount)
    throw DataError(shown(o.manifest) + ": classCount " + std::to_string(manifest.classCount) +
                    " differs from the config's " + std::to_string(config.classCount));
  const auto train = load_training_set(manifest, Split::Train);
  if (train.empty()) throw DataError(shown(o.manifest) + ": no train entries");

  std::ostringstream log;
  TrainResult result = chm_train(train, config, [&](const LevelRecord& r) {
    log << level_record(r).dump() << '\n';
    progress << "stage " << r.stage << " class " << r.cls << ' '
             << (r.level == 0 ? std::string("top-down") : "level " + std::to_string(r.level))
             << (r.reused ? " (previous top-down)" : "") << ": samples " << r.samples << ", train F "
             << std::setprecision(4) << r.trainF << '\n';
  });
  for (const auto& s : result.report.stages) log << stage_record(s).dump() << '\n';
  save_model(result.model, o.outDir);
  write_text(o.outDir / "train_log.jsonl", log.str());
  return result;
}

std::string probability_file(const fs::path& image, int cls, int classModels) {
  const std::string stem = image.stem().string();
  return classModels > 1 ? stem + "_class" + std::to_string(cls) + ".png" : stem + "_prob.png";
}

std::string label_file(const fs::path& image) { return image.stem().string() + "_labels.png"; }

int cmd_predict(const PredictOptions& o, std::ostream& progress) {
  const ChmModel model = load_model(o.model);
  const int classModels = model.config.class_model_count();
  if (o.multiscale && classModels != 1) throw std::invalid_argument("--multiscale needs a binary model");
  if (o.nms && classModels != 1) throw std::invalid_argument("--nms needs a binary model");
  std::optional<Task> task = o.task;
  const auto entries = prediction_inputs(o.input, task);
  require_unique_stems(entries);
  fs::create_directories(o.outDir);
  for (const auto& e : entries) {
    const ImagePlane image = load_image(e.image);
    if (image.channels() != model.channels)
      throw DataError(shown(e.image) + ": image has " + std::to_string(image.channels()) + " channels, model expects " +
                      std::to_string(model.channels));
    std::vector<ProbabilityMap> maps =
        o.multiscale ? std::vector<ProbabilityMap>{multiscale_infer(model, image)} : chm_infer(model, image);
    if (o.nms) maps.front() = nms_thin(maps.front());
    for (int c = 0; c < classModels; ++c)
      save_probability(o.outDir / probability_file(e.image, c, classModels), maps[static_cast<std::size_t>(c)]);
    if (*task == Task::Label) {
      LabelMap labels;
      if (classModels == 1) {
        std::vector<int> v(maps.front().values().size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = maps.front().values()[i] >= o.threshold ? 1 : 0;
        labels = LabelMap(image.width(), image.height(), 2, std::move(v));
      } else {
        labels = predict_labels(maps, model.config.classCount);
      }
      save_labels(o.outDir / label_file(e.image), labels);
    }
    progress << "predicted " << e.image.filename().string() << '\n';
  }
  return static_cast<int>(entries.size());
}

json cmd_eval(const EvalOptions& o) {
  const DatasetManifest manifest = load_manifest(o.manifest);
  const Task task = o.task.value_or(manifest.task);
  const auto entries = manifest.split(Split::Test);
  if (entries.empty()) throw DataError(shown(o.manifest) + ": manifest has no test entries");
  require_unique_stems(entries);
  auto prediction = [&](const fs::path& name) {
    const fs::path p = o.predictions / name;
    if (!fs::exists(p)) throw DataError("missing prediction " + shown(p));
    return p;
  };
  auto check_size = [](const fs::path& p, Size a, Size b) {
    if (a != b) throw DataError(shown(p) + ": prediction size differs from the groundtruth");
  };

  json report = {{"task", to_string(task)}, {"images", entries.size()}};
  std::optional<std::string> curve;
  if (task == Task::Edge) {
    std::vector<ProbabilityMap> maps;
    std::vector<AnnotatorSet> truth;
    for (const auto& e : entries) {
      const fs::path p = prediction(probability_file(e.image, 0, 1));
      maps.push_back(load_probability(p));
      truth.push_back(load_annotators(e.labels));
      check_size(p, maps.back().size(), truth.back().front().size());
    }
    const BoundaryResult r = boundary_benchmark(maps, truth, o.tolerance);
    report["tolerance"] = o.tolerance;
    report["ods"] = r.ods;
    report["odsThreshold"] = r.odsThreshold;
    report["ois"] = r.ois;
    report["ap"] = r.ap;
    std::ostringstream csv;
    write_pr_curve(csv, r.curve);
    curve = csv.str();
  } else if (manifest.classCount == 2) {
    ConfusionCounts pooled(2);
    for (const auto& e : entries) {
      const fs::path p = prediction(probability_file(e.image, 0, 1));
      const ProbabilityMap map = load_probability(p);
      const LabelMap gt = load_labels(e.labels, 2);
      check_size(p, map.size(), gt.size());
      const ConfusionCounts c = binary_counts(map, gt, o.threshold);
      for (int t = 0; t < 2; ++t)
        for (int q = 0; q < 2; ++q) pooled.add(t, q, c.at(t, q));
    }
    const BinaryScores s = binary_scores(pooled);
    report["threshold"] = o.threshold;
    report["fValue"] = s.fValue;
    report["gMean"] = s.gMean;
    report["pixelAccuracy"] = s.pixelAccuracy;
    report["precision"] = s.precision;
    report["recall"] = s.recall;
    report["trueNegativeRate"] = s.trueNegativeRate;
    report["counts"] = {{"tp", pooled.tp()}, {"fp", pooled.fp()}, {"fn", pooled.fn()}, {"tn", pooled.tn()}};
  } else {
    ConfusionCounts pooled(manifest.classCount);
    for (const auto& e : entries) {
      const fs::path p = prediction(label_file(e.image));
      const LabelMap pred = load_labels(p, manifest.classCount);
      const LabelMap gt = load_labels(e.labels, manifest.classCount);
      check_size(p, pred.size(), gt.size());
      const ConfusionCounts c = multiclass_scores(pred, gt).confusion;
      for (int t = 0; t < manifest.classCount; ++t)
        for (int q = 0; q < manifest.classCount; ++q) pooled.add(t, q, c.at(t, q));
    }
    const MulticlassScores s = multiclass_scores(pooled);
    report["pixelAccuracy"] = s.pixelAccuracy;
    report["classAverageAccuracy"] = s.classAverageAccuracy;
    json rows = json::array();
    for (int t = 0; t < manifest.classCount; ++t) {
      json row = json::array();
      for (int q = 0; q < manifest.classCount; ++q) row.push_back(s.confusion.at(t, q));
      rows.push_back(row);
    }
    report["confusion"] = rows;
  }
  const fs::path reportPath = o.report.value_or(o.predictions / "scores.json");
  write_text(reportPath, report.dump(2) + "\n");
  if (curve) write_text(reportPath.parent_path() / "pr_curve.csv", *curve);
  return report;
}

void cmd_synth(const SynthOptions& o) {
  if (o.count < 1) throw std::invalid_argument("synth: count must be positive");
  if (!(o.testFraction >= 0.0 && o.testFraction <= 1.0)) throw std::invalid_argument("synth: test fraction must be in [0,1]");
  if (o.kind == SynthKind::Bars && o.classes != 2) throw std::invalid_argument("synth: bars are binary");
  fs::create_directories(o.outDir);
  if (o.kind == SynthKind::XorBlobs) {
    const PointSet ps = synth_xor_blobs(o.count, o.seed);
    std::ostringstream csv;
    csv << "x,y,label\n" << std::setprecision(17);
    for (std::size_t i = 0; i < ps.labels.size(); ++i)
      csv << ps.points.at(i, 0) << ',' << ps.points.at(i, 1) << ',' << int(ps.labels[i]) << '\n';
    write_text(o.outDir / "points.csv", csv.str());
    return;
  }
  const auto data = o.kind == SynthKind::Textures ? synth_textures(o.count, o.size, o.seed, o.classes)
                                                  : synth_bars(o.count, o.size, o.seed);
  const int testCount = static_cast<int>(std::lround(o.testFraction * o.count));
  DatasetManifest m;
  m.classCount = o.classes;
  m.task = Task::Label;
  for (int i = 0; i < o.count; ++i) {
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i << ".png";
    const fs::path img = o.outDir / "images" / name.str(), lab = o.outDir / "labels" / name.str();
    save_image(img, data[static_cast<std::size_t>(i)].image);
    save_labels(lab, data[static_cast<std::size_t>(i)].labels);
    m.entries.push_back({img, lab, i >= o.count - testCount ? Split::Test : Split::Train});
  }
  save_manifest(o.outDir / "manifest.json", m);
}

// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contextual hierarchical model: train, predict, evaluate, generate synthetic data"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "Worker threads (overrides CHM_WORKERS)")->check(CLI::PositiveNumber);

  TrainOptions train;
  std::string trainConfig;
  std::uint64_t trainSeed = 0;
  auto* t = app.add_subcommand("train", "Train a model on a manifest's train split");
  t->add_option("--manifest", train.manifest, "Dataset manifest (JSON)")->required();
  auto* cfgOpt = t->add_option("--config", trainConfig, "Config JSON (same schema as a model's config block)");
  t->add_option("--out", train.outDir, "Model directory to write")->required();
  auto* seedOpt = t->add_option("--seed", trainSeed, "Random seed (overrides the config)");

  PredictOptions predict;
  std::string predictTask;
  auto* p = app.add_subcommand("predict", "Run a model on an image or a manifest's test split");
  p->add_option("--model", predict.model, "Model directory")->required();
  p->add_option("--input", predict.input, "Image file or dataset manifest (.json)")->required();
  p->add_option("--out", predict.outDir, "Output directory")->required();
  p->add_flag("--multiscale", predict.multiscale, "Average predictions at scales 0.5, 1 and 2");
  p->add_flag("--nms", predict.nms, "Thin the boundary map by non-maximal suppression");
  p->add_option("--threshold", predict.threshold, "Threshold for binary label maps")->check(CLI::Range(0.0, 1.0));
  p->add_option("--task", predictTask, "label or edge (default: from the manifest)")
      ->check(CLI::IsMember({"label", "edge"}));

  EvalOptions eval;
  std::string evalTask, evalReport;
  auto* e = app.add_subcommand("eval", "Score predictions against a manifest's test split");
  e->add_option("--predictions", eval.predictions, "Directory written by predict")->required();
  e->add_option("--manifest", eval.manifest, "Dataset manifest (JSON)")->required();
  e->add_option("--task", evalTask, "label or edge (default: from the manifest)")->check(CLI::IsMember({"label", "edge"}));
  e->add_option("--threshold", eval.threshold, "Threshold for binary scores")->check(CLI::Range(0.0, 1.0));
  e->add_option("--tolerance", eval.tolerance, "Boundary match distance as a fraction of the image diagonal")
      ->check(CLI::PositiveNumber);
  e->add_option("--report", evalReport, "Score report path (default: <predictions>/scores.json)");

  SynthOptions synth;
  std::string synthKind;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--kind", synthKind, "textures, bars or xor-blobs")
      ->required()
      ->check(CLI::IsMember({"textures", "bars", "xor-blobs"}));
  s->add_option("--count", synth.count, "Number of images (points for xor-blobs)")->check(CLI::PositiveNumber);
  s->add_option("--size", synth.size, "Image side length")->check(CLI::Range(16, 4096));
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--out", synth.outDir, "Output directory")->required();
  s->add_option("--classes", synth.classes, "Classes for textures (2 or 3)")->check(CLI::Range(2, 3));
  s->add_option("--test-fraction", synth.testFraction, "Fraction of images in the test split")
      ->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int rc = app.exit(ex, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (workers > 0) {
      set_worker_count(workers);
    } else if (const char* env = std::getenv("CHM_WORKERS"); env && *env) {
      char* end = nullptr;
      const long n = std::strtol(env, &end, 10);
      if (*end != '\0' || n < 1) throw std::invalid_argument("CHM_WORKERS must be a positive integer");
      set_worker_count(static_cast<int>(n));
    }

    if (*t) {
      if (*cfgOpt) train.config = trainConfig;
      if (*seedOpt) train.seed = trainSeed;
      cmd_train(train, err);
      out << "model written to " << train.outDir.string() << '\n';
    } else if (*p) {
      if (!predictTask.empty()) predict.task = parse_task(predictTask);
      const int n = cmd_predict(predict, err);
      out << n << " prediction(s) written to " << predict.outDir.string() << '\n';
    } else if (*e) {
      if (!evalTask.empty()) eval.task = parse_task(evalTask);
      if (!evalReport.empty()) eval.report = evalReport;
      out << cmd_eval(eval).dump(2) << '\n';
    } else if (*s) {
      synth.kind = parse_synth_kind(synthKind);
      cmd_synth(synth);
      out << "dataset written to " << synth.outDir.string() << '\n';
    }
    return kExitOk;
  } catch (const DataError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const InvariantError& ex) {
    err << "internal error: " << ex.what() << '\n';
    return kExitInvariant;
  } catch (const std::invalid_argument& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::runtime_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << '\n';
    return kExitInvariant;
  }
}

}  // namespace chm
