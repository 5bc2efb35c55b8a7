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


#include "chm/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "chm/features.hpp"

namespace chm {
namespace {

using nlohmann::json;

std::string shown(const fs::path& p) { return "'" + p.string() + "'"; }

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + shown(path));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) throw DataError(shown(path) + " is empty (truncated file)");
  return bytes;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + shown(path));
}

std::string lower_extension(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return e;
}

bool is_image_file(const fs::path& p) {
  const std::string e = lower_extension(p);
  return e == ".png" || e == ".pgm" || e == ".ppm" || e == ".pnm";
}

// --- PNG --------------------------------------------------------------------

struct PngState {
  const std::vector<std::uint8_t>* in = nullptr;
  std::size_t pos = 0;
  std::vector<std::uint8_t>* out = nullptr;
  char error[256] = {};
};

void png_fail(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngState*>(png_get_error_ptr(png));
  std::snprintf(st->error, sizeof st->error, "%s", msg);
  png_longjmp(png, 1);
}

void png_quiet(png_structp, png_const_charp) {}

void png_read_mem(png_structp png, png_bytep data, png_size_t n) {
  auto* st = static_cast<PngState*>(png_get_io_ptr(png));
  if (st->pos + n > st->in->size()) png_error(png, "truncated file");
  std::memcpy(data, st->in->data() + st->pos, n);
  st->pos += n;
}

void png_write_mem(png_structp png, png_bytep data, png_size_t n) {
  auto* st = static_cast<PngState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + n);
}

void png_flush_mem(png_structp) {}

// Everything the jump might skip over lives behind pointers created before
// setjmp, so no local is modified between setjmp and longjmp.
RawImage decode_png(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  auto st = std::make_unique<PngState>();
  st->in = &bytes;
  auto img = std::make_unique<RawImage>();
  auto buffer = std::make_unique<std::vector<std::uint8_t>>();
  auto rows = std::make_unique<std::vector<png_bytep>>();
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st.get(), png_fail, png_quiet);
  if (!png) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(shown(path) + ": " + st->error);
  }
  png_set_read_fn(png, st.get(), png_read_mem);
  png_read_info(png, info);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img->width = static_cast<int>(png_get_image_width(png, info));
  img->height = static_cast<int>(png_get_image_height(png, info));
  img->channels = png_get_channels(png, info);
  img->bits = png_get_bit_depth(png, info);
  if ((img->channels != 1 && img->channels != 3) || (img->bits != 8 && img->bits != 16))
    png_error(png, "unsupported PNG layout");
  const std::size_t rowBytes = png_get_rowbytes(png, info);
  buffer->resize(rowBytes * static_cast<std::size_t>(img->height));
  rows->resize(static_cast<std::size_t>(img->height));
  for (int r = 0; r < img->height; ++r) (*rows)[static_cast<std::size_t>(r)] = buffer->data() + rowBytes * r;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(img->width) * img->height * img->channels;
  img->samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    img->samples[i] = img->bits == 8 ? (*buffer)[i]
                                     : static_cast<std::uint16_t>(((*buffer)[2 * i] << 8) | (*buffer)[2 * i + 1]);
  return std::move(*img);
}

std::vector<std::uint8_t> encode_png(const RawImage& img, const fs::path& path) {
  auto st = std::make_unique<PngState>();
  auto out = std::make_unique<std::vector<std::uint8_t>>();
  st->out = out.get();
  const std::size_t bps = img.bits / 8;
  const std::size_t rowBytes = static_cast<std::size_t>(img.width) * img.channels * bps;
  auto buffer = std::make_unique<std::vector<std::uint8_t>>(rowBytes * static_cast<std::size_t>(img.height));
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bps == 1) {
      (*buffer)[i] = static_cast<std::uint8_t>(img.samples[i]);
    } else {
      (*buffer)[2 * i] = static_cast<std::uint8_t>(img.samples[i] >> 8);
      (*buffer)[2 * i + 1] = static_cast<std::uint8_t>(img.samples[i] & 0xff);
    }
  }
  auto rows = std::make_unique<std::vector<png_bytep>>(static_cast<std::size_t>(img.height));
  for (int r = 0; r < img.height; ++r) (*rows)[static_cast<std::size_t>(r)] = buffer->data() + rowBytes * r;

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, st.get(), png_fail, png_quiet);
  if (!png) throw DataError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError(shown(path) + ": " + st->error);
  }
  png_set_write_fn(png, st.get(), png_write_mem, png_flush_mem);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bits,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(*out);
}

// --- PNM --------------------------------------------------------------------

RawImage decode_pnm(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw DataError(shown(path) + ": malformed PNM header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1 << 24) throw DataError(shown(path) + ": PNM header value out of range");
    }
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw DataError(shown(path) + ": unsupported format (expected binary PGM/PPM)");
  pos = 2;
  RawImage img;
  img.channels = bytes[1] == '6' ? 3 : 1;
  img.width = number();
  img.height = number();
  const int maxval = number();
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
    throw DataError(shown(path) + ": invalid PNM dimensions or maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw DataError(shown(path) + ": truncated file");
  ++pos;
  img.bits = maxval > 255 ? 16 : 8;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  const std::size_t need = n * (img.bits / 8);
  if (bytes.size() - pos < need) throw DataError(shown(path) + ": truncated file");
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t v = img.bits == 8 ? bytes[pos + i]
                                          : static_cast<std::uint16_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]);
    if (v > maxval) throw DataError(shown(path) + ": sample exceeds maxval");
    // rescale to the full 8/16-bit range so one divisor serves all formats
    const int full = img.bits == 8 ? 255 : 65535;
    img.samples[i] = maxval == full ? v : static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * full / maxval));
  }
  return img;
}

std::vector<std::uint8_t> encode_pnm(const RawImage& img) {
  std::ostringstream header;
  header << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << '\n'
         << (img.bits == 16 ? 65535 : 255) << '\n';
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  for (std::uint16_t v : img.samples) {
    if (img.bits == 16) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

double full_scale(const RawImage& img) { return img.bits == 16 ? 65535.0 : 255.0; }

}  // namespace

// ---------------------------------------------------------------------------

RawImage read_raw_image(const fs::path& path) {
  const auto bytes = read_bytes(path);
  static constexpr std::uint8_t kPngSig[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(kPngSig), std::end(kPngSig), bytes.begin()))
    return decode_png(bytes, path);
  if (bytes[0] == 'P') return decode_pnm(bytes, path);
  throw DataError(shown(path) + ": unsupported image format");
}

void write_raw_image(const fs::path& path, const RawImage& image) {
  if ((image.channels != 1 && image.channels != 3) || (image.bits != 8 && image.bits != 16) ||
      image.samples.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
    throw std::invalid_argument("write_raw_image: inconsistent image layout");
  const std::string e = lower_extension(path);
  if (e == ".png") return write_bytes(path, encode_png(image, path));
  if ((e == ".pgm" && image.channels == 1) || (e == ".ppm" && image.channels == 3) || e == ".pnm")
    return write_bytes(path, encode_pnm(image));
  throw std::invalid_argument("cannot write " + shown(path) + ": unsupported extension for this image");
}

ImagePlane load_image(const fs::path& path) {
  const RawImage raw = read_raw_image(path);
  const double scale = full_scale(raw);
  std::vector<double> v(raw.samples.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = raw.samples[i] / scale;
  return ImagePlane(raw.width, raw.height, raw.channels, v);
}

void save_image(const fs::path& path, const ImagePlane& image, int bits) {
  if (bits != 8 && bits != 16) throw std::invalid_argument("save_image: bits must be 8 or 16");
  RawImage raw{image.width(), image.height(), image.channels(), bits, {}};
  const double scale = bits == 16 ? 65535.0 : 255.0;
  for (double v : image.interleaved()) raw.samples.push_back(static_cast<std::uint16_t>(std::lround(v * scale)));
  write_raw_image(path, raw);
}

std::uint16_t encode_probability(double p) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(p, 0.0, 1.0) * 65535.0));
}

void save_probability(const fs::path& path, const ProbabilityMap& map) {
  RawImage raw{map.width(), map.height(), 1, 16, {}};
  raw.samples.reserve(map.values().size());
  for (double p : map.values()) raw.samples.push_back(encode_probability(p));
  write_raw_image(path, raw);
}

ProbabilityMap load_probability(const fs::path& path) {
  const RawImage raw = read_raw_image(path);
  if (raw.channels != 1) throw DataError(shown(path) + ": probability maps must be single-channel");
  const double scale = full_scale(raw);
  std::vector<double> v(raw.samples.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = raw.samples[i] / scale;
  return ProbabilityMap(raw.width, raw.height, std::move(v));
}

LabelMap load_labels(const fs::path& path, int classCount) {
  const RawImage raw = read_raw_image(path);
  if (raw.channels != 1) throw DataError(shown(path) + ": label maps must be single-channel");
  std::vector<int> v(raw.samples.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int id = raw.samples[i];
    if (classCount == 2) {
      v[i] = id > 0 ? 1 : 0;
    } else if (id >= classCount) {
      throw DataError(shown(path) + ": class id " + std::to_string(id) + " >= class count " +
                      std::to_string(classCount));
    } else {
      v[i] = id;
    }
  }
  return LabelMap(raw.width, raw.height, classCount, std::move(v));
}

void save_labels(const fs::path& path, const LabelMap& labels) {
  const int bits = labels.class_count() > 256 ? 16 : 8;
  RawImage raw{labels.width(), labels.height(), 1, bits, {}};
  for (int id : labels.values()) raw.samples.push_back(static_cast<std::uint16_t>(id));
  write_raw_image(path, raw);
}

AnnotatorSet load_annotators(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("boundary groundtruth " + shown(path) + " does not exist");
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no annotator maps in " + shown(path));
  } else {
    files.push_back(path);
  }
  AnnotatorSet out;
  for (const auto& f : files) {
    const LabelMap m = load_labels(f, 2);
    if (!out.empty() && m.size() != out.front().size())
      throw DataError(shown(f) + ": annotator maps differ in size");
    out.push_back(m);
  }
  return out;
}

// --- manifests -----------------------------------------------------------------

Task parse_task(const std::string& s) {
  if (s == "label") return Task::Label;
  if (s == "edge") return Task::Edge;
  throw std::invalid_argument("unknown task '" + s + "' (expected label or edge)");
}
std::string to_string(Task t) { return t == Task::Label ? "label" : "edge"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + s + "' (expected train or test)");
}
std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::vector<ManifestEntry> DatasetManifest::split(Split which) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == which) out.push_back(e);
  return out;
}

namespace {

json parse_json_file(const fs::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw DataError(shown(path) + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path) {
  const json j = parse_json_file(path);
  const fs::path base = fs::absolute(path).parent_path();
  DatasetManifest m;
  try {
    m.classCount = j.value("classCount", 2);
    m.task = parse_task(j.value("task", std::string("label")));
    if (m.classCount < 2) throw std::invalid_argument("classCount must be >= 2");
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.image = base / e.at("image").get<std::string>();
      entry.labels = base / e.at("labels").get<std::string>();
      entry.split = parse_split(e.at("split").get<std::string>());
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw DataError(shown(path) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(shown(path) + ": " + e.what());
  }
  for (const auto& e : m.entries) {
    if (!fs::exists(e.image)) throw DataError(shown(path) + ": missing image file " + shown(e.image));
    if (!fs::exists(e.labels)) throw DataError(shown(path) + ": missing label file " + shown(e.labels));
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path r = fs::absolute(p).lexically_normal().lexically_relative(base);
    return (r.empty() ? fs::absolute(p) : r).generic_string();
  };
  json entries = json::array();
  for (const auto& e : manifest.entries)
    entries.push_back({{"image", rel(e.image)}, {"labels", rel(e.labels)}, {"split", to_string(e.split)}});
  write_json_file(path, {{"classCount", manifest.classCount}, {"task", to_string(manifest.task)}, {"entries", entries}});
}

std::vector<TrainingImage> load_training_set(const DatasetManifest& manifest, Split which) {
  std::vector<TrainingImage> out;
  for (const auto& e : manifest.split(which)) {
    TrainingImage t{load_image(e.image), {}};
    if (manifest.task == Task::Label) {
      t.labels = load_labels(e.labels, manifest.classCount);
    } else {
      const AnnotatorSet annotators = load_annotators(e.labels);
      std::vector<int> any(annotators.front().values().size(), 0);
      for (const auto& a : annotators)
        for (std::size_t i = 0; i < any.size(); ++i) any[i] |= a.values()[i] > 0;
      const Size s = annotators.front().size();
      t.labels = LabelMap(s.width, s.height, 2, std::move(any));
    }
    if (t.labels.size() != t.image.size())
      throw DataError(shown(e.labels) + ": label size differs from image " + shown(e.image));
    out.push_back(std::move(t));
  }
  return out;
}

// --- configs -------------------------------------------------------------------

json config_to_json(const ChmConfig& c) {
  const TrainingParams& t = c.training;
  const FeatureSelection& f = c.features;
  return {
      {"levels", c.levels},
      {"stages", c.stages},
      {"groups", c.groups},
      {"perGroup", c.perGroup},
      {"classCount", c.classCount},
      {"intraClassTopLevels", c.intraClassTopLevels},
      {"training",
       {{"learningRate", t.learningRate},
        {"learningRateDecay", t.learningRateDecay},
        {"epochs", t.epochs},
        {"batchSize", t.batchSize},
        {"dropout", t.dropout},
        {"sampleRate", t.sampleRate},
        {"maxSamples", t.maxSamples},
        {"kmeansSamples", t.kmeansSamples},
        {"seed", t.seed}}},
      {"features",
       {{"haar", f.haar},
        {"hog", f.hog},
        {"orientation", f.orientation},
        {"gabor", f.gabor},
        {"canny", f.canny},
        {"position", f.position},
        {"stencil", f.stencil}}},
  };
}

namespace {

template <class T>
void take(const json& obj, const char* key, T& dst) {
  if (auto it = obj.find(key); it != obj.end()) dst = it->get<T>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& [k, v] : obj.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
      throw std::invalid_argument("unknown key '" + k + "' in " + where);
}

}  // namespace

ChmConfig config_from_json(const json& j) {
  ChmConfig c;
  try {
    reject_unknown(j, {"levels", "stages", "groups", "perGroup", "classCount", "intraClassTopLevels", "training", "features"},
                   "config");
    take(j, "levels", c.levels);
    take(j, "stages", c.stages);
    take(j, "groups", c.groups);
    take(j, "perGroup", c.perGroup);
    take(j, "classCount", c.classCount);
    take(j, "intraClassTopLevels", c.intraClassTopLevels);
    if (auto it = j.find("training"); it != j.end()) {
      reject_unknown(*it, {"learningRate", "learningRateDecay", "epochs", "batchSize", "dropout", "sampleRate",
                           "maxSamples", "kmeansSamples", "seed"},
                     "training");
      TrainingParams& t = c.training;
      take(*it, "learningRate", t.learningRate);
      take(*it, "learningRateDecay", t.learningRateDecay);
      take(*it, "epochs", t.epochs);
      take(*it, "batchSize", t.batchSize);
      take(*it, "dropout", t.dropout);
      take(*it, "sampleRate", t.sampleRate);
      take(*it, "maxSamples", t.maxSamples);
      take(*it, "kmeansSamples", t.kmeansSamples);
      take(*it, "seed", t.seed);
    }
    if (auto it = j.find("features"); it != j.end()) {
      reject_unknown(*it, {"haar", "hog", "orientation", "gabor", "canny", "position", "stencil"}, "features");
      FeatureSelection& f = c.features;
      take(*it, "haar", f.haar);
      take(*it, "hog", f.hog);
      take(*it, "orientation", f.orientation);
      take(*it, "gabor", f.gabor);
      take(*it, "canny", f.canny);
      take(*it, "position", f.position);
      take(*it, "stencil", f.stencil);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return c;
}

ChmConfig load_config(const fs::path& path) {
  try {
    return config_from_json(parse_json_file(path));
  } catch (const DataError& e) {
    throw DataError(shown(path) + ": " + e.what());
  }
}

// --- models --------------------------------------------------------------------

std::string blob_name(int stage, int level, int cls, int classModels) {
  std::string name = "stage" + std::to_string(stage) + (level == 0 ? "_topdown" : "_level" + std::to_string(level));
  if (classModels > 1) name += "_class" + std::to_string(cls);
  return name + ".w";
}

std::vector<std::uint8_t> encode_blob(const LdnnModel& model) {
  std::vector<std::uint8_t> out;
  out.reserve(model.params().size() * 8);
  for (double v : model.params()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return out;
}

LdnnModel decode_blob(const std::vector<std::uint8_t>& bytes, int groups, int perGroup, std::size_t featureCount,
                      bool dropout) {
  const std::size_t count = static_cast<std::size_t>(groups) * perGroup * (featureCount + 1);
  if (bytes.size() != count * 8)
    throw DataError("blob length " + std::to_string(bytes.size()) + " inconsistent with manifest (expected " +
                    std::to_string(count * 8) + " bytes)");
  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[8 * i + b]) << (8 * b);
    params[i] = std::bit_cast<double>(bits);
  }
  return LdnnModel(groups, perGroup, featureCount, std::move(params), dropout);
}

void save_model(const ChmModel& model, const fs::path& dir) {
  const ChmConfig& c = model.config;
  const int classes = c.class_model_count();
  if (static_cast<int>(model.stages.size()) != c.stages) throw InvariantError("save_model: stage count mismatch");
  fs::create_directories(dir);
  json index = json::array();
  auto put = [&](const LdnnModel& m, int stage, int level, int cls) {
    const std::string name = blob_name(stage, level, cls, classes);
    write_bytes(dir / name, encode_blob(m));
    index.push_back({{"file", name},
                     {"stage", stage},
                     {"level", level},
                     {"class", cls},
                     {"groups", m.groups()},
                     {"perGroup", m.per_group()},
                     {"features", m.feature_count()},
                     {"dropout", m.trained_with_dropout()}});
  };
  for (int s = 1; s <= c.stages; ++s)
    for (int cls = 0; cls < classes; ++cls) {
      for (int l = (s == 1 ? 1 : 2); l <= c.levels; ++l) put(model.bottom_up(s, cls, l), s, l, cls);
      put(model.top_down(s, cls), s, 0, cls);
    }
  const json manifest = {
      {"format", kModelFormat},
      {"config", config_to_json(c)},
      {"channels", model.channels},
      {"features", {{"appearance", appearance_labels(c.features, model.channels)},
                    {"appearanceWidth", appearance_width(c.features, model.channels)}}},
      {"classifiers", index},
  };
  write_json_file(dir / "manifest.json", manifest);
}

ChmModel load_model(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  const json j = parse_json_file(mpath);
  const std::string format = j.value("format", std::string());
  if (format != kModelFormat)
    throw DataError(shown(mpath) + ": model format '" + format + "' is not supported (expected " + kModelFormat + ")");
  ChmModel model;
  try {
    model.config = config_from_json(j.at("config"));
    model.channels = j.at("channels").get<int>();
    if (model.channels < 1) throw DataError("channels must be positive");
    const auto registry = j.at("features").at("appearance").get<std::vector<std::string>>();
    if (registry != appearance_labels(model.config.features, model.channels))
      throw DataError("feature registry does not match this build");
  } catch (const json::exception& e) {
    throw DataError(shown(mpath) + ": " + e.what());
  }
  const ChmConfig& c = model.config;
  const int classes = c.class_model_count();
  model.stages.resize(static_cast<std::size_t>(c.stages));
  for (auto& st : model.stages) {
    st.bottomUp.assign(static_cast<std::size_t>(classes), std::vector<LdnnModel>(static_cast<std::size_t>(c.levels)));
    st.topDown.assign(static_cast<std::size_t>(classes), LdnnModel());
  }
  std::vector<char> seen(static_cast<std::size_t>(c.stages * classes * (c.levels + 1)), 0);
  for (const auto& e : j.at("classifiers")) {
    int stage = 0, level = 0, cls = 0, groups = 0, perGroup = 0;
    std::size_t features = 0;
    bool dropout = false;
    std::string file;
    try {
      stage = e.at("stage").get<int>();
      level = e.at("level").get<int>();
      cls = e.at("class").get<int>();
      groups = e.at("groups").get<int>();
      perGroup = e.at("perGroup").get<int>();
      features = e.at("features").get<std::size_t>();
      dropout = e.at("dropout").get<bool>();
      file = e.at("file").get<std::string>();
    } catch (const json::exception& ex) {
      throw DataError(shown(mpath) + ": " + ex.what());
    }
    if (stage < 1 || stage > c.stages || level < 0 || level > c.levels || cls < 0 || cls >= classes ||
        (stage > 1 && level == 1) || file != blob_name(stage, level, cls, classes))
      throw DataError(shown(mpath) + ": unexpected classifier entry " + shown(file));
    const std::size_t expected = level == 0 ? top_down_width(c, model.channels) : bottom_up_width(c, model.channels, level);
    if (features != expected || groups < 1 || perGroup < 1)
      throw DataError(shown(mpath) + ": classifier " + shown(file) + " has an unexpected shape");
    char& flag = seen[static_cast<std::size_t>(((stage - 1) * classes + cls) * (c.levels + 1) + level)];
    if (flag) throw DataError(shown(mpath) + ": duplicate classifier " + shown(file));
    flag = 1;
    LdnnModel m;
    try {
      m = decode_blob(read_bytes(dir / file), groups, perGroup, features, dropout);
    } catch (const DataError& ex) {
      throw DataError(shown(dir / file) + ": " + ex.what());
    }
    auto& st = model.stages[static_cast<std::size_t>(stage - 1)];
    if (level == 0)
      st.topDown[static_cast<std::size_t>(cls)] = std::move(m);
    else
      st.bottomUp[static_cast<std::size_t>(cls)][static_cast<std::size_t>(level - 1)] = std::move(m);
  }
  for (int s = 1; s <= c.stages; ++s)
    for (int cls = 0; cls < classes; ++cls)
      for (int l = 0; l <= c.levels; ++l) {
        if (s > 1 && l == 1) continue;
        if (!seen[static_cast<std::size_t>(((s - 1) * classes + cls) * (c.levels + 1) + l)])
          throw DataError(shown(mpath) + ": missing classifier " + blob_name(s, l, cls, classes));
      }
  for (int s = 2; s <= c.stages; ++s)
    for (int cls = 0; cls < classes; ++cls)
      model.stages[static_cast<std::size_t>(s - 1)].bottomUp[static_cast<std::size_t>(cls)][0] =
          model.stages[static_cast<std::size_t>(s - 2)].topDown[static_cast<std::size_t>(cls)];
  return model;
}

}  // namespace chm
