#include "datk/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "datk/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace datk {

namespace {

std::string frame_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", i);
  return buf;
}

std::vector<double> parse_csv_line(const std::string& line, const std::string& origin,
                                   int lineno, size_t expect) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(cell, &pos));
      while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
      if (pos != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw FormatError(origin + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
    }
  }
  if (out.size() != expect)
    throw FormatError(origin + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(expect) + " comma-separated values");
  return out;
}

}  // namespace

Image SequenceDataset::frame(int i) const { return read_png_rgb8(frame_paths.at(static_cast<size_t>(i))); }

DepthMap SequenceDataset::depth(int i) const {
  if (!has_depth()) throw IntegrityError("sequence " + name + " has no depth maps");
  return read_dmap(depth_paths.at(static_cast<size_t>(i)));
}

std::vector<BBox> load_groundtruth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<BBox> boxes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto v = parse_csv_line(line, path, lineno, 4);
    boxes.push_back({v[0], v[1], v[2], v[3]});
  }
  return boxes;
}

void save_groundtruth(const std::string& path, const std::vector<BBox>& boxes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path);
  char buf[128];
  for (const auto& b : boxes) {
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f,%.3f\n", b.x, b.y, b.w, b.h);
    out << buf;
  }
}

void save_predictions(const std::string& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path);
  char buf[160];
  for (const auto& p : preds) {
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f,%.3f,%.5f\n", p.box.x, p.box.y, p.box.w,
                  p.box.h, p.score);
    out << buf;
  }
}

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::vector<Prediction> preds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto v = parse_csv_line(line, path, lineno, 5);
    preds.push_back({{v[0], v[1], v[2], v[3]}, v[4]});
  }
  return preds;
}

std::string meta_to_json(const SequenceMeta& meta) {
  json j;
  j["schema"] = 1;
  j["seed"] = meta.seed;
  j["domain"] = meta.domain;
  if (!meta.split.empty()) j["split"] = meta.split;
  j["beta"] = meta.beta;
  j["depth_unit"] = meta.depth_unit;
  if (!meta.spec_json.empty()) j["spec"] = json::parse(meta.spec_json);
  return j.dump(2) + "\n";
}

SequenceMeta meta_from_json(const std::string& text, const std::string& origin) {
  SequenceMeta meta;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(origin + ": " + e.what());
  }
  meta.seed = j.value("seed", 0ULL);
  meta.domain = j.value("domain", "clean");
  meta.split = j.value("split", "");
  meta.depth_unit = j.value("depth_unit", "meters");
  if (j.contains("beta")) {
    const auto& b = j["beta"];
    for (size_t i = 0; i < 3 && i < b.size(); ++i) meta.beta[i] = b[i].get<double>();
  }
  if (j.contains("spec")) meta.spec_json = j["spec"].dump();
  return meta;
}

void save_sequence(const std::string& root, const SequenceData& seq) {
  if (seq.frames.size() != seq.boxes.size())
    throw IntegrityError("sequence " + seq.name + ": " + std::to_string(seq.frames.size()) +
                         " frames vs " + std::to_string(seq.boxes.size()) + " boxes");
  const fs::path dir = fs::path(root) / seq.name;
  fs::create_directories(dir / "frames");
  if (!seq.depths.empty()) fs::create_directories(dir / "depth");

  for (size_t i = 0; i < seq.frames.size(); ++i)
    write_png_rgb8((dir / "frames" / (frame_name(static_cast<int>(i)) + ".png")).string(),
                   seq.frames[i]);
  for (size_t i = 0; i < seq.depths.size(); ++i)
    write_dmap((dir / "depth" / (frame_name(static_cast<int>(i)) + ".dmap")).string(),
               seq.depths[i]);
  save_groundtruth((dir / "groundtruth.txt").string(), seq.boxes);

  std::ofstream meta(dir / "meta.json", std::ios::trunc);
  meta << meta_to_json(seq.meta);
}

SequenceDataset load_sequence(const std::string& dir) {
  const fs::path d(dir);
  SequenceDataset seq;
  seq.dir = d.string();
  seq.name = d.filename().string();

  if (!fs::exists(d / "groundtruth.txt"))
    throw IntegrityError(seq.name + ": missing groundtruth.txt");
  seq.boxes = load_groundtruth((d / "groundtruth.txt").string());

  for (size_t i = 0; i < seq.boxes.size(); ++i) {
    const fs::path f = d / "frames" / (frame_name(static_cast<int>(i)) + ".png");
    if (!fs::exists(f)) throw IntegrityError(seq.name + ": missing frame " + f.filename().string());
    seq.frame_paths.push_back(f.string());
  }
  // Reject extra frames beyond the annotation count.
  if (fs::exists(d / "frames")) {
    size_t count = 0;
    for (const auto& e : fs::directory_iterator(d / "frames"))
      if (e.path().extension() == ".png") ++count;
    if (count != seq.boxes.size())
      throw IntegrityError(seq.name + ": " + std::to_string(count) + " frames but " +
                           std::to_string(seq.boxes.size()) + " annotation lines");
  }

  if (fs::exists(d / "depth")) {
    for (size_t i = 0; i < seq.boxes.size(); ++i) {
      const fs::path f = d / "depth" / (frame_name(static_cast<int>(i)) + ".dmap");
      if (!fs::exists(f))
        throw IntegrityError(seq.name + ": missing depth map " + f.filename().string());
      seq.depth_paths.push_back(f.string());
    }
  }

  if (fs::exists(d / "meta.json")) {
    std::ifstream in(d / "meta.json");
    std::stringstream ss;
    ss << in.rdbuf();
    seq.meta = meta_from_json(ss.str(), (d / "meta.json").string());
  }
  return seq;
}

std::vector<SequenceDataset> load_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw IntegrityError("dataset root not found: " + root);
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SequenceDataset> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_sequence(d));
  return out;
}

SequenceData materialize(const SequenceDataset& seq) {
  SequenceData data;
  data.name = seq.name;
  data.meta = seq.meta;
  data.boxes = seq.boxes;
  data.frames.reserve(static_cast<size_t>(seq.size()));
  for (int i = 0; i < seq.size(); ++i) data.frames.push_back(seq.frame(i));
  if (seq.has_depth())
    for (int i = 0; i < seq.size(); ++i) data.depths.push_back(seq.depth(i));
  return data;
}

}  // namespace datk
