#include "datk/synthseq.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "datk/errors.hpp"

using nlohmann::json;

namespace datk {

namespace {

constexpr double kTau = 2.0 * 3.14159265358979323846;

// Two-octave value noise on a coarse lattice, bilinearly interpolated.
struct ValueNoise {
  int cells_x, cells_y, cell;
  std::vector<double> lattice;

  ValueNoise(int w, int h, int cell_size, Rng& rng) : cell(cell_size) {
    cells_x = w / cell_size + 2;
    cells_y = h / cell_size + 2;
    lattice.resize(static_cast<size_t>(cells_x) * cells_y);
    for (auto& v : lattice) v = rng.uniform();
  }

  double at(double x, double y) const {
    const double gx = x / cell, gy = y / cell;
    const int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
    const double fx = gx - x0, fy = gy - y0;
    const auto l = [&](int xi, int yi) {
      return lattice[static_cast<size_t>(std::min(yi, cells_y - 1)) * cells_x +
                     static_cast<size_t>(std::min(xi, cells_x - 1))];
    };
    const double a = l(x0, y0) * (1 - fx) + l(x0 + 1, y0) * fx;
    const double b = l(x0, y0 + 1) * (1 - fx) + l(x0 + 1, y0 + 1) * fx;
    return a * (1 - fy) + b * fy;
  }
};

void box_blur3(Image& img) {
  Image src = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        int acc = 0, cnt = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || xx >= img.width || yy < 0 || yy >= img.height) continue;
            acc += src.at(xx, yy, c);
            ++cnt;
          }
        img.at(x, y, c) = static_cast<uint8_t>(acc / cnt);
      }
}

struct FramePose {
  double cx, cy, w, h;
};

FramePose pose_at(const SceneSpec& spec, double sx, double sy, int t) {
  const double phase = kTau * t / spec.sin_period;
  const double s = 1.0 + spec.scale_amp * std::sin(kTau * t / (spec.sin_period * 1.7));
  return {sx + spec.vel_x * t + spec.sin_amp * std::sin(phase),
          sy + spec.vel_y * t + 0.6 * spec.sin_amp * std::sin(phase + 1.3), spec.base_w * s,
          spec.base_h * s};
}

bool inside_shape(const SceneSpec& spec, const FramePose& p, double px, double py) {
  if (spec.shape == SceneSpec::TargetShape::kRectangle) {
    return px >= p.cx - p.w / 2 && px < p.cx + p.w / 2 && py >= p.cy - p.h / 2 &&
           py < p.cy + p.h / 2;
  }
  const double dx = (px - p.cx) / (p.w / 2);
  const double dy = (py - p.cy) / (p.h / 2);
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace

std::string SceneSpec::to_json() const {
  json j;
  j["width"] = width;
  j["height"] = height;
  j["length"] = length;
  j["shape"] = shape == TargetShape::kRectangle ? "rectangle" : "ellipse";
  j["base_w"] = base_w;
  j["base_h"] = base_h;
  j["color"] = color;
  j["start_x"] = start_x;
  j["start_y"] = start_y;
  j["vel_x"] = vel_x;
  j["vel_y"] = vel_y;
  j["sin_amp"] = sin_amp;
  j["sin_period"] = sin_period;
  j["scale_amp"] = scale_amp;
  j["texture_seed"] = texture_seed;
  j["target_depth"] = target_depth;
  j["bg_depth_top"] = bg_depth_top;
  j["bg_depth_bottom"] = bg_depth_bottom;
  return j.dump();
}

SceneSpec SceneSpec::from_json(const std::string& text) {
  SceneSpec s;
  json j = json::parse(text);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.length = j.value("length", s.length);
  s.shape = j.value("shape", "rectangle") == "ellipse" ? TargetShape::kEllipse
                                                       : TargetShape::kRectangle;
  s.base_w = j.value("base_w", s.base_w);
  s.base_h = j.value("base_h", s.base_h);
  if (j.contains("color"))
    for (size_t i = 0; i < 3; ++i) s.color[i] = j["color"][i].get<uint8_t>();
  s.start_x = j.value("start_x", s.start_x);
  s.start_y = j.value("start_y", s.start_y);
  s.vel_x = j.value("vel_x", s.vel_x);
  s.vel_y = j.value("vel_y", s.vel_y);
  s.sin_amp = j.value("sin_amp", s.sin_amp);
  s.sin_period = j.value("sin_period", s.sin_period);
  s.scale_amp = j.value("scale_amp", s.scale_amp);
  s.texture_seed = j.value("texture_seed", s.texture_seed);
  s.target_depth = j.value("target_depth", s.target_depth);
  s.bg_depth_top = j.value("bg_depth_top", s.bg_depth_top);
  s.bg_depth_bottom = j.value("bg_depth_bottom", s.bg_depth_bottom);
  return s;
}

SequenceData generate_sequence(const SceneSpec& spec, uint64_t seed, const std::string& name) {
  if (spec.length < 2) throw ConfigError("synth: sequence length must be >= 2");
  if (spec.width < 16 || spec.height < 16) throw ConfigError("synth: frame too small");

  Rng rng(seed);
  const uint64_t tex_seed = spec.texture_seed ? spec.texture_seed : rng.derive(1).seed();
  const double sx = spec.start_x >= 0 ? spec.start_x : spec.width / 2.0;
  const double sy = spec.start_y >= 0 ? spec.start_y : spec.height / 2.0;

  // Validate the full trajectory before rendering anything.
  for (int t = 0; t < spec.length; ++t) {
    const FramePose p = pose_at(spec, sx, sy, t);
    if (p.cx - p.w / 2 < 0 || p.cy - p.h / 2 < 0 || p.cx + p.w / 2 > spec.width ||
        p.cy + p.h / 2 > spec.height)
      throw ConfigError("synth: trajectory exits the frame at t=" + std::to_string(t) +
                        " for sequence " + name);
  }

  // Static background shared by all frames.
  Rng tex_rng(tex_seed);
  ValueNoise coarse(spec.width, spec.height, 16, tex_rng);
  ValueNoise fine(spec.width, spec.height, 6, tex_rng);
  const double tint_r = tex_rng.uniform(0.9, 1.1);
  const double tint_g = tex_rng.uniform(0.9, 1.1);
  const double tint_b = tex_rng.uniform(0.9, 1.1);
  Image background(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const double v = 0.7 * coarse.at(x, y) + 0.3 * fine.at(x, y);
      const double base = 80.0 + 110.0 * v;
      const double rgb[3] = {base * tint_r, base * tint_g, base * tint_b};
      for (int c = 0; c < 3; ++c)
        background.at(x, y, c) =
            static_cast<uint8_t>(std::min(255.0, std::max(0.0, rgb[c])));
    }
  box_blur3(background);

  // Per-target shading noise, fixed over time so the target has texture
  // but stable appearance.
  Rng shade_rng(rng.derive(2).seed());
  std::vector<int> shade(64 * 64);
  for (auto& s : shade) s = static_cast<int>(shade_rng.uniform(-12.0, 12.0));

  SequenceData out;
  out.name = name;
  out.meta.seed = seed;
  out.meta.domain = "clean";
  out.meta.depth_unit = "meters";
  out.meta.spec_json = spec.to_json();

  for (int t = 0; t < spec.length; ++t) {
    const FramePose p = pose_at(spec, sx, sy, t);
    Image frame = background;
    DepthMap depth(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y) {
      const double bg_d = spec.bg_depth_top +
                          (spec.bg_depth_bottom - spec.bg_depth_top) * y /
                              std::max(1, spec.height - 1);
      for (int x = 0; x < spec.width; ++x) {
        if (inside_shape(spec, p, x + 0.5, y + 0.5)) {
          const int sidx = (y % 64) * 64 + (x % 64);
          for (int c = 0; c < 3; ++c) {
            const int v = spec.color[static_cast<size_t>(c)] + shade[static_cast<size_t>(sidx)];
            frame.at(x, y, c) = static_cast<uint8_t>(std::min(255, std::max(0, v)));
          }
          depth.at(x, y) = static_cast<float>(spec.target_depth);
        } else {
          depth.at(x, y) = static_cast<float>(bg_d);
        }
      }
    }
    out.frames.push_back(std::move(frame));
    out.depths.push_back(std::move(depth));
    out.boxes.push_back(BBox::from_center(p.cx, p.cy, p.w, p.h));
  }
  return out;
}

SceneSpec SceneSpecSampler::sample(Rng& rng) const {
  SceneSpec s = base;
  s.base_w = rng.uniform(size_lo, size_hi);
  s.base_h = s.base_w * rng.uniform(aspect_lo, aspect_hi);
  if (mix_shapes)
    s.shape = rng.uniform() < 0.5 ? SceneSpec::TargetShape::kRectangle
                                  : SceneSpec::TargetShape::kEllipse;
  for (int c = 0; c < 3; ++c)
    s.color[static_cast<size_t>(c)] = static_cast<uint8_t>(rng.uniform(30.0, 220.0));
  s.vel_x = rng.uniform(-speed_hi, speed_hi);
  s.vel_y = rng.uniform(-speed_hi, speed_hi);
  s.sin_amp = rng.uniform(0.0, sin_amp_hi);
  s.sin_period = rng.uniform(12.0, 26.0);
  s.scale_amp = rng.uniform(0.0, 0.12);
  s.target_depth = rng.uniform(depth_lo, depth_hi);
  s.texture_seed = rng.next_u64();

  // Start position: pad by worst-case target extent plus trajectory span
  // so the validated trajectory stays inside the frame.
  const double margin_w = s.base_w * (1 + s.scale_amp) / 2 + s.sin_amp + 2;
  const double margin_h = s.base_h * (1 + s.scale_amp) / 2 + 0.6 * s.sin_amp + 2;
  const double span_x = s.vel_x * (s.length - 1);
  const double span_y = s.vel_y * (s.length - 1);
  const double lo_x = margin_w + std::max(0.0, -span_x);
  const double hi_x = s.width - margin_w - std::max(0.0, span_x);
  const double lo_y = margin_h + std::max(0.0, -span_y);
  const double hi_y = s.height - margin_h - std::max(0.0, span_y);
  if (lo_x >= hi_x || lo_y >= hi_y) {
    // Motion too large for the frame; fall back to a slower drift.
    s.vel_x *= 0.3;
    s.vel_y *= 0.3;
    return s;  // re-sampled start below still fits thanks to reduced span
  }
  s.start_x = rng.uniform(lo_x, hi_x);
  s.start_y = rng.uniform(lo_y, hi_y);
  return s;
}

std::vector<SequenceData> generate_corpus(int n_sequences, const SceneSpecSampler& sampler,
                                          uint64_t seed, const std::string& split,
                                          const std::string& name_prefix) {
  if (n_sequences < 1) throw ConfigError("synth: corpus needs n >= 1");
  Rng root(seed);
  std::vector<SequenceData> out;
  out.reserve(static_cast<size_t>(n_sequences));
  for (int i = 0; i < n_sequences; ++i) {
    Rng spec_rng = root.derive(static_cast<uint64_t>(i) * 2);
    const uint64_t seq_seed = root.derive(static_cast<uint64_t>(i) * 2 + 1).seed();
    SceneSpec spec = sampler.sample(spec_rng);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%03d", name_prefix.c_str(), i);

    // A sampled spec can still clip at the frame edge; retry with calmer
    // motion parameters until it fits.
    for (int attempt = 0;; ++attempt) {
      try {
        SequenceData seq = generate_sequence(spec, seq_seed, buf);
        seq.meta.split = split;
        out.push_back(std::move(seq));
        break;
      } catch (const ConfigError&) {
        if (attempt >= 4) throw;
        spec.vel_x *= 0.5;
        spec.vel_y *= 0.5;
        spec.sin_amp *= 0.5;
        spec.start_x = -1;
        spec.start_y = -1;
      }
    }
  }
  return out;
}

SequenceData pseudo_tir(const SequenceDataset& seq) {
  if (seq.size() == 0) throw IntegrityError("pseudo_tir: empty sequence");
  SequenceData out;
  out.name = seq.name;
  out.boxes = seq.boxes;
  out.meta = seq.meta;
  out.meta.domain = "tir";

  // Target-intensity band from the frame-1 ground-truth box.
  const Image first = seq.frame(0);
  const BBox b0 = seq.boxes.at(0);
  double mean = 0.0, m2 = 0.0;
  int count = 0;
  for (int y = std::max(0, static_cast<int>(b0.y)); y < std::min(first.height, static_cast<int>(b0.y2())); ++y)
    for (int x = std::max(0, static_cast<int>(b0.x)); x < std::min(first.width, static_cast<int>(b0.x2())); ++x) {
      const double lum =
          0.299 * first.at(x, y, 0) + 0.587 * first.at(x, y, 1) + 0.114 * first.at(x, y, 2);
      ++count;
      const double d = lum - mean;
      mean += d / count;
      m2 += d * (lum - mean);
    }
  const double sd = count > 1 ? std::sqrt(m2 / (count - 1)) : 0.0;
  const double band_lo = mean - std::max(12.0, 1.5 * sd);
  const double band_hi = mean + std::max(12.0, 1.5 * sd);

  for (int i = 0; i < seq.size(); ++i) {
    const Image src = seq.frame(i);
    Image gray(src.width, src.height);
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        double lum = 0.299 * src.at(x, y, 0) + 0.587 * src.at(x, y, 1) + 0.114 * src.at(x, y, 2);
        if (lum >= band_lo && lum <= band_hi) lum = 255.0 - lum;
        const auto v = static_cast<uint8_t>(std::min(255.0, std::max(0.0, lum)));
        for (int c = 0; c < 3; ++c) gray.at(x, y, c) = v;
      }
    box_blur3(gray);
    // Re-replicate after the blur so the channels stay identical.
    for (int y = 0; y < gray.height; ++y)
      for (int x = 0; x < gray.width; ++x) {
        const uint8_t v = gray.at(x, y, 0);
        gray.at(x, y, 1) = v;
        gray.at(x, y, 2) = v;
      }
    out.frames.push_back(std::move(gray));
  }
  if (seq.has_depth())
    for (int i = 0; i < seq.size(); ++i) out.depths.push_back(seq.depth(i));
  return out;
}

}  // namespace datk
