#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "paanet/rng.hpp"

namespace paanet {

enum class SynthStyle { kNuclei, kLesion, kInstrument };

inline std::string to_string(SynthStyle s) {
  switch (s) {
    case SynthStyle::kNuclei: return "nuclei";
    case SynthStyle::kLesion: return "lesion";
    case SynthStyle::kInstrument: return "instrument";
  }
  return "?";
}

inline SynthStyle parse_style(const std::string& s) {
  if (s == "nuclei") return SynthStyle::kNuclei;
  if (s == "lesion") return SynthStyle::kLesion;
  if (s == "instrument") return SynthStyle::kInstrument;
  throw std::invalid_argument("unknown style '" + s + "' (nuclei|lesion|instrument)");
}

struct SynthSpec {
  SynthStyle style = SynthStyle::kNuclei;
  int count = 200;
  int h = 64;
  int w = 64;
  std::uint64_t seed = 1;
  double fmin = 0.02;   // foreground fraction bounds
  double fmax = 0.45;
  double noise = 0.05;  // per-pixel uniform amplitude

  void validate() const {
    if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
    if (h < 16 || h % 16 != 0 || w < 16 || w % 16 != 0)
      throw std::invalid_argument("synth: size must be divisible by 16");
    if (!(0.0 < fmin && fmin < fmax && fmax < 1.0))
      throw std::invalid_argument("synth: need 0 < fmin < fmax < 1");
    if (noise < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
  }
};

namespace detail {

struct Ellipse {
  double cx, cy, a, b, cos_t, sin_t;
  bool inside(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * cos_t + dy * sin_t) / a;
    const double v = (-dx * sin_t + dy * cos_t) / b;
    return u * u + v * v <= 1.0;
  }
};

struct Star {  // star-convex region with low-order radial harmonics
  double cx, cy, r0;
  std::array<double, 4> amp, phase;
  bool inside(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double r = std::hypot(dx, dy);
    const double t = std::atan2(dy, dx);
    double rr = 1.0;
    for (int k = 0; k < 4; ++k) rr += amp[static_cast<std::size_t>(k)] * std::cos((k + 1) * t + phase[static_cast<std::size_t>(k)]);
    return r <= r0 * rr;
  }
};

struct Capsule {  // rounded elongated rectangle
  double cx, cy, dx, dy, half_len, radius;
  bool inside(double x, double y) const {
    const double px = x - cx, py = y - cy;
    double t = px * dx + py * dy;
    t = std::min(std::max(t, -half_len), half_len);
    const double qx = px - t * dx, qy = py - t * dy;
    return qx * qx + qy * qy <= radius * radius;
  }
};

struct Geometry {
  std::vector<Ellipse> ellipses;
  std::vector<Star> stars;
  std::vector<Capsule> capsules;
  bool inside(double x, double y) const {
    for (const auto& e : ellipses)
      if (e.inside(x, y)) return true;
    for (const auto& s : stars)
      if (s.inside(x, y)) return true;
    for (const auto& c : capsules)
      if (c.inside(x, y)) return true;
    return false;
  }
};

inline Geometry draw_geometry(SynthStyle style, int h, int w, Rng& rng) {
  Geometry g;
  const double s = static_cast<double>(std::min(h, w));
  switch (style) {
    case SynthStyle::kNuclei: {
      const int n = static_cast<int>(rng.range(3, 12));
      for (int i = 0; i < n; ++i) {
        Ellipse e;
        e.cx = rng.uniform(0.1, 0.9) * w;
        e.cy = rng.uniform(0.1, 0.9) * h;
        e.a = rng.uniform(0.06, 0.12) * s;
        e.b = rng.uniform(0.06, 0.12) * s;
        const double t = rng.uniform(0.0, 3.14159265358979323846);
        e.cos_t = std::cos(t);
        e.sin_t = std::sin(t);
        g.ellipses.push_back(e);
      }
      break;
    }
    case SynthStyle::kLesion: {
      Star st;
      st.cx = rng.uniform(0.35, 0.65) * w;
      st.cy = rng.uniform(0.35, 0.65) * h;
      st.r0 = rng.uniform(0.15, 0.30) * s;
      for (int k = 0; k < 4; ++k) {
        st.amp[static_cast<std::size_t>(k)] = rng.uniform(-0.15, 0.15) / (k + 1);
        st.phase[static_cast<std::size_t>(k)] = rng.uniform(0.0, 2 * 3.14159265358979323846);
      }
      g.stars.push_back(st);
      break;
    }
    case SynthStyle::kInstrument: {
      const int n = static_cast<int>(rng.range(1, 2));
      for (int i = 0; i < n; ++i) {
        Capsule c;
        c.cx = rng.uniform(0.25, 0.75) * w;
        c.cy = rng.uniform(0.25, 0.75) * h;
        const double len = rng.uniform(0.5, 0.9) * s;
        const double width = rng.uniform(0.08, 0.16) * s;
        const double t = rng.uniform(0.0, 3.14159265358979323846);
        c.dx = std::cos(t);
        c.dy = std::sin(t);
        c.radius = width / 2;
        c.half_len = std::max(0.0, (len - width) / 2);
        g.capsules.push_back(c);
      }
      break;
    }
  }
  return g;
}

}  // namespace detail

struct SynthSample {
  std::vector<std::uint8_t> image;  // h*w*3 interleaved
  std::vector<std::uint8_t> mask;   // h*w, values {0,255}
};

// Renders one sample from its own deterministic stream. Shapes are redrawn
// until the rasterized foreground fraction lands inside [fmin, fmax]; pixels
// are classified by a center-in test against the exact geometry.
inline SynthSample make_sample(const SynthSpec& spec, Rng rng) {
  SynthSample out;
  out.mask.assign(static_cast<std::size_t>(spec.h) * spec.w, 0);

  int fg_count = 0;
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 200)
      throw std::runtime_error("synth: could not satisfy the foreground-fraction bounds");
    const detail::Geometry geo = detail::draw_geometry(spec.style, spec.h, spec.w, rng);
    fg_count = 0;
    for (int y = 0; y < spec.h; ++y)
      for (int x = 0; x < spec.w; ++x) {
        const bool in = geo.inside(x + 0.5, y + 0.5);
        out.mask[static_cast<std::size_t>(y) * spec.w + x] = in ? 255 : 0;
        fg_count += in;
      }
    const double frac = static_cast<double>(fg_count) / (static_cast<double>(spec.h) * spec.w);
    if (frac >= spec.fmin && frac <= spec.fmax) break;
  }

  // Base colors with a minimum luminance gap so the task is learnable even
  // under noise; the gap value is a generator choice, not a mask property.
  double fg[3], bg[3];
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 200) throw std::runtime_error("synth: could not draw contrasting colors");
    double mf = 0, mb = 0;
    for (int c = 0; c < 3; ++c) {
      fg[c] = rng.uniform();
      bg[c] = rng.uniform();
      mf += fg[c] / 3;
      mb += bg[c] / 3;
    }
    if (std::abs(mf - mb) >= 0.25) break;
  }

  out.image.resize(static_cast<std::size_t>(spec.h) * spec.w * 3);
  for (std::size_t p = 0; p < static_cast<std::size_t>(spec.h) * spec.w; ++p) {
    const double* base = out.mask[p] ? fg : bg;
    for (int c = 0; c < 3; ++c) {
      double v = base[c];
      if (spec.noise > 0) v += rng.uniform(-spec.noise, spec.noise);
      v = std::min(1.0, std::max(0.0, v));
      out.image[p * 3 + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return out;
}

inline std::string sample_id(const SynthSpec& spec, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return to_string(spec.style) + "_" + buf;
}

}  // namespace paanet
