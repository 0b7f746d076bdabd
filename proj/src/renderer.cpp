#include "lang2face/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "lang2face/random.hpp"

namespace lang2face {

namespace {

// Canonical face layout in unit coordinates (x right, y down). Mask
// boxes are derived from the same constants as the drawing code, so the
// superset property holds by construction.
namespace layout {
constexpr double head_cx = 0.5, head_cy = 0.53;
constexpr double face_w_min = 0.60, face_w_max = 0.74;
constexpr double face_h_min = 0.74, face_h_max = 0.88;
constexpr double eye_sp_min = 0.36, eye_sp_max = 0.40;
constexpr double mouth_w_min = 0.30, mouth_w_max = 0.40;
constexpr double brow_th_min = 0.018, brow_th_max = 0.028;

constexpr double head_outline_r = 0.008;

constexpr double eye_cy = 0.44;
constexpr double eye_rx = 0.05, eye_ry = 0.035;
constexpr double eye_widen = 0.6;  // AU5: ry * (1 + widen*k/5)
constexpr double eye_outline_r = 0.006;
constexpr double pupil_r = 0.014;

constexpr double brow_y = 0.26;
constexpr double brow_seg_near = 0.055;  // segment offsets from eye center
constexpr double brow_seg_far = 0.095;
constexpr double brow_raise = 0.05;  // AU1/AU2 max tip raise

constexpr double glab_x = 0.012, glab_y0 = 0.345, glab_len = 0.03;
constexpr double glab_r = 0.006;

constexpr double nose_crease_y0 = 0.46, nose_crease_dy = 0.018;
constexpr double nose_crease_hw = 0.03, nose_crease_r = 0.006;

constexpr double mouth_y = 0.70;
constexpr double lip_hw = 0.06, lip_r = 0.008;
constexpr double lip_gap0 = 0.004;
constexpr double lip_up_max = 0.016, lip_down_max = 0.031;  // AU25
constexpr double interior_hw = 0.055;

constexpr double tick_len = 0.018, tick_r = 0.007;
constexpr double tick_raise = 0.05, tick_out = 0.015;  // AU12

constexpr double chin_y = 0.80, chin_hw = 0.09, chin_r = 0.008;
constexpr double chin_arc0 = 0.012, chin_sag_max = 0.05;  // AU26

constexpr double aa_px = 1.5;        // feather width at raster scale
constexpr double mask_margin_px = 1.75;  // AA reach + safety, per size
}  // namespace layout

struct Vec2 {
  double x, y;
};

struct Color {
  float r, g, b;
};

constexpr Color kBackground{0.10f, 0.11f, 0.13f};
constexpr Color kInk{0.10f, 0.08f, 0.08f};
constexpr Color kEyeWhite{0.93f, 0.93f, 0.90f};
constexpr Color kMouthInterior{0.22f, 0.07f, 0.07f};
constexpr Color kLips{0.55f, 0.20f, 0.20f};

class Canvas {
 public:
  explicit Canvas(int size) : size_(size), img_({3, size, size}) {
    fill(kBackground, 1.0);
  }

  void fill(Color c, double alpha) {
    for (int y = 0; y < size_; ++y)
      for (int x = 0; x < size_; ++x) blend(y, x, 1.0, c, alpha);
  }

  // dist: signed distance in unit coordinates; negative = inside
  template <typename DistFn>
  void draw(const DistFn& dist, Color c, double alpha, double bx0, double by0,
            double bx1, double by1) {
    double reach = layout::aa_px / size_;
    int x0 = std::max(0, int((bx0 - reach) * size_));
    int x1 = std::min(size_ - 1, int((bx1 + reach) * size_) + 1);
    int y0 = std::max(0, int((by0 - reach) * size_));
    int y1 = std::min(size_ - 1, int((by1 + reach) * size_) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double px = (x + 0.5) / size_, py = (y + 0.5) / size_;
        double d = dist(Vec2{px, py}) * size_;  // pixels
        double cov = std::clamp(0.5 - d / layout::aa_px, 0.0, 1.0);
        if (cov > 0) blend(y, x, cov, c, alpha);
      }
  }

  Tensor<float> to_image() const {
    Tensor<float> out({3, size_, size_});
    for (size_t i = 0; i < img_.data.size(); ++i)
      out.data[i] = img_.data[i] * 2.0f - 1.0f;
    return out;
  }

 private:
  void blend(int y, int x, double cov, Color c, double alpha) {
    double a = cov * alpha;
    float* p = &img_.at(0, y, x);
    int hw = size_ * size_;
    p[0] = float(p[0] * (1 - a) + c.r * a);
    p[hw] = float(p[hw] * (1 - a) + c.g * a);
    p[2 * hw] = float(p[2 * hw] * (1 - a) + c.b * a);
  }

  int size_;
  Tensor<float> img_;
};

double dist_capsule(Vec2 p, Vec2 a, Vec2 b, double r) {
  double abx = b.x - a.x, aby = b.y - a.y;
  double apx = p.x - a.x, apy = p.y - a.y;
  double denom = abx * abx + aby * aby;
  double t = denom > 0 ? std::clamp((apx * abx + apy * aby) / denom, 0.0, 1.0)
                       : 0.0;
  double dx = apx - t * abx, dy = apy - t * aby;
  return std::sqrt(dx * dx + dy * dy) - r;
}

double dist_ellipse(Vec2 p, Vec2 c, double rx, double ry) {
  double dx = (p.x - c.x) / rx, dy = (p.y - c.y) / ry;
  return (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(rx, ry);
}

double dist_box(Vec2 p, double x0, double y0, double x1, double y1, double r) {
  double cx = (x0 + x1) / 2, cy = (y0 + y1) / 2;
  double hx = (x1 - x0) / 2, hy = (y1 - y0) / 2;
  double qx = std::abs(p.x - cx) - hx, qy = std::abs(p.y - cy) - hy;
  double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0) - r;
}

void draw_capsule(Canvas& cv, Vec2 a, Vec2 b, double r, Color c, double alpha) {
  cv.draw([=](Vec2 p) { return dist_capsule(p, a, b, r); }, c, alpha,
          std::min(a.x, b.x) - r, std::min(a.y, b.y) - r,
          std::max(a.x, b.x) + r, std::max(a.y, b.y) + r);
}

void draw_ellipse_fill(Canvas& cv, Vec2 c, double rx, double ry, Color col,
                       double alpha) {
  cv.draw([=](Vec2 p) { return dist_ellipse(p, c, rx, ry); }, col, alpha,
          c.x - rx, c.y - ry, c.x + rx, c.y + ry);
}

void draw_ellipse_outline(Canvas& cv, Vec2 c, double rx, double ry, double r,
                          Color col, double alpha) {
  cv.draw([=](Vec2 p) { return std::abs(dist_ellipse(p, c, rx, ry)) - r; },
          col, alpha, c.x - rx - r, c.y - ry - r, c.x + rx + r, c.y + ry + r);
}

double chin_profile(double dx, double sag) {
  using namespace layout;
  double t = dx / chin_hw;
  return chin_y + (chin_arc0 + sag) * (1.0 - t * t);
}

}  // namespace

IdentityParams IdentityParams::sample(uint64_t seed) {
  using namespace layout;
  RandomStream rs(seed, "identity");
  IdentityParams p;
  p.seed = seed;
  p.face_width = rs.uniform(face_w_min, face_w_max);
  p.face_height = rs.uniform(face_h_min, face_h_max);
  p.eye_spacing = rs.uniform(eye_sp_min, eye_sp_max);
  p.mouth_width = rs.uniform(mouth_w_min, mouth_w_max);
  p.brow_thickness = rs.uniform(brow_th_min, brow_th_max);
  double tone = rs.uniform(0.55, 0.88);
  for (int c = 0; c < 3; ++c)
    p.skin[c] = std::clamp(tone + rs.uniform(-0.04, 0.04), 0.30, 0.95);
  return p;
}

Tensor<float> render(const IdentityParams& id, const AUVector& au, int size) {
  using namespace layout;
  for (const auto& [a, k] : au.entries())
    if (k < 0 || k > 5) throw IntensityOutOfRange("render: bad intensity");

  auto k5 = [&](AUId a) { return au.intensity(a) / 5.0; };

  Canvas cv(size);
  Color skin{float(id.skin[0]), float(id.skin[1]), float(id.skin[2])};

  // head
  Vec2 hc{head_cx, head_cy};
  double hrx = id.face_width / 2, hry = id.face_height / 2;
  draw_ellipse_fill(cv, hc, hrx, hry, skin, 1.0);
  draw_ellipse_outline(cv, hc, hrx, hry, head_outline_r, kInk, 0.85);

  // chin arc: sags downward with AU26
  {
    double sag = chin_sag_max * k5(AUId::AU26);
    const int segs = 14;
    for (int i = 0; i < segs; ++i) {
      double dx0 = -chin_hw + 2 * chin_hw * i / segs;
      double dx1 = -chin_hw + 2 * chin_hw * (i + 1) / segs;
      draw_capsule(cv, {head_cx + dx0, chin_profile(dx0, sag)},
                   {head_cx + dx1, chin_profile(dx1, sag)}, chin_r, kInk, 0.8);
    }
  }

  // static nose
  draw_capsule(cv, {head_cx, 0.52}, {head_cx, 0.63}, 0.006, kInk, 0.75);
  draw_capsule(cv, {head_cx - 0.018, 0.635}, {head_cx + 0.018, 0.635}, 0.005,
               kInk, 0.75);

  // AU4: glabella frown strokes, descending and darkening with k
  if (int k = au.intensity(AUId::AU4); k > 0) {
    double len = glab_len * k / 5.0;
    double alpha = 0.5 + 0.08 * k;
    for (int s = -1; s <= 1; s += 2)
      draw_capsule(cv, {head_cx + s * glab_x, glab_y0},
                   {head_cx + s * glab_x, glab_y0 + len}, glab_r, kInk, alpha);
  }

  // AU9: nose-bridge crease strokes, count and darkness scale with k
  if (int k = au.intensity(AUId::AU9); k > 0) {
    double alpha = 0.45 + 0.09 * k;
    for (int i = 0; i < k; ++i) {
      double y = nose_crease_y0 + nose_crease_dy * i;
      draw_capsule(cv, {head_cx - nose_crease_hw, y},
                   {head_cx + nose_crease_hw, y}, nose_crease_r, kInk, alpha);
    }
  }

  // brows: two segments per side; AU1 tilts the inner tip up, AU2 the
  // outer tip, each pivoting at the segment's other end
  {
    double br = id.brow_thickness / 2;
    double raise1 = brow_raise * k5(AUId::AU1);
    double raise2 = brow_raise * k5(AUId::AU2);
    for (int s = -1; s <= 1; s += 2) {  // s=-1 left eye, +1 right
      double cx = head_cx + s * id.eye_spacing / 2;
      // inner segment: pivot at |near| offset, tip toward the nose
      Vec2 pivot_in{cx - s * brow_seg_near, brow_y};
      Vec2 tip_in{cx - s * brow_seg_far, brow_y - raise1};
      draw_capsule(cv, pivot_in, tip_in, br, kInk, 0.9);
      // outer segment: pivot near, tip away from the nose
      Vec2 pivot_out{cx + s * brow_seg_near, brow_y};
      Vec2 tip_out{cx + s * brow_seg_far, brow_y - raise2};
      draw_capsule(cv, pivot_out, tip_out, br, kInk, 0.9);
    }
  }

  // eyes: AU5 widens the vertical radius
  {
    double ry = eye_ry * (1.0 + eye_widen * k5(AUId::AU5));
    for (int s = -1; s <= 1; s += 2) {
      Vec2 ec{head_cx + s * id.eye_spacing / 2, eye_cy};
      draw_ellipse_fill(cv, ec, eye_rx, ry, kEyeWhite, 1.0);
      draw_ellipse_outline(cv, ec, eye_rx, ry, eye_outline_r, kInk, 0.9);
      draw_ellipse_fill(cv, ec, pupil_r, pupil_r, kInk, 1.0);
    }
  }

  // mouth: AU25 parts the lips and exposes the interior
  {
    double gap_u = lip_gap0 + lip_up_max * k5(AUId::AU25);
    double gap_l = lip_gap0 + lip_down_max * k5(AUId::AU25);
    double yu = mouth_y - gap_u, yl = mouth_y + gap_l;
    if (yl - yu > 2 * lip_gap0) {
      cv.draw(
          [=](Vec2 p) {
            return dist_box(p, head_cx - interior_hw, yu, head_cx + interior_hw,
                            yl, 0.004);
          },
          kMouthInterior, 1.0, head_cx - interior_hw - 0.01, yu - 0.01,
          head_cx + interior_hw + 0.01, yl + 0.01);
    }
    draw_capsule(cv, {head_cx - lip_hw, yu}, {head_cx + lip_hw, yu}, lip_r,
                 kLips, 1.0);
    draw_capsule(cv, {head_cx - lip_hw, yl}, {head_cx + lip_hw, yl}, lip_r,
                 kLips, 1.0);
  }

  // mouth corner ticks: AU12 stretches them up and outward from a fixed
  // anchor
  {
    double up = tick_raise * k5(AUId::AU12);
    double out = tick_out * k5(AUId::AU12);
    for (int s = -1; s <= 1; s += 2) {
      double tx = head_cx + s * id.mouth_width / 2;
      Vec2 anchor{tx, mouth_y};
      Vec2 tip{tx + s * (tick_len + out), mouth_y - up};
      draw_capsule(cv, anchor, tip, tick_r, kInk, 0.9);
    }
  }

  return cv.to_image();
}

namespace {

struct Box {
  double x0, y0, x1, y1;
};

// Pixel-space padding: max stroke radius + AA reach + safety margin.
double mask_pad(double stroke_r, int size) {
  return stroke_r + layout::mask_margin_px / size;
}

std::vector<Box> mask_boxes(AUId au, int size) {
  using namespace layout;
  double ex_min = eye_sp_min / 2, ex_max = eye_sp_max / 2;
  std::vector<Box> boxes;
  switch (au) {
    case AUId::AU1: {  // inner brow segments (both sides)
      double pad = mask_pad(brow_th_max / 2, size);
      boxes.push_back({head_cx - ex_max + brow_seg_near - pad,
                       brow_y - brow_raise - pad,
                       head_cx - ex_min + brow_seg_far + pad, brow_y + pad});
      boxes.push_back({head_cx + ex_min - brow_seg_far - pad,
                       brow_y - brow_raise - pad,
                       head_cx + ex_max - brow_seg_near + pad, brow_y + pad});
      break;
    }
    case AUId::AU2: {  // outer brow segments
      double pad = mask_pad(brow_th_max / 2, size);
      boxes.push_back({head_cx - ex_max - brow_seg_far - pad,
                       brow_y - brow_raise - pad,
                       head_cx - ex_min - brow_seg_near + pad, brow_y + pad});
      boxes.push_back({head_cx + ex_min + brow_seg_near - pad,
                       brow_y - brow_raise - pad,
                       head_cx + ex_max + brow_seg_far + pad, brow_y + pad});
      break;
    }
    case AUId::AU4: {
      double pad = mask_pad(glab_r, size);
      boxes.push_back({head_cx - glab_x - pad, glab_y0 - pad,
                       head_cx + glab_x + pad, glab_y0 + glab_len + pad});
      break;
    }
    case AUId::AU5: {
      double pad = mask_pad(eye_outline_r, size);
      double ry_max = eye_ry * (1.0 + eye_widen);
      for (int s = -1; s <= 1; s += 2) {
        double cx_lo = head_cx + s * ex_min, cx_hi = head_cx + s * ex_max;
        boxes.push_back({std::min(cx_lo, cx_hi) - eye_rx - pad,
                         eye_cy - ry_max - pad,
                         std::max(cx_lo, cx_hi) + eye_rx + pad,
                         eye_cy + ry_max + pad});
      }
      break;
    }
    case AUId::AU9: {
      double pad = mask_pad(nose_crease_r, size);
      boxes.push_back({head_cx - nose_crease_hw - pad, nose_crease_y0 - pad,
                       head_cx + nose_crease_hw + pad,
                       nose_crease_y0 + 4 * nose_crease_dy + pad});
      break;
    }
    case AUId::AU12: {
      double pad = mask_pad(tick_r, size);
      double tx_min = mouth_w_min / 2, tx_max = mouth_w_max / 2;
      double reach = tick_len + tick_out;
      boxes.push_back({head_cx - tx_max - reach - pad,
                       mouth_y - tick_raise - pad, head_cx - tx_min + pad,
                       mouth_y + pad});
      boxes.push_back({head_cx + tx_min - pad, mouth_y - tick_raise - pad,
                       head_cx + tx_max + reach + pad, mouth_y + pad});
      break;
    }
    case AUId::AU25: {
      double pad = mask_pad(lip_r, size);
      boxes.push_back({head_cx - lip_hw - pad,
                       mouth_y - lip_gap0 - lip_up_max - pad,
                       head_cx + lip_hw + pad,
                       mouth_y + lip_gap0 + lip_down_max + pad});
      break;
    }
    case AUId::AU26: {
      double pad = mask_pad(chin_r, size);
      boxes.push_back({head_cx - chin_hw - pad, chin_y - pad,
                       head_cx + chin_hw + pad,
                       chin_y + chin_arc0 + chin_sag_max + pad});
      break;
    }
  }
  return boxes;
}

}  // namespace

int RegionMask::area() const {
  int n = 0;
  for (uint8_t c : cells) n += c != 0;
  return n;
}

RegionMask RegionMask::dilated(int px) const {
  RegionMask out = *this;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      if (test(y, x)) continue;
      bool near = false;
      for (int dy = -px; dy <= px && !near; ++dy)
        for (int dx = -px; dx <= px && !near; ++dx) {
          int ny = y + dy, nx = x + dx;
          if (ny >= 0 && ny < size && nx >= 0 && nx < size && test(ny, nx))
            near = true;
        }
      if (near) out.cells[size_t(y) * size + x] = 1;
    }
  return out;
}

RegionMask region_mask(AUId au, int size) {
  std::vector<Box> boxes = mask_boxes(au, size);
  RegionMask m;
  m.au = au;
  m.size = size;
  m.cells.assign(size_t(size) * size, 0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double px = (x + 0.5) / size, py = (y + 0.5) / size;
      for (const Box& b : boxes)
        if (px >= b.x0 && px <= b.x1 && py >= b.y0 && py <= b.y1) {
          m.cells[size_t(y) * size + x] = 1;
          break;
        }
    }
  return m;
}

}  // namespace lang2face
