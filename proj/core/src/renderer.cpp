#include "mvcl/renderer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "mvcl/error.hpp"

namespace mvcl {
namespace {

constexpr double kNearPlane = 1e-3;
// Adjacent faces whose normals differ by more than this angle do not share
// a smoothed vertex normal, so flat-faced solids shade flat.
constexpr double kCreaseCos = 0.70710678118654752;  // 45 degrees

double Radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

struct ProjectedVertex {
  double x = 0.0;  // pixel coordinates, origin at top-left corner
  double y = 0.0;
  double depth = 0.0;
  double intensity = 0.0;
};

/// Per-face-corner shading normals: angle-weighted average of the face
/// normals incident to the vertex that lie within the crease angle of the
/// face itself. Orientation of neighbours is aligned first so inconsistent
/// winding does not cancel normals.
std::vector<std::array<Vec3, 3>> CornerNormals(const Mesh& mesh) {
  const auto& v = mesh.vertices;
  const std::size_t nf = mesh.faces.size();
  std::vector<Vec3> face_normal(nf);
  std::vector<std::array<double, 3>> corner_angle(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const Face& t = mesh.faces[f];
    face_normal[f] = Normalized(Cross(v[t[1]] - v[t[0]], v[t[2]] - v[t[0]]));
    for (int c = 0; c < 3; ++c) {
      const Vec3 e1 = Normalized(v[t[(c + 1) % 3]] - v[t[c]]);
      const Vec3 e2 = Normalized(v[t[(c + 2) % 3]] - v[t[c]]);
      corner_angle[f][c] = std::acos(std::clamp(Dot(e1, e2), -1.0, 1.0));
    }
  }

  // vertex -> (face, corner) incidence in CSR form
  std::vector<std::uint32_t> offsets(v.size() + 1, 0);
  for (const Face& t : mesh.faces) {
    for (std::uint32_t idx : t) ++offsets[idx + 1];
  }
  for (std::size_t i = 0; i < v.size(); ++i) offsets[i + 1] += offsets[i];
  std::vector<std::pair<std::uint32_t, int>> incident(offsets.back());
  std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
  for (std::size_t f = 0; f < nf; ++f) {
    for (int c = 0; c < 3; ++c) {
      incident[fill[mesh.faces[f][c]]++] = {static_cast<std::uint32_t>(f), c};
    }
  }

  std::vector<std::array<Vec3, 3>> out(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const Vec3 nf_ = face_normal[f];
    for (int c = 0; c < 3; ++c) {
      const std::uint32_t vi = mesh.faces[f][c];
      Vec3 sum{};
      for (std::uint32_t k = offsets[vi]; k < offsets[vi + 1]; ++k) {
        const auto [g, gc] = incident[k];
        Vec3 ng = face_normal[g];
        if (Dot(ng, nf_) < 0.0) ng = -1.0 * ng;
        if (Dot(ng, nf_) < kCreaseCos) continue;
        sum = sum + corner_angle[g][gc] * ng;
      }
      const Vec3 n = Normalized(sum);
      out[f][c] = Norm(n) > 0.0 ? n : nf_;
    }
  }
  return out;
}

void RasterizeTriangle(const ProjectedVertex& a, const ProjectedVertex& b,
                       const ProjectedVertex& c, int size, std::vector<double>& inv_depth,
                       std::vector<double>& color) {
  double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  if (area == 0.0 || !std::isfinite(area)) return;
  const ProjectedVertex* p0 = &a;
  const ProjectedVertex* p1 = &b;
  const ProjectedVertex* p2 = &c;
  if (area < 0.0) {
    std::swap(p1, p2);
    area = -area;
  }
  const int x_min = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}))));
  const int x_max = std::min(size - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}))));
  const int y_min = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}))));
  const int y_max = std::min(size - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}))));

  const double w0 = 1.0 / p0->depth, w1 = 1.0 / p1->depth, w2 = 1.0 / p2->depth;
  for (int py = y_min; py <= y_max; ++py) {
    const double sy = py + 0.5;
    for (int px = x_min; px <= x_max; ++px) {
      const double sx = px + 0.5;
      const double e0 = (p2->x - p1->x) * (sy - p1->y) - (p2->y - p1->y) * (sx - p1->x);
      const double e1 = (p0->x - p2->x) * (sy - p2->y) - (p0->y - p2->y) * (sx - p2->x);
      const double e2 = (p1->x - p0->x) * (sy - p0->y) - (p1->y - p0->y) * (sx - p0->x);
      if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
      const double l0 = e0 / area, l1 = e1 / area, l2 = e2 / area;
      const double inv_w = l0 * w0 + l1 * w1 + l2 * w2;
      const std::size_t idx = std::size_t(py) * size + px;
      if (inv_w <= inv_depth[idx]) continue;
      inv_depth[idx] = inv_w;
      const double shade =
          (l0 * w0 * p0->intensity + l1 * w1 * p1->intensity + l2 * w2 * p2->intensity) / inv_w;
      color[idx] = std::clamp(shade, 0.0, 1.0);
    }
  }
}

}  // namespace

void ValidateRenderParams(const RenderParams& params) {
  if (params.image_size < 16) Fail(ErrorCode::kInvalidConfig, "image_size must be >= 16");
  if (params.n_views < 1) Fail(ErrorCode::kInvalidConfig, "n_views must be >= 1");
  if (params.supersample < 1) Fail(ErrorCode::kInvalidConfig, "supersample must be >= 1");
  if (!(params.distance > 0.0)) Fail(ErrorCode::kInvalidConfig, "distance must be > 0");
  if (!(params.vertical_fov > 0.0 && params.vertical_fov < 180.0)) {
    Fail(ErrorCode::kInvalidConfig, "vertical_fov must be in (0, 180)");
  }
  if (params.background < 0.0 || params.background > 1.0) {
    Fail(ErrorCode::kInvalidConfig, "background must be in [0, 1]");
  }
}

Camera MakeCamera(int view_index, const RenderParams& params) {
  if (view_index < 0 || view_index >= params.n_views) {
    Fail(ErrorCode::kViewIndexOutOfRange, "view " + std::to_string(view_index) + " of " +
                                              std::to_string(params.n_views));
  }
  Camera cam;
  cam.azimuth = view_index * (360.0 / params.n_views);
  cam.elevation = params.elevation;
  cam.distance = params.distance;
  cam.vertical_fov = params.vertical_fov;
  const double a = Radians(cam.azimuth);
  const double e = Radians(cam.elevation);
  cam.eye = {params.distance * std::cos(e) * std::sin(a), params.distance * std::sin(e),
             params.distance * std::cos(e) * std::cos(a)};
  cam.target = {};
  cam.up = {0.0, 1.0, 0.0};
  return cam;
}

Image RenderView(const Mesh& mesh, const Camera& camera, const RenderParams& params) {
  ValidateRenderParams(params);
  const Vec3 to_target = camera.target - camera.eye;
  if (!(Norm(to_target) > 0.0)) Fail(ErrorCode::kDegenerateCamera, "eye coincides with target");
  if (!(camera.vertical_fov > 0.0 && camera.vertical_fov < 180.0)) {
    Fail(ErrorCode::kDegenerateCamera, "vertical_fov out of range");
  }
  const Vec3 forward = Normalized(to_target);
  const Vec3 side = Cross(forward, camera.up);
  if (Norm(side) < 1e-9 * std::max(1.0, Norm(camera.up))) {
    Fail(ErrorCode::kDegenerateCamera, "up vector is parallel to the view direction");
  }
  const Vec3 right = Normalized(side);
  const Vec3 up = Cross(right, forward);
  const Vec3 to_light = -1.0 * forward;

  const int size = params.image_size * params.supersample;
  const double focal = 0.5 * size / std::tan(Radians(camera.vertical_fov) / 2.0);
  const double half = 0.5 * size;

  std::vector<ProjectedVertex> projected(mesh.vertices.size());
  std::vector<bool> in_front(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 rel = mesh.vertices[i] - camera.eye;
    const double depth = Dot(rel, forward);
    in_front[i] = depth > kNearPlane;
    projected[i].depth = depth;
    if (in_front[i]) {
      projected[i].x = half + focal * Dot(rel, right) / depth;
      projected[i].y = half - focal * Dot(rel, up) / depth;
    }
  }

  const auto normals = CornerNormals(mesh);
  std::vector<double> inv_depth(std::size_t(size) * size, 0.0);
  std::vector<double> color(std::size_t(size) * size, params.background);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    // Triangles crossing the near plane are dropped rather than clipped.
    if (!in_front[t[0]] || !in_front[t[1]] || !in_front[t[2]]) continue;
    ProjectedVertex corner[3];
    for (int c = 0; c < 3; ++c) {
      corner[c] = projected[t[c]];
      // Two-sided headlight: the light travels along the view direction.
      corner[c].intensity = std::abs(Dot(normals[f][c], to_light));
    }
    RasterizeTriangle(corner[0], corner[1], corner[2], size, inv_depth, color);
  }

  Image out(params.image_size, params.image_size);
  const int ss = params.supersample;
  const double norm = 1.0 / (ss * ss);
  for (int y = 0; y < params.image_size; ++y) {
    for (int x = 0; x < params.image_size; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < ss; ++dy) {
        for (int dx = 0; dx < ss; ++dx) acc += color[std::size_t(y * ss + dy) * size + (x * ss + dx)];
      }
      out.at(x, y) = static_cast<float>(std::clamp(acc * norm, 0.0, 1.0));
    }
  }
  return out;
}

ViewSet RenderMultiview(const Mesh& mesh, const std::string& shape_id, int label,
                        const RenderParams& params) {
  ValidateRenderParams(params);
  ViewSet set;
  set.shape_id = shape_id;
  set.label = label;
  for (int i = 0; i < params.n_views; ++i) {
    set.cameras.push_back(MakeCamera(i, params));
    set.views.push_back(RenderView(mesh, set.cameras.back(), params));
  }
  return set;
}

std::size_t ForegroundCount(const Image& image, double background) {
  const float bg = static_cast<float>(background);
  return static_cast<std::size_t>(
      std::count_if(image.pixels.begin(), image.pixels.end(), [bg](float p) { return p != bg; }));
}

std::uint8_t Quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

Image Quantized(const Image& image) {
  Image out = image;
  for (float& p : out.pixels) p = static_cast<float>(Quantize(p)) / 255.0f;
  return out;
}

std::string EncodePgm(const Image& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (float p : image.pixels) out.push_back(static_cast<char>(Quantize(p)));
  return out;
}

Image DecodePnm(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") Fail(ErrorCode::kUnsupportedMagic, "magic '" + magic + "'");
  int dims[3];
  for (int& d : dims) {
    const std::string tok = next_token();
    try {
      d = std::stoi(tok);
    } catch (const std::exception&) {
      Fail(ErrorCode::kTruncatedPixelData, "bad header field '" + tok + "'");
    }
  }
  const int width = dims[0], height = dims[1], maxval = dims[2];
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    Fail(ErrorCode::kTruncatedPixelData, "unsupported dimensions or maxval");
  }
  ++pos;  // single whitespace byte after maxval
  const int channels = magic == "P6" ? 3 : 1;
  const std::size_t need = std::size_t(width) * height * channels;
  if (pos > bytes.size() || bytes.size() - pos < need) {
    Fail(ErrorCode::kTruncatedPixelData, "expected " + std::to_string(need) + " pixel bytes");
  }
  Image img(width, height);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (channels == 1) {
      img.pixels[i] = static_cast<float>(data[i]) / static_cast<float>(maxval);
    } else {
      const double luma = 0.299 * data[3 * i] + 0.587 * data[3 * i + 1] + 0.114 * data[3 * i + 2];
      img.pixels[i] = static_cast<float>(luma / maxval);
    }
  }
  return img;
}

void WritePpm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIoFailure, "cannot write " + path);
  const std::string bytes = EncodePgm(image);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorCode::kIoFailure, "short write to " + path);
}

Image ReadPpm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return DecodePnm(ss.str());
}

}  // namespace mvcl
