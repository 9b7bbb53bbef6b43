#include "mvcl/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "mvcl/error.hpp"
#include "mvcl/rng.hpp"

namespace mvcl {

double Norm(Vec3 a) { return std::sqrt(Dot(a, a)); }

Vec3 Normalized(Vec3 a) {
  const double n = Norm(a);
  if (n == 0.0) return {};
  return (1.0 / n) * a;
}

namespace {

/// Splits a line into whitespace-separated tokens, dropping '#' comments.
std::vector<std::string_view> Tokenize(std::string_view line) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Non-empty, comment-stripped lines as token lists.
std::vector<std::vector<std::string_view>> TokenLines(std::string_view text) {
  std::vector<std::vector<std::string_view>> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto tokens = Tokenize(text.substr(start, end - start));
    if (!tokens.empty()) lines.push_back(std::move(tokens));
    start = end + 1;
  }
  return lines;
}

template <typename Int>
std::optional<Int> ParseInt(std::string_view s) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> ParseDouble(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

Vec3 ParseVertex(const std::vector<std::string_view>& tokens, std::size_t first,
                 std::size_t line_no) {
  if (tokens.size() < first + 3) {
    Fail(ErrorCode::kTruncatedFile, "vertex on line " + std::to_string(line_no) +
                                        " has fewer than 3 coordinates");
  }
  double c[3];
  for (int k = 0; k < 3; ++k) {
    auto v = ParseDouble(tokens[first + k]);
    if (!v) {
      Fail(ErrorCode::kMalformedHeader, "unparsable coordinate '" +
                                            std::string(tokens[first + k]) + "' on line " +
                                            std::to_string(line_no));
    }
    if (!std::isfinite(*v)) {
      Fail(ErrorCode::kNonFiniteCoordinate, "non-finite coordinate on line " +
                                                std::to_string(line_no));
    }
    c[k] = *v;
  }
  return {c[0], c[1], c[2]};
}

void FanTriangulate(const std::vector<std::uint32_t>& polygon, std::vector<Face>& faces) {
  for (std::size_t k = 1; k + 1 < polygon.size(); ++k) {
    faces.push_back({polygon[0], polygon[k], polygon[k + 1]});
  }
}

}  // namespace

Mesh ParseOff(std::string_view text) {
  const auto lines = TokenLines(text);
  if (lines.empty()) Fail(ErrorCode::kMalformedHeader, "empty OFF document");

  // Header: "OFF" alone, "OFF N M K", or the fused "OFFN M K".
  std::size_t line = 0;
  std::vector<std::string_view> counts = lines[0];
  if (counts[0].starts_with("OFF")) {
    std::string_view rest = counts[0].substr(3);
    counts.erase(counts.begin());
    if (!rest.empty()) counts.insert(counts.begin(), rest);
    if (counts.empty()) {
      if (lines.size() < 2) Fail(ErrorCode::kMalformedHeader, "missing counts line");
      counts = lines[1];
      line = 2;
    } else {
      line = 1;
    }
  } else {
    line = 1;
  }
  if (counts.size() < 2) Fail(ErrorCode::kMalformedHeader, "counts line needs vertex and face counts");
  auto nv = ParseInt<std::uint32_t>(counts[0]);
  auto nf = ParseInt<std::uint32_t>(counts[1]);
  if (!nv || !nf) Fail(ErrorCode::kMalformedHeader, "garbled vertex/face counts");

  Mesh mesh;
  mesh.vertices.reserve(*nv);
  for (std::uint32_t i = 0; i < *nv; ++i, ++line) {
    if (line >= lines.size()) {
      Fail(ErrorCode::kTruncatedFile, "expected " + std::to_string(*nv) + " vertices, found " +
                                          std::to_string(i));
    }
    mesh.vertices.push_back(ParseVertex(lines[line], 0, line + 1));
  }

  mesh.faces.reserve(*nf);
  std::vector<std::uint32_t> polygon;
  for (std::uint32_t f = 0; f < *nf; ++f, ++line) {
    if (line >= lines.size()) {
      Fail(ErrorCode::kTruncatedFile, "expected " + std::to_string(*nf) + " faces, found " +
                                          std::to_string(f));
    }
    const auto& tokens = lines[line];
    auto n = ParseInt<std::uint32_t>(tokens[0]);
    if (!n || *n < 3) Fail(ErrorCode::kMalformedHeader, "bad face arity in face " + std::to_string(f));
    if (tokens.size() < *n + 1) Fail(ErrorCode::kTruncatedFile, "face " + std::to_string(f) + " is short");
    polygon.clear();
    for (std::uint32_t k = 0; k < *n; ++k) {
      auto idx = ParseInt<std::int64_t>(tokens[k + 1]);
      if (!idx) Fail(ErrorCode::kMalformedHeader, "unparsable index in face " + std::to_string(f));
      if (*idx < 0 || *idx >= static_cast<std::int64_t>(*nv)) {
        Fail(ErrorCode::kIndexOutOfRange, "face " + std::to_string(f) + " references vertex " +
                                              std::to_string(*idx) + " of " + std::to_string(*nv));
      }
      polygon.push_back(static_cast<std::uint32_t>(*idx));
    }
    FanTriangulate(polygon, mesh.faces);
  }
  return mesh;
}

Mesh ParseObj(std::string_view text) {
  Mesh mesh;
  const auto lines = TokenLines(text);
  std::vector<std::uint32_t> polygon;
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const auto& tokens = lines[l];
    if (tokens[0] == "v") {
      mesh.vertices.push_back(ParseVertex(tokens, 1, l + 1));
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) Fail(ErrorCode::kTruncatedFile, "face with fewer than 3 vertices");
      polygon.clear();
      const auto count = static_cast<std::int64_t>(mesh.vertices.size());
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        std::string_view ref = tokens[k].substr(0, tokens[k].find('/'));
        auto idx = ParseInt<std::int64_t>(ref);
        if (!idx) Fail(ErrorCode::kMalformedHeader, "unparsable face index '" + std::string(ref) + "'");
        const std::int64_t resolved = *idx > 0 ? *idx - 1 : count + *idx;
        if (*idx == 0 || resolved < 0 || resolved >= count) {
          Fail(ErrorCode::kIndexOutOfRange, "face index " + std::to_string(*idx) + " with " +
                                                std::to_string(count) + " vertices");
        }
        polygon.push_back(static_cast<std::uint32_t>(resolved));
      }
      FanTriangulate(polygon, mesh.faces);
    }
  }
  return mesh;
}

std::string WriteOff(const Mesh& mesh) {
  std::string out = "OFF\n" + std::to_string(mesh.vertices.size()) + " " +
                    std::to_string(mesh.faces.size()) + " 0\n";
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", v.x, v.y, v.z);
    out += buf;
  }
  for (const Face& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "3 %u %u %u\n", f[0], f[1], f[2]);
    out += buf;
  }
  return out;
}

Mesh LoadMesh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  Mesh mesh = path.ends_with(".obj") ? ParseObj(text) : ParseOff(text);
  auto slash = path.find_last_of('/');
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  mesh.name = stem.substr(0, stem.find_last_of('.'));
  return mesh;
}

Mesh NormalizeMesh(const Mesh& mesh) {
  if (mesh.vertices.empty()) Fail(ErrorCode::kEmptyMesh, "mesh '" + mesh.name + "' has no vertices");
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const Vec3& v : mesh.vertices) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (!(extent > 0.0)) Fail(ErrorCode::kDegenerateExtent, "all vertices coincide");

  // A mesh that is already normalized up to rounding maps to itself, which
  // makes the operation exactly idempotent.
  constexpr double kSnap = 1e-12;
  if (std::abs(extent - 1.0) <= kSnap && std::abs(center.x) <= kSnap &&
      std::abs(center.y) <= kSnap && std::abs(center.z) <= kSnap) {
    return mesh;
  }
  Mesh out = mesh;
  const double scale = 1.0 / extent;
  for (Vec3& v : out.vertices) v = scale * (v - center);
  return out;
}

std::string_view GeneratorName(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kCube: return "cube";
    case GeneratorKind::kSphere: return "sphere";
    case GeneratorKind::kCylinder: return "cylinder";
    case GeneratorKind::kCone: return "cone";
    case GeneratorKind::kTorus: return "torus";
    case GeneratorKind::kPyramid: return "pyramid";
  }
  return "unknown";
}

GeneratorKind ParseGeneratorKind(std::string_view name) {
  for (auto kind : {GeneratorKind::kCube, GeneratorKind::kSphere, GeneratorKind::kCylinder,
                    GeneratorKind::kCone, GeneratorKind::kTorus, GeneratorKind::kPyramid}) {
    if (GeneratorName(kind) == name) return kind;
  }
  Fail(ErrorCode::kUnknownGeneratorKind, "unknown generator '" + std::string(name) + "'");
}

namespace {

class MeshBuilder {
 public:
  std::uint32_t Add(Vec3 v) {
    mesh_.vertices.push_back(v);
    return static_cast<std::uint32_t>(mesh_.vertices.size() - 1);
  }

  /// Adds a triangle wound so its normal points away from `inside`.
  void Tri(std::uint32_t a, std::uint32_t b, std::uint32_t c, Vec3 inside) {
    const auto& v = mesh_.vertices;
    const Vec3 n = Cross(v[b] - v[a], v[c] - v[a]);
    const Vec3 centroid = (1.0 / 3.0) * (v[a] + v[b] + v[c]);
    if (Dot(n, centroid - inside) < 0.0) std::swap(b, c);
    mesh_.faces.push_back({a, b, c});
  }

  Mesh Take() { return std::move(mesh_); }

 private:
  Mesh mesh_;
};

Mesh Cube() {
  MeshBuilder b;
  std::uint32_t id[8];
  for (int i = 0; i < 8; ++i) {
    id[i] = b.Add({(i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5});
  }
  // Each quad listed as a cycle of corner bit patterns.
  const int quads[6][4] = {{0, 2, 6, 4}, {1, 3, 7, 5}, {0, 1, 5, 4},
                           {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 5, 7, 6}};
  for (const auto& q : quads) {
    b.Tri(id[q[0]], id[q[1]], id[q[2]], {});
    b.Tri(id[q[0]], id[q[2]], id[q[3]], {});
  }
  return b.Take();
}

Mesh Sphere(int seg) {
  MeshBuilder b;
  const std::uint32_t top = b.Add({0.0, 0.5, 0.0});
  for (int i = 1; i < seg; ++i) {
    const double lat = std::numbers::pi * i / seg;
    for (int j = 0; j < seg; ++j) {
      const double lon = 2.0 * std::numbers::pi * j / seg;
      b.Add({0.5 * std::sin(lat) * std::cos(lon), 0.5 * std::cos(lat),
             0.5 * std::sin(lat) * std::sin(lon)});
    }
  }
  const std::uint32_t bottom = b.Add({0.0, -0.5, 0.0});
  auto ring = [seg](int i, int j) {
    return static_cast<std::uint32_t>(1 + (i - 1) * seg + (j % seg));
  };
  for (int j = 0; j < seg; ++j) b.Tri(top, ring(1, j), ring(1, j + 1), {});
  for (int i = 1; i + 1 < seg; ++i) {
    for (int j = 0; j < seg; ++j) {
      b.Tri(ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), {});
      b.Tri(ring(i, j), ring(i + 1, j + 1), ring(i, j + 1), {});
    }
  }
  for (int j = 0; j < seg; ++j) b.Tri(bottom, ring(seg - 1, j), ring(seg - 1, j + 1), {});
  return b.Take();
}

/// Cylinder (top_radius > 0) or cone (top_radius == 0) along y.
Mesh Frustum(int seg, double top_radius) {
  MeshBuilder b;
  const bool cone = top_radius == 0.0;
  std::vector<std::uint32_t> lower(seg), upper(seg);
  for (int j = 0; j < seg; ++j) {
    const double a = 2.0 * std::numbers::pi * j / seg;
    lower[j] = b.Add({0.5 * std::cos(a), -0.5, 0.5 * std::sin(a)});
  }
  if (cone) {
    const std::uint32_t apex = b.Add({0.0, 0.5, 0.0});
    for (int j = 0; j < seg; ++j) b.Tri(apex, lower[j], lower[(j + 1) % seg], {});
  } else {
    for (int j = 0; j < seg; ++j) {
      const double a = 2.0 * std::numbers::pi * j / seg;
      upper[j] = b.Add({top_radius * std::cos(a), 0.5, top_radius * std::sin(a)});
    }
    const std::uint32_t top_center = b.Add({0.0, 0.5, 0.0});
    for (int j = 0; j < seg; ++j) {
      const int k = (j + 1) % seg;
      b.Tri(lower[j], lower[k], upper[k], {});
      b.Tri(lower[j], upper[k], upper[j], {});
      b.Tri(top_center, upper[j], upper[k], {});
    }
  }
  const std::uint32_t bottom_center = b.Add({0.0, -0.5, 0.0});
  for (int j = 0; j < seg; ++j) b.Tri(bottom_center, lower[j], lower[(j + 1) % seg], {});
  return b.Take();
}

Mesh Torus(int seg) {
  MeshBuilder b;
  constexpr double kMajor = 0.35;
  constexpr double kMinor = 0.15;
  for (int i = 0; i < seg; ++i) {
    const double u = 2.0 * std::numbers::pi * i / seg;
    for (int j = 0; j < seg; ++j) {
      const double v = 2.0 * std::numbers::pi * j / seg;
      const double r = kMajor + kMinor * std::cos(v);
      b.Add({r * std::cos(u), kMinor * std::sin(v), r * std::sin(u)});
    }
  }
  auto at = [seg](int i, int j) { return static_cast<std::uint32_t>((i % seg) * seg + (j % seg)); };
  for (int i = 0; i < seg; ++i) {
    const double u = 2.0 * std::numbers::pi * (i + 0.5) / seg;
    const Vec3 tube{kMajor * std::cos(u), 0.0, kMajor * std::sin(u)};
    for (int j = 0; j < seg; ++j) {
      b.Tri(at(i, j), at(i + 1, j), at(i + 1, j + 1), tube);
      b.Tri(at(i, j), at(i + 1, j + 1), at(i, j + 1), tube);
    }
  }
  return b.Take();
}

Mesh Pyramid() {
  MeshBuilder b;
  const std::uint32_t c0 = b.Add({-0.5, -0.5, -0.5});
  const std::uint32_t c1 = b.Add({0.5, -0.5, -0.5});
  const std::uint32_t c2 = b.Add({0.5, -0.5, 0.5});
  const std::uint32_t c3 = b.Add({-0.5, -0.5, 0.5});
  const std::uint32_t apex = b.Add({0.0, 0.5, 0.0});
  const Vec3 inside{0.0, -0.25, 0.0};
  b.Tri(apex, c0, c1, inside);
  b.Tri(apex, c1, c2, inside);
  b.Tri(apex, c2, c3, inside);
  b.Tri(apex, c3, c0, inside);
  b.Tri(c0, c1, c2, inside);
  b.Tri(c0, c2, c3, inside);
  return b.Take();
}

}  // namespace

Mesh GenerateShape(const ShapeClassSpec& spec, std::uint64_t seed, int segments) {
  if (!(spec.jitter[0] > 0.0) || spec.jitter[1] < spec.jitter[0]) {
    Fail(ErrorCode::kInvalidConfig, "jitter range must satisfy 0 < lo <= hi");
  }
  if (segments < 3) Fail(ErrorCode::kInvalidConfig, "tessellation needs at least 3 segments");
  Mesh mesh;
  switch (spec.kind) {
    case GeneratorKind::kCube: mesh = Cube(); break;
    case GeneratorKind::kSphere: mesh = Sphere(segments); break;
    case GeneratorKind::kCylinder: mesh = Frustum(segments, 0.5); break;
    case GeneratorKind::kCone: mesh = Frustum(segments, 0.0); break;
    case GeneratorKind::kTorus: mesh = Torus(segments); break;
    case GeneratorKind::kPyramid: mesh = Pyramid(); break;
    default: Fail(ErrorCode::kUnknownGeneratorKind, "generator kind out of range");
  }
  Rng rng(seed, HashName("shape-jitter"));
  const double sx = rng.Uniform(spec.jitter[0], spec.jitter[1]);
  const double sy = rng.Uniform(spec.jitter[0], spec.jitter[1]);
  const double sz = rng.Uniform(spec.jitter[0], spec.jitter[1]);
  for (Vec3& v : mesh.vertices) v = {v.x * sx, v.y * sy, v.z * sz};
  mesh.name = spec.class_name;
  return mesh;
}

std::vector<ShapeClassSpec> DefaultCorpusClasses(int n_classes, std::array<double, 2> jitter) {
  constexpr GeneratorKind kKinds[] = {GeneratorKind::kCube,  GeneratorKind::kSphere,
                                      GeneratorKind::kCylinder, GeneratorKind::kCone,
                                      GeneratorKind::kTorus, GeneratorKind::kPyramid};
  if (n_classes < 2 || n_classes > 6) {
    Fail(ErrorCode::kInvalidConfig, "synthetic corpus supports 2..6 classes");
  }
  std::vector<ShapeClassSpec> out;
  for (int c = 0; c < n_classes; ++c) {
    out.push_back({c, std::string(GeneratorName(kKinds[c])), kKinds[c], jitter});
  }
  return out;
}

}  // namespace mvcl
