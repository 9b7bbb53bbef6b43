#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mvcl {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double Dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 Cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double Norm(Vec3 a);
/// Returns the zero vector for zero input.
Vec3 Normalized(Vec3 a);

using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh. Every face index is < vertices.size() and every
/// coordinate is finite; the parsers and generators enforce this.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string name;

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

/// Parses an OFF document. Accepts "OFF\nN M K" and the fused "OFFN M K"
/// header, '#' comments, and fan-triangulates n-gon faces.
Mesh ParseOff(std::string_view text);

/// Parses the v/f subset of Wavefront OBJ. Face indices may be negative
/// (relative) and carry /vt/vn suffixes, which are dropped.
Mesh ParseObj(std::string_view text);

/// Canonical OFF writer: fixed notation with 6 decimals.
std::string WriteOff(const Mesh& mesh);

/// Reads a .off or .obj file, choosing the parser by extension.
Mesh LoadMesh(const std::string& path);

/// Centers the bounding box at the origin and scales its largest extent
/// to exactly 1.
Mesh NormalizeMesh(const Mesh& mesh);

enum class GeneratorKind { kCube, kSphere, kCylinder, kCone, kTorus, kPyramid };

std::string_view GeneratorName(GeneratorKind kind);
GeneratorKind ParseGeneratorKind(std::string_view name);

struct ShapeClassSpec {
  int class_id = 0;
  std::string class_name;
  GeneratorKind kind = GeneratorKind::kCube;
  /// Per-axis scale factor range; lower bound must be > 0.
  std::array<double, 2> jitter{1.0, 1.0};
};

inline constexpr int kDefaultSegments = 24;

/// Deterministic watertight primitive with per-axis scale jitter drawn from
/// a stream keyed by `seed`.
Mesh GenerateShape(const ShapeClassSpec& spec, std::uint64_t seed,
                   int segments = kDefaultSegments);

/// The default six-class synthetic corpus: one class per generator kind.
std::vector<ShapeClassSpec> DefaultCorpusClasses(int n_classes,
                                                 std::array<double, 2> jitter = {0.7, 1.3});

}  // namespace mvcl
