#include <gtest/gtest.h>

#include <map>
#include <set>

#include "mvcl/error.hpp"
#include "mvcl/geometry.hpp"

namespace mvcl {
namespace {

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidConfig;
}

constexpr const char* kTriangleOff = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

TEST(ParseOff, MinimalTriangle) {
  const Mesh m = ParseOff(kTriangleOff);
  ASSERT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
  EXPECT_EQ(m.vertices[1], (Vec3{1, 0, 0}));
}

TEST(ParseOff, QuadIsFanSplit) {
  const Mesh m = ParseOff("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n");
  ASSERT_EQ(m.faces.size(), 2u);
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));
  EXPECT_EQ(m.faces[1], (Face{0, 2, 0}));
}

TEST(ParseOff, FusedHeaderAndComments) {
  const Mesh m = ParseOff("OFF3 1 0\n# a comment\n0 0 0\n1 0 0 # trailing\n0 1 0\n3 0 1 2\n");
  EXPECT_EQ(m.vertices.size(), 3u);
  EXPECT_EQ(m.faces.size(), 1u);
}

TEST(ParseOff, Errors) {
  EXPECT_EQ(CodeOf([] { ParseOff("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n"); }),
            ErrorCode::kIndexOutOfRange);
  EXPECT_EQ(CodeOf([] { ParseOff("PLY\n3 1 0\n"); }), ErrorCode::kMalformedHeader);
  EXPECT_EQ(CodeOf([] { ParseOff("OFF\n3 1 0\n0 0 0\n1 0 0\n"); }), ErrorCode::kTruncatedFile);
  EXPECT_EQ(CodeOf([] { ParseOff("OFF\n3 1 0\n0 0 0\n1 nan 0\n0 1 0\n3 0 1 2\n"); }),
            ErrorCode::kNonFiniteCoordinate);
}

TEST(ParseObj, Variants) {
  const Face tri{0, 1, 2};
  EXPECT_EQ(ParseObj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").faces.at(0), tri);
  EXPECT_EQ(ParseObj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\n").faces.at(0), tri);
  EXPECT_EQ(ParseObj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").faces.at(0), tri);
  EXPECT_EQ(CodeOf([] { ParseObj("v 0 0 0\nf 1 2 3\n"); }), ErrorCode::kIndexOutOfRange);
}

TEST(WriteOff, RoundTripIsIdentical) {
  ShapeClassSpec spec{0, "torus", GeneratorKind::kTorus, {0.7, 1.3}};
  const Mesh once = ParseOff(WriteOff(NormalizeMesh(GenerateShape(spec, 5))));
  const Mesh twice = ParseOff(WriteOff(once));
  EXPECT_EQ(once.vertices, twice.vertices);
  EXPECT_EQ(once.faces, twice.faces);
}

TEST(NormalizeMesh, CenterAndScale) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {2, 0, 0}};
  m.faces = {{0, 1, 1}};
  const Mesh n = NormalizeMesh(m);
  EXPECT_EQ(n.vertices[0], (Vec3{-0.5, 0, 0}));
  EXPECT_EQ(n.vertices[1], (Vec3{0.5, 0, 0}));
}

TEST(NormalizeMesh, DegenerateExtent) {
  Mesh m;
  m.vertices = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  m.faces = {{0, 1, 2}};
  EXPECT_EQ(CodeOf([&] { NormalizeMesh(m); }), ErrorCode::kDegenerateExtent);
}

TEST(NormalizeMesh, IdempotentOnEveryGenerator) {
  for (const auto& spec : DefaultCorpusClasses(6)) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Mesh once = NormalizeMesh(GenerateShape(spec, seed));
      EXPECT_EQ(NormalizeMesh(once).vertices, once.vertices) << spec.class_name << " " << seed;
    }
  }
}

TEST(GenerateShape, TopologyCounts) {
  // Counts follow from the tessellation with s = 24 segments:
  // UV sphere s*(s-1) ring vertices + 2 poles, 2s cap triangles + 2s(s-2)
  // quad triangles; closed cylinder 2s rim + 2 centers; cone s + apex + center;
  // torus s*s grid.
  struct Expect {
    GeneratorKind kind;
    std::size_t v, f;
  };
  const int s = kDefaultSegments;
  const std::size_t us = s;
  const Expect cases[] = {
      {GeneratorKind::kCube, 8, 12},
      {GeneratorKind::kSphere, us * (us - 1) + 2, 2 * us + 2 * us * (us - 2)},
      {GeneratorKind::kCylinder, 2 * us + 2, 4 * us},
      {GeneratorKind::kCone, us + 2, 2 * us},
      {GeneratorKind::kTorus, us * us, 2 * us * us},
      {GeneratorKind::kPyramid, 5, 6},
  };
  for (const auto& c : cases) {
    const Mesh m = GenerateShape({0, "x", c.kind, {1.0, 1.0}}, 0, s);
    EXPECT_EQ(m.vertices.size(), c.v) << GeneratorName(c.kind);
    EXPECT_EQ(m.faces.size(), c.f) << GeneratorName(c.kind);
  }
  EXPECT_EQ(GenerateShape({0, "s", GeneratorKind::kSphere, {1, 1}}, 0).vertices.size(), 554u);
}

TEST(GenerateShape, FacesValidAndNonDegenerate) {
  for (const auto& spec : DefaultCorpusClasses(6)) {
    const Mesh m = GenerateShape(spec, 11);
    for (const Face& f : m.faces) {
      for (auto idx : f) ASSERT_LT(idx, m.vertices.size());
      EXPECT_TRUE(f[0] != f[1] && f[1] != f[2] && f[0] != f[2]) << spec.class_name;
    }
  }
}

TEST(GenerateShape, Watertight) {
  // Every undirected edge of a closed manifold is shared by exactly two faces.
  for (const auto& spec : DefaultCorpusClasses(6)) {
    const Mesh m = GenerateShape(spec, 3);
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const Face& f : m.faces) {
      for (int e = 0; e < 3; ++e) {
        auto a = f[e], b = f[(e + 1) % 3];
        edges[{std::min(a, b), std::max(a, b)}]++;
      }
    }
    for (const auto& [edge, count] : edges) {
      EXPECT_EQ(count, 2) << spec.class_name;
    }
  }
}

TEST(GenerateShape, PureFunctionOfSpecAndSeed) {
  const ShapeClassSpec spec{2, "cyl", GeneratorKind::kCylinder, {0.7, 1.3}};
  EXPECT_EQ(GenerateShape(spec, 42), GenerateShape(spec, 42));
  EXPECT_NE(GenerateShape(spec, 42).vertices, GenerateShape(spec, 43).vertices);
}

TEST(GenerateShape, KindNames) {
  for (const auto& spec : DefaultCorpusClasses(6)) {
    EXPECT_EQ(ParseGeneratorKind(GeneratorName(spec.kind)), spec.kind);
  }
  EXPECT_EQ(CodeOf([] { ParseGeneratorKind("dodecahedron"); }),
            ErrorCode::kUnknownGeneratorKind);
  std::set<GeneratorKind> kinds;
  for (const auto& spec : DefaultCorpusClasses(6)) kinds.insert(spec.kind);
  EXPECT_EQ(kinds.size(), 6u);
}

}  // namespace
}  // namespace mvcl
