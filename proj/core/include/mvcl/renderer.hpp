#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvcl/geometry.hpp"

namespace mvcl {

struct Camera {
  Vec3 eye;
  Vec3 target;
  Vec3 up{0.0, 1.0, 0.0};
  double vertical_fov = 45.0;  // degrees
  double azimuth = 0.0;        // degrees
  double elevation = 30.0;     // degrees
  double distance = 2.5;
};

struct RenderParams {
  int image_size = 64;
  int n_views = 12;
  double elevation = 30.0;
  double distance = 2.5;
  double vertical_fov = 45.0;
  double background = 0.0;
  int supersample = 2;
};

/// Row-major grayscale image with values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

  float& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  float at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }

  friend bool operator==(const Image&, const Image&) = default;
};

struct ViewSet {
  std::string shape_id;
  int label = 0;
  std::vector<Image> views;
  std::vector<Camera> cameras;
};

void ValidateRenderParams(const RenderParams& params);

/// Camera `view_index` of the azimuth ring: azimuth = index * 360 / n_views
/// at the configured elevation, looking at the origin.
Camera MakeCamera(int view_index, const RenderParams& params);

/// Z-buffered rasterization with a headlight Lambertian shade interpolated
/// perspective-correctly from per-vertex intensities. Both faces of every
/// triangle are drawn. Bit-deterministic.
Image RenderView(const Mesh& mesh, const Camera& camera, const RenderParams& params);

ViewSet RenderMultiview(const Mesh& mesh, const std::string& shape_id, int label,
                        const RenderParams& params);

/// Number of pixels that differ from the background value.
std::size_t ForegroundCount(const Image& image, double background);

/// 8-bit quantization used on write: round(v * 255).
std::uint8_t Quantize(float v);
Image Quantized(const Image& image);

/// Binary P5 with maxval 255.
std::string EncodePgm(const Image& image);
/// Decodes P5, or P6 converted to luma (0.299 R + 0.587 G + 0.114 B).
Image DecodePnm(const std::string& bytes);

void WritePpm(const Image& image, const std::string& path);
Image ReadPpm(const std::string& path);

}  // namespace mvcl
