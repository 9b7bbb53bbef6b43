#include <algorithm>
#include <cmath>

#include "mvcl/data.hpp"
#include "mvcl/error.hpp"

namespace mvcl {

void ValidateAugmentConfig(const AugmentConfig& cfg) {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      Fail(ErrorCode::kInvalidConfig, std::string(name) + " must lie in [0, 1]");
    }
  };
  prob(cfg.flip_prob, "flip_prob");
  prob(cfg.jitter_prob, "jitter_prob");
  prob(cfg.grayscale_prob, "grayscale_prob");
  if (!(cfg.crop_scale_lo > 0.0 && cfg.crop_scale_lo <= cfg.crop_scale_hi && cfg.crop_scale_hi <= 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "crop_scale must satisfy 0 < lo <= hi <= 1");
  }
  if (!(cfg.ratio_lo > 0.0 && cfg.ratio_lo <= cfg.ratio_hi)) {
    Fail(ErrorCode::kInvalidConfig, "crop ratio range is invalid");
  }
  if (!(cfg.jitter_strength >= 0.0 && cfg.jitter_strength < 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "jitter_strength must lie in [0, 1)");
  }
  if (!(cfg.std > 0.0) || !std::isfinite(cfg.mean)) {
    Fail(ErrorCode::kInvalidConfig, "normalization needs finite mean and std > 0");
  }
}

Rng AugmentStream(std::uint64_t seed, std::uint64_t item, std::uint64_t epoch, int slot) {
  return Rng(seed, StreamId({HashName("augment"), item, epoch, static_cast<std::uint64_t>(slot)}));
}

std::vector<float> ResizeCrop(const Image& image, int x0, int y0, int w, int h, int out_h,
                              int out_w) {
  std::vector<float> out(std::size_t(out_h) * out_w);
  const double sx = double(w) / out_w, sy = double(h) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = y0 + (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, double(y0), double(y0 + h - 1));
    const int iy = static_cast<int>(std::floor(fy));
    const int iy1 = std::min(iy + 1, y0 + h - 1);
    const double ty = fy - iy;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = x0 + (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, double(x0), double(x0 + w - 1));
      const int ix = static_cast<int>(std::floor(fx));
      const int ix1 = std::min(ix + 1, x0 + w - 1);
      const double tx = fx - ix;
      const double top = image.at(ix, iy) * (1.0 - tx) + image.at(ix1, iy) * tx;
      const double bottom = image.at(ix, iy1) * (1.0 - tx) + image.at(ix1, iy1) * tx;
      out[std::size_t(oy) * out_w + ox] = static_cast<float>(top * (1.0 - ty) + bottom * ty);
    }
  }
  return out;
}

std::vector<float> Augment(const Image& image, const AugmentConfig& cfg, Rng& rng, int out_h,
                           int out_w) {
  const int W = image.width, H = image.height;
  const double area = double(W) * H;
  int cx = 0, cy = 0, cw = W, ch = H;
  bool found = false;
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    const double target = area * rng.Uniform(cfg.crop_scale_lo, cfg.crop_scale_hi);
    const double ratio =
        std::exp(rng.Uniform(std::log(cfg.ratio_lo), std::log(cfg.ratio_hi)));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && h > 0 && w <= W && h <= H) {
      cx = static_cast<int>(rng.Below(std::uint64_t(W - w) + 1));
      cy = static_cast<int>(rng.Below(std::uint64_t(H - h) + 1));
      cw = w;
      ch = h;
      found = true;
    }
  }
  // Fallback is the full frame, which is the centered crop at scale 1.
  std::vector<float> out = ResizeCrop(image, cx, cy, cw, ch, out_h, out_w);

  if (rng.Bernoulli(cfg.flip_prob)) {
    for (int y = 0; y < out_h; ++y) {
      std::reverse(out.begin() + std::size_t(y) * out_w, out.begin() + std::size_t(y + 1) * out_w);
    }
  }
  if (rng.Bernoulli(cfg.jitter_prob)) {
    const double s = cfg.jitter_strength;
    const double brightness = rng.Uniform(1.0 - s, 1.0 + s);
    const double contrast = rng.Uniform(1.0 - s, 1.0 + s);
    double mean = 0.0;
    for (float& v : out) {
      v = static_cast<float>(std::clamp(v * brightness, 0.0, 1.0));
      mean += v;
    }
    mean /= static_cast<double>(out.size());
    for (float& v : out) {
      v = static_cast<float>(std::clamp((v - mean) * contrast + mean, 0.0, 1.0));
    }
  }
  const double inv_std = 1.0 / cfg.std;
  for (float& v : out) v = static_cast<float>((v - cfg.mean) * inv_std);
  return out;
}

std::vector<float> EvalTransform(const Image& image, double mean, double std, int out_h,
                                 int out_w) {
  std::vector<float> out = ResizeCrop(image, 0, 0, image.width, image.height, out_h, out_w);
  const double inv_std = 1.0 / std;
  for (float& v : out) v = static_cast<float>((v - mean) * inv_std);
  return out;
}

Batch MakeBatch(const ViewStore& store, std::span<const std::size_t> samples, int epoch,
                const AugmentConfig& cfg, std::uint64_t seed, int out_h, int out_w) {
  Batch batch;
  batch.size = samples.size();
  batch.height = out_h;
  batch.width = out_w;
  const std::size_t plane = std::size_t(out_h) * out_w;
  batch.view_a.resize(batch.size * plane);
  batch.view_b.resize(batch.size * plane);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const std::size_t s = samples[r];
    if (s >= store.size()) {
      Fail(ErrorCode::kIndexOutOfRange, "sample " + std::to_string(s) + " of " +
                                            std::to_string(store.size()));
    }
    for (int slot = 0; slot < 2; ++slot) {
      Rng rng = AugmentStream(seed, s, static_cast<std::uint64_t>(epoch), slot);
      const auto view = Augment(store.images[s], cfg, rng, out_h, out_w);
      auto& dst = slot == 0 ? batch.view_a : batch.view_b;
      std::copy(view.begin(), view.end(), dst.begin() + r * plane);
    }
    batch.labels.push_back(store.labels[s]);
    batch.samples.push_back(s);
  }
  return batch;
}

}  // namespace mvcl
