#include "json_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mvcl/error.hpp"

namespace mvcl::detail {

void RequireKnownKeys(const Json& j, std::initializer_list<const char*> allowed,
                      const std::string& where) {
  if (!j.is_object()) Fail(ErrorCode::kInvalidConfig, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) Fail(ErrorCode::kInvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

namespace {

template <typename V>
void Read(const Json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    Fail(ErrorCode::kInvalidConfig, std::string("bad type for '") + key + "' in " + where);
  }
}

}  // namespace

Json ToJson(const EncoderConfig& cfg) {
  return Json{{"kind", std::string(EncoderName(cfg.kind))},
              {"channels", cfg.channels},
              {"height", cfg.height},
              {"width", cfg.width},
              {"feature_dim", cfg.feature_dim},
              {"patch_size", cfg.patch_size},
              {"depth", cfg.depth},
              {"heads", cfg.heads},
              {"token_dim", cfg.token_dim},
              {"mlp_ratio", cfg.mlp_ratio},
              {"hidden", cfg.hidden}};
}

Json ToJson(const ProjectionConfig& cfg) {
  return Json{{"hidden", cfg.hidden}, {"output_dim", cfg.output_dim}};
}

void FromJson(const Json& j, EncoderConfig& cfg) {
  const std::string where = "encoder";
  RequireKnownKeys(j, {"kind", "channels", "height", "width", "feature_dim", "patch_size", "depth",
                       "heads", "token_dim", "mlp_ratio", "hidden"},
                   where);
  std::string kind(EncoderName(cfg.kind));
  Read(j, "kind", kind, where);
  cfg.kind = ParseEncoderKind(kind);
  Read(j, "channels", cfg.channels, where);
  Read(j, "height", cfg.height, where);
  Read(j, "width", cfg.width, where);
  Read(j, "feature_dim", cfg.feature_dim, where);
  Read(j, "patch_size", cfg.patch_size, where);
  Read(j, "depth", cfg.depth, where);
  Read(j, "heads", cfg.heads, where);
  Read(j, "token_dim", cfg.token_dim, where);
  Read(j, "mlp_ratio", cfg.mlp_ratio, where);
  Read(j, "hidden", cfg.hidden, where);
}

void FromJson(const Json& j, ProjectionConfig& cfg) {
  RequireKnownKeys(j, {"hidden", "output_dim"}, "projection");
  Read(j, "hidden", cfg.hidden, "projection");
  Read(j, "output_dim", cfg.output_dim, "projection");
}

Json ReadJsonFile(const std::string& path, ErrorCode missing) {
  std::ifstream in(path);
  if (!in) Fail(missing, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIoFailure, "cannot write " + path);
  out << text;
  if (!out) Fail(ErrorCode::kIoFailure, "write failed for " + path);
}

static_assert(std::endian::native == std::endian::little, "payload IO assumes a little-endian host");

void WriteF32(const std::string& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIoFailure, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) Fail(ErrorCode::kIoFailure, "write failed for " + path);
}

std::vector<float> ReadF32(const std::string& path, ErrorCode missing, ErrorCode mismatch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(missing, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() % sizeof(float) != 0) {
    Fail(mismatch, path + " is not a whole number of float32 values");
  }
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace mvcl::detail
