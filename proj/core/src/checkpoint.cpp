#include <filesystem>

#include "json_io.hpp"
#include "mvcl/error.hpp"
#include "mvcl/model.hpp"

namespace mvcl {

namespace fs = std::filesystem;
using detail::Json;

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorCode::kIoFailure, "cannot create " + dir + ": " + ec.message());

  Json tensors = Json::array();
  for (const auto& e : ckpt.params.entries()) {
    tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"decay", e.decay}});
  }
  Json meta{{"format", "mvcl-checkpoint-1"},
            {"encoder", detail::ToJson(ckpt.encoder)},
            {"projection", detail::ToJson(ckpt.projection)},
            {"has_projection", ckpt.has_projection},
            {"loss", ckpt.meta.loss},
            {"epoch", ckpt.meta.epoch},
            {"seed", ckpt.meta.seed},
            {"num_classes", ckpt.meta.num_classes},
            {"class_names", ckpt.meta.class_names},
            {"data_mean", ckpt.meta.data_mean},
            {"data_std", ckpt.meta.data_std},
            {"tensors", tensors}};
  const std::vector<float> flat = ckpt.params.Flatten();
  detail::WriteF32((fs::path(dir) / "params.f32").string(), flat);
  detail::WriteTextFile((fs::path(dir) / "params.meta.json").string(), meta.dump(2) + "\n");
}

Checkpoint LoadCheckpoint(const std::string& dir) {
  const std::string meta_path = (fs::path(dir) / "params.meta.json").string();
  const std::string payload_path = (fs::path(dir) / "params.f32").string();
  const Json meta = detail::ReadJsonFile(meta_path, ErrorCode::kMissingFile);
  const std::vector<float> flat =
      detail::ReadF32(payload_path, ErrorCode::kMissingFile, ErrorCode::kShapeManifestMismatch);

  Checkpoint ckpt;
  try {
    detail::FromJson(meta.at("encoder"), ckpt.encoder);
    detail::FromJson(meta.at("projection"), ckpt.projection);
    ckpt.has_projection = meta.at("has_projection").get<bool>();
    ckpt.meta.loss = meta.at("loss").get<std::string>();
    ckpt.meta.epoch = meta.at("epoch").get<int>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.meta.num_classes = meta.at("num_classes").get<int>();
    ckpt.meta.class_names = meta.at("class_names").get<std::vector<std::string>>();
    ckpt.meta.data_mean = meta.at("data_mean").get<double>();
    ckpt.meta.data_std = meta.at("data_std").get<double>();

    std::size_t offset = 0;
    for (const auto& t : meta.at("tensors")) {
      const auto shape = t.at("shape").get<ad::Shape>();
      const std::size_t n = ad::NumElements(shape);
      if (offset + n > flat.size()) {
        Fail(ErrorCode::kShapeManifestMismatch,
             "payload ends inside tensor " + t.at("name").get<std::string>());
      }
      ckpt.params.Add(t.at("name").get<std::string>(), shape,
                      std::vector<float>(flat.begin() + offset, flat.begin() + offset + n),
                      t.at("decay").get<bool>());
      offset += n;
    }
    if (offset != flat.size()) {
      Fail(ErrorCode::kShapeManifestMismatch, "payload holds " + std::to_string(flat.size()) +
                                                  " values, manifest declares " +
                                                  std::to_string(offset));
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kShapeManifestMismatch, meta_path + ": " + e.what());
  }
  return ckpt;
}

}  // namespace mvcl
