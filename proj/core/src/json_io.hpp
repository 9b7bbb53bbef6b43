#pragma once

#include <json.hpp>

#include "mvcl/error.hpp"
#include "mvcl/model.hpp"

namespace mvcl::detail {

using Json = nlohmann::ordered_json;

Json ToJson(const EncoderConfig& cfg);
Json ToJson(const ProjectionConfig& cfg);
/// Missing keys keep the defaults; unknown keys raise InvalidConfig.
void FromJson(const Json& j, EncoderConfig& cfg);
void FromJson(const Json& j, ProjectionConfig& cfg);

/// Raises InvalidConfig naming the first key of `j` outside `allowed`.
void RequireKnownKeys(const Json& j, std::initializer_list<const char*> allowed,
                      const std::string& where);

Json ReadJsonFile(const std::string& path, ErrorCode missing);
void WriteTextFile(const std::string& path, const std::string& text);

/// Raw little-endian float32 payloads.
void WriteF32(const std::string& path, std::span<const float> values);
std::vector<float> ReadF32(const std::string& path, ErrorCode missing, ErrorCode mismatch);

}  // namespace mvcl::detail
