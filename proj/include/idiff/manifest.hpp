#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "idiff/codec.hpp"
#include "idiff/image.hpp"

namespace idiff {

/// The manifest file itself is missing or unreadable.
class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RecordError {
  std::size_t line = 0;  // 1-based line number in the manifest
  std::string id;        // empty when the record could not be parsed far enough
  std::string message;
};

struct ManifestLoad {
  std::vector<PairSample> samples;
  std::vector<RecordError> errors;

  bool ok() const noexcept { return errors.empty(); }
};

/// Parses one manifest record and decodes its images. Throws std::runtime_error on any defect.
inline PairSample parse_manifest_record(const nlohmann::json& rec, const std::filesystem::path& base_dir) {
  if (!rec.is_object()) throw std::runtime_error("record is not an object");
  auto required_string = [&](const char* key) -> std::string {
    auto it = rec.find(key);
    if (it == rec.end() || !it->is_string()) throw std::runtime_error(std::string("missing or non-string field '") + key + "'");
    return it->get<std::string>();
  };
  PairSample s;
  s.id = required_string("id");
  const auto domain = parse_domain(required_string("domain"));
  if (!domain) throw std::runtime_error("domain must be \"person\" or \"scene\"");
  s.domain = *domain;
  if (auto it = rec.find("label"); it != rec.end() && !it->is_null()) {
    const auto label = it->is_string() ? parse_preference(it->get<std::string>()) : std::nullopt;
    if (!label) throw std::runtime_error("label must be \"A\" or \"B\"");
    s.label = *label;
  }
  if (auto it = rec.find("rationale"); it != rec.end() && !it->is_null()) {
    if (!it->is_string()) throw std::runtime_error("rationale must be a string");
    s.reference_rationale = it->get<std::string>();
  }
  auto load_pair = [&](const char* key) {
    const auto path = base_dir / required_string(key);
    if (!std::filesystem::exists(path)) throw std::runtime_error(std::string(key) + " image not found: " + path.string());
    auto img = load_image(path);
    if (img.width() % 2 != 0) {
      throw std::runtime_error(std::string(key) + " has odd width " + std::to_string(img.width()));
    }
    return img;
  };
  s.global_pair = load_pair("global_pair");
  s.crop_pair = load_pair("crop_pair");
  return s;
}

/// Loads a line-delimited manifest. Bad records are reported in `errors`, good ones kept in file order.
inline ManifestLoad load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest: " + path.string());
  const auto base_dir = path.parent_path();
  ManifestLoad out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string id;
    try {
      const auto rec = nlohmann::json::parse(line);
      if (rec.is_object() && rec.contains("id") && rec["id"].is_string()) id = rec["id"].get<std::string>();
      out.samples.push_back(parse_manifest_record(rec, base_dir));
    } catch (const std::exception& e) {
      out.errors.push_back({lineno, id, e.what()});
    }
  }
  return out;
}

/// Serializes one manifest line. Image paths are written as given.
inline nlohmann::json manifest_record(const PairSample& s, const std::string& global_path, const std::string& crop_path) {
  nlohmann::json rec = {{"id", s.id}, {"domain", to_string(s.domain)}, {"global_pair", global_path}, {"crop_pair", crop_path}};
  if (s.label) rec["label"] = to_string(*s.label);
  if (s.reference_rationale) rec["rationale"] = *s.reference_rationale;
  return rec;
}

}  // namespace idiff
