#pragma once

// Output plumbing: whole-file reads, atomic writes (temp file + rename), the
// content digest used for input identity, and the manifest record written
// beside every artifact. Manifests carry no timestamps, so reruns with the
// same inputs produce byte-identical files.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ripple/core.hpp"

namespace ripple {

inline constexpr const char* kToolVersion = "ripple 0.1.0";

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("missing-file", "cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string content_digest(const std::string& bytes) {
  return hex64(fnv1a64(bytes));
}

// Writes via a sibling temp file and renames into place, so readers never
// observe a half-written artifact.
inline void atomic_write(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
  }
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("write-failed", "cannot create: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail("write-failed", "short write: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) fail("write-failed", "cannot move into place: " + path + ": " + ec.message());
}

struct RunManifest {
  std::string command;                        // subcommand name
  nlohmann::json config;                      // effective configuration
  std::map<std::string, std::string> inputs;  // path -> content digest
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;           // paths written by the command
  std::string tool_version = kToolVersion;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  return nlohmann::json{{"command", m.command},
                        {"config", m.config},
                        {"inputs", m.inputs},
                        {"seed", m.seed},
                        {"outputs", m.outputs},
                        {"tool_version", m.tool_version}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.tool_version = j.at("tool_version").get<std::string>();
  return m;
}

// Writes `content` to `path` and the manifest to `<path>.manifest.json`,
// recording the artifact in the manifest's output list.
inline void write_artifact(const std::string& path, const std::string& content,
                           RunManifest m) {
  atomic_write(path, content);
  m.outputs.push_back(path);
  atomic_write(path + ".manifest.json", manifest_to_json(m).dump(2) + "\n");
}

}  // namespace ripple
