// Copyright (c) 2026 SceneGuard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sceneguard/noise_library.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sceneguard/error.h"
#include "sceneguard/log.h"

namespace sceneguard {

namespace {

constexpr double kSilenceRmsGate = 1e-4;

struct ManifestEntry {
  std::string path;
  std::string scene;
};

std::string Trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<ManifestEntry> ParseCsvManifest(std::istream& in,
                                            const std::string& path) {
  std::vector<ManifestEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = Trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(Trim(col));
    if (first) {
      first = false;
      if (cols.size() >= 2 && cols[0] == "path" && cols[1] == "scene")
        continue;  // header row
    }
    if (cols.size() < 2)
      throw FormatError("noise manifest row needs `path,scene`: " + path);
    entries.push_back({cols[0], cols[1]});
  }
  return entries;
}

std::vector<ManifestEntry> ParseJsonManifest(const std::string& text,
                                             const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("noise manifest JSON parse error in " + path + ": " +
                      e.what());
  }
  if (!doc.is_array())
    throw FormatError("noise manifest JSON must be an array: " + path);
  std::vector<ManifestEntry> entries;
  for (const auto& item : doc) {
    if (!item.contains("path") || !item.contains("scene"))
      throw FormatError("noise manifest entries need path and scene: " + path);
    entries.push_back({item["path"].get<std::string>(),
                       item["scene"].get<std::string>()});
  }
  return entries;
}

}  // namespace

NoiseLibrary LoadNoiseLibrary(const std::string& manifest_path,
                              const std::vector<std::string>& allowed_scenes) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open noise manifest: " + manifest_path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  std::vector<ManifestEntry> entries;
  const std::string trimmed = Trim(text);
  if (!trimmed.empty() && trimmed.front() == '[') {
    entries = ParseJsonManifest(text, manifest_path);
  } else {
    std::stringstream ss(text);
    entries = ParseCsvManifest(ss, manifest_path);
  }

  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();

  NoiseLibrary lib;
  for (const auto& entry : entries) {
    if (entry.scene.empty())
      throw ConfigError("noise manifest: empty scene label in " +
                        manifest_path);
    if (!allowed_scenes.empty() &&
        std::find(allowed_scenes.begin(), allowed_scenes.end(),
                  entry.scene) == allowed_scenes.end())
      throw ConfigError("noise manifest: unknown scene label '" + entry.scene +
                        "' (not in the configured label set)");

    std::filesystem::path clip_path(entry.path);
    if (clip_path.is_relative()) clip_path = base / clip_path;
    if (!std::filesystem::exists(clip_path))
      throw IngestionError("noise manifest references missing file: " +
                           clip_path.string());

    NoiseClip clip;
    clip.audio = Resample(ReadWav(clip_path.string()), kCanonicalSampleRate);
    clip.scene = entry.scene;
    clip.source_id = entry.path;
    if (clip.audio.samples.empty() ||
        Rms(clip.audio.samples) < kSilenceRmsGate) {
      Warn("noise clip skipped (silent): " + clip_path.string());
      continue;
    }
    lib.clips[entry.scene].push_back(std::move(clip));
  }

  // Drop scenes whose every clip was silent.
  for (auto it = lib.clips.begin(); it != lib.clips.end();) {
    it = it->second.empty() ? lib.clips.erase(it) : std::next(it);
  }
  return lib;
}

const NoiseClip& SampleNoise(const NoiseLibrary& lib, const std::string& scene,
                             Rng* rng) {
  auto it = lib.clips.find(scene);
  if (it == lib.clips.end() || it->second.empty()) {
    std::string avail;
    for (const auto& s : lib.Scenes()) {
      if (!avail.empty()) avail += ", ";
      avail += s;
    }
    throw LookupError("no noise for scene '" + scene +
                      "'; available scenes: [" + avail + "]");
  }
  return it->second[rng->UniformIndex(it->second.size())];
}

Waveform MatchLength(const NoiseClip& clip, size_t target_len, Rng* rng) {
  const auto& src = clip.audio.samples;
  if (src.empty()) throw ContractError("MatchLength: empty clip");
  if (target_len == 0) throw ContractError("MatchLength: target_len == 0");

  Waveform out;
  out.sample_rate_hz = clip.audio.sample_rate_hz;
  out.samples.resize(target_len);
  if (src.size() >= target_len) {
    const size_t offset = rng->UniformIndex(src.size() - target_len + 1);
    std::copy(src.begin() + offset, src.begin() + offset + target_len,
              out.samples.begin());
  } else {
    for (size_t t = 0; t < target_len; ++t)
      out.samples[t] = src[t % src.size()];
  }
  return out;
}

}  // namespace sceneguard
