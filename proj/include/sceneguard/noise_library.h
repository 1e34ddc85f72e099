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

#ifndef SCENEGUARD_NOISE_LIBRARY_H_
#define SCENEGUARD_NOISE_LIBRARY_H_

#include <map>
#include <string>
#include <vector>

#include "sceneguard/audio.h"
#include "sceneguard/rng.h"

namespace sceneguard {

struct NoiseClip {
  Waveform audio;
  std::string scene;
  std::string source_id;
};

// Scene-indexed noise collection. Immutable after load; callers supply one
// Rng per worker for concurrent sampling.
struct NoiseLibrary {
  std::map<std::string, std::vector<NoiseClip>> clips;

  std::vector<std::string> Scenes() const {
    std::vector<std::string> out;
    out.reserve(clips.size());
    for (const auto& [scene, _] : clips) out.push_back(scene);
    return out;
  }
  size_t TotalClips() const {
    size_t n = 0;
    for (const auto& [_, v] : clips) n += v.size();
    return n;
  }
};

// Loads a manifest: CSV with header `path,scene`, or a JSON array of
// {"path": ..., "scene": ...}. Paths are resolved relative to the manifest
// location. Clips are resampled to the canonical rate; clips with RMS below
// 1e-4 are skipped with a warning. When `allowed_scenes` is non-empty, any
// other scene label raises ConfigError. Missing audio files raise
// IngestionError naming the path.
NoiseLibrary LoadNoiseLibrary(
    const std::string& manifest_path,
    const std::vector<std::string>& allowed_scenes = {});

// Uniform draw over the scene's clips. Throws LookupError listing the
// available scenes when the requested one is absent.
const NoiseClip& SampleNoise(const NoiseLibrary& lib, const std::string& scene,
                             Rng* rng);

// Length-matches a clip to target_len samples: a uniformly random contiguous
// window when the clip is longer, end-to-end tiling then truncation when
// shorter.
Waveform MatchLength(const NoiseClip& clip, size_t target_len, Rng* rng);

}  // namespace sceneguard

#endif  // SCENEGUARD_NOISE_LIBRARY_H_
