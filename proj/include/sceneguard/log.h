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

#ifndef SCENEGUARD_LOG_H_
#define SCENEGUARD_LOG_H_

#include <functional>
#include <string>

namespace sceneguard {

using WarningHandler = std::function<void(const std::string&)>;

// Installs a process-wide warning sink. Passing nullptr restores the default
// (stderr). Thread-safe.
void SetWarningHandler(WarningHandler handler);

void Warn(const std::string& msg);

}  // namespace sceneguard

#endif  // SCENEGUARD_LOG_H_
