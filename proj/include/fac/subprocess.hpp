// Copyright 2026 The FAC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FAC_SUBPROCESS_HPP_
#define FAC_SUBPROCESS_HPP_

#include <filesystem>
#include <map>
#include <string>

namespace fac {

// Replaces {key} placeholders with shell-quoted values.
std::string expand_command(const std::string& templ, const std::map<std::string, std::string>& vars);

struct CommandResult {
  int exit_code = 0;
  std::string output;  // captured stdout
};

// Runs through /bin/sh. Never throws on a non-zero exit; callers decide.
CommandResult run_command(const std::string& command);

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fac

#endif  // FAC_SUBPROCESS_HPP_
