// Copyright 2026 The Conv-INR Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INR_CLI_HPP
#define INR_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "inr/model.hpp"
#include "inr/training.hpp"

namespace inr::cli {

enum ExitCode : int {
  kOk = 0,
  kInvalidConfig = 2,
  kNonFiniteLoss = 3,
  kCertificationFailure = 4,
};

/// Effective flat key=value configuration of a fit run.
/// Precedence: command-line flags > config file > profile defaults.
class RunConfig {
 public:
  static const std::vector<std::string>& keys();
  /// "desk" (128x128 crop, depth 6, width 32, 2000 iterations) or "paper".
  static RunConfig profile(const std::string& name);
  /// Flat key=value text; '#' starts a comment. Unknown keys are errors.
  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void merge(const RunConfig& other);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  ModelSpec model_spec() const;
  TrainConfig train_config() const;
  std::size_t crop() const;
  double hf_cutoff() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace inr::cli

#endif  // INR_CLI_HPP
