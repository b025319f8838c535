// Copyright 2026 The afde authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace afde {

// Error buckets. The CLI maps them to process exit codes: config/usage -> 1,
// bad or inconsistent data -> 2, numerical failure -> 3.
enum class ErrorKind { config = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

  static Error config(const std::string& what) { return {ErrorKind::config, what}; }
  static Error data(const std::string& what) { return {ErrorKind::data, what}; }
  static Error numeric(const std::string& what) { return {ErrorKind::numeric, what}; }

 private:
  ErrorKind kind_;
};

}  // namespace afde
