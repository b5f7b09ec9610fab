// Copyright 2026 The Gradeline Authors.
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

#ifndef GRADELINE_ERRORS_HPP_
#define GRADELINE_ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <vector>

namespace gradeline {

// Base of every domain-level failure. `kind()` is a stable machine name used
// by the API layer to pick a status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "internal"; }
};

class UnknownId : public Error {
 public:
  UnknownId(const std::string& collection, const std::string& id)
      : Error("unknown " + collection + " id '" + id + "'"), collection_(collection), id_(id) {}
  const char* kind() const noexcept override { return "unknown_id"; }
  const std::string& collection() const { return collection_; }
  const std::string& id() const { return id_; }

 private:
  std::string collection_;
  std::string id_;
};

struct Violation {
  std::string field;
  std::string rule;
  bool operator==(const Violation&) const = default;
};

class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(std::vector<Violation> violations, std::string record = {});
  const char* kind() const noexcept override { return "validation_failed"; }
  const std::vector<Violation>& violations() const { return violations_; }
  const std::string& record() const { return record_; }

 private:
  std::vector<Violation> violations_;
  std::string record_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("duplicate id '" + id + "'"), id_(id) {}
  const char* kind() const noexcept override { return "duplicate_id"; }
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class Conflict : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "conflict"; }
};

class StorageUnavailable : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "storage_unavailable"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io_error"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config_error"; }
};

class RunNotCompleted : public Error {
 public:
  explicit RunNotCompleted(const std::string& run_id)
      : Error("run '" + run_id + "' is not completed") {}
  const char* kind() const noexcept override { return "run_not_completed"; }
};

class NoSharedTests : public Error {
 public:
  NoSharedTests(const std::string& a, const std::string& b)
      : Error("runs '" + a + "' and '" + b + "' share no scored tests") {}
  const char* kind() const noexcept override { return "no_shared_tests"; }
};

}  // namespace gradeline

#endif  // GRADELINE_ERRORS_HPP_
