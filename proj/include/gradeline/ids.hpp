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

#ifndef GRADELINE_IDS_HPP_
#define GRADELINE_IDS_HPP_

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace gradeline {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

Timestamp now();

// ISO-8601 UTC with millisecond precision, e.g. "2026-01-02T03:04:05.006Z".
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);

// 26-character Crockford base32 ULID. Lexicographic order follows creation
// order within one process, including ids minted in the same millisecond.
std::string new_ulid();
std::string new_ulid(Timestamp t);

// Opaque identifier with a phantom tag so issue ids and test ids do not mix.
template <class Tag>
struct Id {
  std::string value;

  Id() = default;
  explicit Id(std::string v) : value(std::move(v)) {}

  bool empty() const { return value.empty(); }
  const std::string& str() const { return value; }

  auto operator<=>(const Id&) const = default;
  bool operator==(const Id&) const = default;
};

using IssueId = Id<struct IssueIdTag>;
using FeedbackId = Id<struct FeedbackIdTag>;
using TestId = Id<struct TestIdTag>;
using RunId = Id<struct RunIdTag>;
using ResultId = Id<struct ResultIdTag>;

}  // namespace gradeline

#endif  // GRADELINE_IDS_HPP_
