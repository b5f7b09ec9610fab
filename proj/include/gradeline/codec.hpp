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

#ifndef GRADELINE_CODEC_HPP_
#define GRADELINE_CODEC_HPP_

// JSON encoding of the domain types. nlohmann::json keeps object keys sorted,
// so dump() output is stable for a given value.

#include <string>

#include "gradeline/domain.hpp"
#include "json.hpp"

namespace gradeline {

using json = nlohmann::json;

template <class Tag>
void to_json(json& j, const Id<Tag>& id) { j = id.value; }
template <class Tag>
void from_json(const json& j, Id<Tag>& id) { id.value = j.get<std::string>(); }

void to_json(json& j, const Tag& v);
void from_json(const json& j, Tag& v);
void to_json(json& j, const StatusChange& v);
void from_json(const json& j, StatusChange& v);
void to_json(json& j, const Issue& v);
void from_json(const json& j, Issue& v);
void to_json(json& j, const Feedback& v);
void from_json(const json& j, Feedback& v);
void to_json(json& j, const Test& v);
void from_json(const json& j, Test& v);
void to_json(json& j, const GenerationParams& v);
void from_json(const json& j, GenerationParams& v);
void to_json(json& j, const ModelRef& v);
void from_json(const json& j, ModelRef& v);
void to_json(json& j, const TestSelection& v);
void from_json(const json& j, TestSelection& v);
void to_json(json& j, const RunProgress& v);
void from_json(const json& j, RunProgress& v);
void to_json(json& j, const IssueSnapshot& v);
void from_json(const json& j, IssueSnapshot& v);
void to_json(json& j, const TestRun& v);
void from_json(const json& j, TestRun& v);
void to_json(json& j, const JudgeVerdict& v);
void from_json(const json& j, JudgeVerdict& v);
void to_json(json& j, const HumanOverride& v);
void from_json(const json& j, HumanOverride& v);
void to_json(json& j, const TestResult& v);
void from_json(const json& j, TestResult& v);
void to_json(json& j, const InferenceRecord& v);
void from_json(const json& j, InferenceRecord& v);

json timestamp_json(Timestamp t);
Timestamp timestamp_from(const json& j);

// Decodes `j` as T, turning any shape error into ValidationFailed naming `what`.
template <class T>
T decode(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ValidationFailed({{what, e.what()}}, what);
  } catch (const ValidationFailed&) {
    throw;
  }
}

}  // namespace gradeline

#endif  // GRADELINE_CODEC_HPP_
