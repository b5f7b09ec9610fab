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

#include "gradeline/ids.hpp"

#include <array>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <random>

namespace gradeline {

Timestamp now() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

std::string format_timestamp(Timestamp t) {
  const auto ms = t.time_since_epoch().count();
  std::int64_t secs = ms / 1000;
  std::int64_t rem = ms % 1000;
  if (rem < 0) {
    rem += 1000;
    --secs;
  }
  const std::time_t tt = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(rem));
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  std::string s(text);
  int y, mo, d, h, mi, sec, n = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &n) != 6) {
    return std::nullopt;
  }
  std::size_t pos = static_cast<std::size_t>(n);
  int millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int i = digits; i < 3; ++i) millis *= 10;
  }
  if (pos != s.size() - 1 || s[pos] != 'Z') return std::nullopt;
  std::tm tm{};
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = sec;
  const std::time_t secs = timegm(&tm);
  return Timestamp{std::chrono::milliseconds{static_cast<std::int64_t>(secs) * 1000 + millis}};
}

namespace {

constexpr char kCrockford[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";

struct UlidState {
  std::mutex mu;
  std::mt19937_64 rng{std::random_device{}()};
  std::int64_t last_ms = -1;
  std::array<std::uint8_t, 10> last_rand{};
};

UlidState& ulid_state() {
  static UlidState s;
  return s;
}

}  // namespace

std::string new_ulid() { return new_ulid(now()); }

std::string new_ulid(Timestamp t) {
  auto& st = ulid_state();
  std::array<std::uint8_t, 16> bytes{};
  {
    std::lock_guard lock(st.mu);
    std::int64_t ms = t.time_since_epoch().count();
    if (ms <= st.last_ms) {
      // Same (or earlier) millisecond: increment the random part so ids stay sorted.
      ms = st.last_ms;
      for (int i = 9; i >= 0; --i) {
        if (++st.last_rand[i] != 0) break;
      }
    } else {
      st.last_ms = ms;
      for (auto& b : st.last_rand) b = static_cast<std::uint8_t>(st.rng());
      st.last_rand[0] &= 0x7f;  // headroom for increments
    }
    for (int i = 0; i < 6; ++i) bytes[i] = static_cast<std::uint8_t>(ms >> (8 * (5 - i)));
    for (int i = 0; i < 10; ++i) bytes[6 + i] = st.last_rand[i];
  }
  // 128 bits -> 26 base32 chars, most significant first (first char carries 3 bits).
  std::string out(26, '0');
  unsigned __int128 v = 0;
  for (auto b : bytes) v = (v << 8) | b;
  for (int i = 25; i >= 0; --i) {
    out[i] = kCrockford[static_cast<int>(v & 31)];
    v >>= 5;
  }
  return out;
}

}  // namespace gradeline
