// Copyright 2026 The zomem Authors.
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

#include "zomem/units.h"

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "zomem/error.h"

namespace zomem {

std::string format_bytes(double bytes) {
  return fmt::format("{:.3g} GB ({:.3g} GiB)", bytes / kBytesPerGB,
                     bytes / kBytesPerGiB);
}

double parse_byte_count(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
      s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
      s.remove_suffix(1);
    }
    return s;
  };
  std::string_view body = trim(text);
  double multiplier = 1.0;
  auto ends_with = [&](std::string_view suffix) {
    return body.size() >= suffix.size() &&
           body.substr(body.size() - suffix.size()) == suffix;
  };
  if (ends_with("GiB")) {
    multiplier = kBytesPerGiB;
    body.remove_suffix(3);
  } else if (ends_with("GB")) {
    multiplier = kBytesPerGB;
    body.remove_suffix(2);
  } else if (ends_with("B")) {
    body.remove_suffix(1);
  }
  body = trim(body);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc() || ptr != body.data() + body.size() ||
      !std::isfinite(value) || value < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot parse byte count '" + std::string(text) + "'");
  }
  return value * multiplier;
}

}  // namespace zomem
