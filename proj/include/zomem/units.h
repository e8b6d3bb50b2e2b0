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

#pragma once

#include <string>
#include <string_view>

namespace zomem {

inline constexpr double kBytesPerGB = 1e9;
inline constexpr double kBytesPerGiB = 1073741824.0;  // 2^30

// "57.4 GB (53.5 GiB)": three significant figures in both unit systems.
std::string format_bytes(double bytes);

// Parses a byte count with an optional GB (10^9) or GiB (2^30) suffix, e.g.
// "80GB", "17 GiB", "1.5e9". Throws Error{kInvalidArgument}.
double parse_byte_count(std::string_view text);

}  // namespace zomem
