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

#include "zomem/parameter_vector.h"

#include <algorithm>
#include <cmath>

#include "zomem/error.h"

namespace zomem {

std::size_t ParameterVector::add_segment(std::string name, std::size_t length) {
  if (has_segment(name)) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate segment '" + name + "'");
  }
  const std::size_t offset = values_.size();
  values_.resize(offset + length, 0.0);
  segments_.push_back(Segment{std::move(name), offset, length});
  return offset;
}

bool ParameterVector::has_segment(std::string_view name) const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [&](const Segment& s) { return s.name == name; });
}

const Segment& ParameterVector::segment_info(std::string_view name) const {
  for (const Segment& s : segments_) {
    if (s.name == name) {
      return s;
    }
  }
  throw Error(ErrorCode::kInvalidArgument,
              "no segment named '" + std::string(name) + "'");
}

std::span<double> ParameterVector::segment(std::string_view name) {
  const Segment& s = segment_info(name);
  return std::span<double>(values_).subspan(s.offset, s.length);
}

std::span<const double> ParameterVector::segment(std::string_view name) const {
  const Segment& s = segment_info(name);
  return std::span<const double>(values_).subspan(s.offset, s.length);
}

bool ParameterVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

ParameterVector ParameterVector::zeros_like() const {
  ParameterVector out;
  out.values_.assign(values_.size(), 0.0);
  out.segments_ = segments_;
  return out;
}

}  // namespace zomem
