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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zomem {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

// Flat trainable-parameter storage with a named-segment layout. Segments are
// appended in order and always tile [0, size()) without gaps.
class ParameterVector {
 public:
  ParameterVector() = default;

  // Appends a zero-initialized segment and returns its offset. Throws on a
  // duplicate name.
  std::size_t add_segment(std::string name, std::size_t length);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<Segment>& segments() const { return segments_; }

  bool has_segment(std::string_view name) const;
  const Segment& segment_info(std::string_view name) const;
  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::string_view name) const;

  bool all_finite() const;

  // Same layout, all values zero.
  ParameterVector zeros_like() const;

  friend bool operator==(const ParameterVector&,
                         const ParameterVector&) = default;

 private:
  std::vector<double> values_;
  std::vector<Segment> segments_;
};

}  // namespace zomem
