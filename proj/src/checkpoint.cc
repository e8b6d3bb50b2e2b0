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

#include "zomem/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "zomem/error.h"

namespace zomem {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string_view bytes(std::size_t n) {
    need(n);
    const std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorCode::kIo, "checkpoint truncated at byte " +
                                      std::to_string(pos_));
    }
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= std::uint64_t{static_cast<unsigned char>(in_[pos_ + i])} << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const ModelConfig& cfg,
                                 const ParameterVector& weights) {
  Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.i64(cfg.context_length);
  w.i64(cfg.num_layers);
  w.i64(cfg.hidden_dim);
  w.i64(cfg.num_heads);
  w.i64(cfg.kv_heads);
  w.i64(cfg.num_mlps);
  w.f64(cfg.expansion_factor);
  w.i64(cfg.vocab_size);
  w.i64(cfg.batch_size);
  w.f64(cfg.bytes_per_param);
  w.f64(cfg.stored_layers);
  w.u64(weights.segments().size());
  for (const Segment& s : weights.segments()) {
    w.u32(static_cast<std::uint32_t>(s.name.size()));
    w.bytes(s.name);
    w.u64(s.length);
    for (const double v : weights.values().subspan(s.offset, s.length)) {
      w.f64(v);
    }
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error(ErrorCode::kIo, "bad checkpoint magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kIo,
                "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ModelConfig& c = ck.config;
  c.context_length = r.i64();
  c.num_layers = r.i64();
  c.hidden_dim = r.i64();
  c.num_heads = r.i64();
  c.kv_heads = r.i64();
  c.num_mlps = r.i64();
  c.expansion_factor = r.f64();
  c.vocab_size = r.i64();
  c.batch_size = r.i64();
  c.bytes_per_param = r.f64();
  c.stored_layers = r.f64();
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name(r.bytes(name_len));
    const std::uint64_t length = r.u64();
    if (length > bytes.size() / 8) {
      throw Error(ErrorCode::kIo, "segment '" + name + "' length is corrupt");
    }
    const std::size_t offset = ck.weights.add_segment(name, length);
    auto values = ck.weights.values();
    for (std::uint64_t j = 0; j < length; ++j) {
      values[offset + j] = r.f64();
    }
  }
  if (!r.done()) {
    throw Error(ErrorCode::kIo, "trailing bytes after last segment");
  }
  return ck;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParameterVector& weights) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = serialize_checkpoint(cfg, weights);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write checkpoint '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace zomem
