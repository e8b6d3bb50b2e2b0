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

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <limits>

#include "zomem/error.h"
#include "zomem/transformer.h"

namespace zomem {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.hidden_dim = 8;
  c.num_layers = 2;
  c.num_heads = c.kv_heads = 2;
  c.vocab_size = 11;
  c.context_length = 5;
  c.stored_layers = 0.5;
  c.bytes_per_param = 1.5;
  return c;
}

TEST(CheckpointTest, BitExactRoundTrip) {
  const ModelConfig c = small_config();
  ParameterVector w = make_transformer_parameters(c);
  init_transformer_weights(w, c, 9);
  w.values()[0] = -0.0;
  w.values()[1] = std::numeric_limits<double>::denorm_min();
  const std::string bytes = serialize_checkpoint(c, w);
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.config, c);
  EXPECT_EQ(back.weights.segments(), w.segments());
  ASSERT_EQ(back.weights.size(), w.size());
  EXPECT_EQ(std::memcmp(back.weights.values().data(), w.values().data(),
                        w.size() * sizeof(double)),
            0);
  EXPECT_EQ(serialize_checkpoint(back.config, back.weights), bytes);
}

TEST(CheckpointTest, HeaderIsLittleEndian) {
  const ModelConfig c = small_config();
  const std::string bytes =
      serialize_checkpoint(c, make_transformer_parameters(c));
  EXPECT_EQ(bytes.substr(0, 8), "ZOMEMCKP");
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x01\x00\x00\x00", 4));
  // First config field: context_length = 5 as i64.
  EXPECT_EQ(bytes.substr(12, 8), std::string("\x05\0\0\0\0\0\0\0", 8));
}

TEST(CheckpointTest, RejectsMalformedBuffers) {
  const ModelConfig c = small_config();
  const std::string good =
      serialize_checkpoint(c, make_transformer_parameters(c));
  auto expect_io = [](std::string_view b) {
    try {
      deserialize_checkpoint(b);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kIo);
    }
  };
  expect_io(good.substr(0, good.size() - 1));
  expect_io(good + "x");
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  expect_io(bad_magic);
  std::string bad_version = good;
  bad_version[8] = 2;
  expect_io(bad_version);
  expect_io("");
}

TEST(CheckpointTest, FileRoundTrip) {
  const ModelConfig c = small_config();
  ParameterVector w = make_transformer_parameters(c);
  init_transformer_weights(w, c, 1);
  const auto path =
      std::filesystem::temp_directory_path() / "zomem_checkpoint_test.bin";
  save_checkpoint(path.string(), c, w);
  const Checkpoint back = load_checkpoint(path.string());
  EXPECT_EQ(back.weights, w);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), Error);
}

}  // namespace
}  // namespace zomem
