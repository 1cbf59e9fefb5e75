// Copyright 2026 The UnitQA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Model checkpoints: "UQCK" magic, format version, JSON header (model
// config, steps_trained, vocab rows), the vocabulary hash, then each named
// parameter tensor as float32 little-endian, closed by a CRC32 of
// everything after the magic. Loading verifies the checksum before parsing
// and rejects version or shape mismatches with explicit errors.

#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "unitqa/errors.hpp"
#include "unitqa/model.hpp"
#include "unitqa/serial.hpp"

namespace unitqa {

constexpr std::uint32_t kCheckpointVersion = 1;

template <typename S>
void save_checkpoint(Seq2SeqModel<S>& model, const std::string& path, std::uint64_t vocab_hash) {
  BinaryWriter payload;
  payload.u32(kCheckpointVersion);
  nlohmann::ordered_json header;
  header["model"] = model.config.to_json();
  header["steps_trained"] = model.steps_trained;
  header["vocab_rows"] = model.vocab_size();
  payload.str(header.dump());
  payload.u64(vocab_hash);

  auto params = model.parameters();
  payload.u32(static_cast<std::uint32_t>(params.size()));
  for (const Tensor<S>* t : params) {
    payload.str(t->name);
    payload.u32(static_cast<std::uint32_t>(t->w.rows()));
    payload.u32(static_cast<std::uint32_t>(t->w.cols()));
    for (Eigen::Index i = 0; i < t->w.rows(); ++i) {
      for (Eigen::Index j = 0; j < t->w.cols(); ++j) payload.f32(static_cast<float>(t->w(i, j)));
    }
  }

  BinaryWriter out;
  out.bytes("UQCK", 4);
  out.bytes(payload.data().data(), payload.data().size());
  out.u32(Crc32::of(payload.data().data(), payload.data().size()));
  out.write_file(path);
}

struct LoadedCheckpoint {
  Seq2SeqModel<float> model;
  std::uint64_t vocab_hash = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  BinaryReader in = BinaryReader::from_file(path);
  const std::string& buf = in.buffer();
  if (buf.size() < 8) throw ChecksumError("checkpoint truncated: " + path);
  char magic[4];
  in.raw(magic, 4);
  if (std::string_view(magic, 4) != "UQCK") throw ChecksumError("not a checkpoint file: " + path);
  const std::size_t payload_len = buf.size() - 8;  // minus magic and trailing CRC
  const std::uint32_t stored_crc =
      BinaryReader(buf.substr(buf.size() - 4)).u32();
  if (Crc32::of(buf.data() + 4, payload_len) != stored_crc) {
    throw ChecksumError("checkpoint CRC mismatch: " + path);
  }

  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw InvalidInputError("unsupported checkpoint version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const nlohmann::json header = nlohmann::json::parse(in.str());
  LoadedCheckpoint out;
  out.vocab_hash = in.u64();

  const ModelConfig cfg = ModelConfig::from_json(header.at("model"));
  const int vocab_rows = header.at("vocab_rows").get<int>();
  out.model = Seq2SeqModel<float>::create(cfg, vocab_rows, /*seed=*/0);
  out.model.steps_trained = header.at("steps_trained").get<long long>();

  const std::uint32_t n_tensors = in.u32();
  auto params = out.model.parameters();
  if (n_tensors != params.size()) {
    throw ChecksumError("checkpoint tensor count mismatch: " + std::to_string(n_tensors));
  }
  for (Tensor<float>* t : params) {
    const std::string name = in.str();
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    if (name != t->name || rows != static_cast<std::uint32_t>(t->w.rows()) ||
        cols != static_cast<std::uint32_t>(t->w.cols())) {
      throw ChecksumError("checkpoint tensor '" + name + "' does not match model layout");
    }
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) t->w(i, j) = in.f32();
    }
  }
  return out;
}

}  // namespace unitqa
