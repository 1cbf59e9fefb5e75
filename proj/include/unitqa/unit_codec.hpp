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

// Frame features, the run-length unit codec, and per-unit duration
// statistics. Frames are quantized elsewhere (see kmeans.hpp); this header
// owns the representations that flow between quantizer, model and synthesis.

#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "unitqa/errors.hpp"
#include "unitqa/serial.hpp"

namespace unitqa {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;

// A T x D matrix of per-frame acoustic feature vectors.
struct FrameFeatures {
  MatF frames;  // T rows, D columns
  double frame_duration_ms = 20.0;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }

  void validate() const {
    if (frame_duration_ms <= 0.0) throw InvalidInputError("frame_duration_ms must be positive");
    if (frames.rows() > 0 && frames.cols() < 1) throw InvalidInputError("feature dim must be >= 1");
    if (!frames.allFinite()) throw InvalidInputError("frame features contain non-finite values");
  }
};

// A unit-ID sequence with parallel frame-count durations. When
// `deduplicated` is set, no two adjacent units are equal.
struct UnitSequence {
  std::vector<int> units;
  std::vector<int> durations;
  bool deduplicated = true;

  std::size_t size() const { return units.size(); }
  int total_frames() const {
    int t = 0;
    for (const int d : durations) t += d;
    return t;
  }

  void validate() const {
    if (units.size() != durations.size()) throw InvalidInputError("units/durations length mismatch");
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (units[i] < 0) throw InvalidInputError("unit ID must be nonnegative");
      if (durations[i] < 1) throw InvalidInputError("duration must be >= 1");
      if (deduplicated && i > 0 && units[i] == units[i - 1]) {
        throw InvalidInputError("deduplicated sequence has equal adjacent units");
      }
    }
  }

  bool operator==(const UnitSequence&) const = default;
};

// Collapses adjacent runs of identical IDs; durations record run lengths.
inline UnitSequence rle_encode(std::span<const int> raw) {
  UnitSequence seq;
  seq.deduplicated = true;
  for (const int id : raw) {
    if (id < 0) throw InvalidInputError("unit ID must be nonnegative");
    if (!seq.units.empty() && seq.units.back() == id) {
      ++seq.durations.back();
    } else {
      seq.units.push_back(id);
      seq.durations.push_back(1);
    }
  }
  return seq;
}

inline UnitSequence rle_encode(const std::vector<int>& raw) {
  return rle_encode(std::span<const int>(raw));
}

// Expands each unit to durations[i] copies. Exact inverse of rle_encode.
inline std::vector<int> rle_decode(const UnitSequence& seq) {
  seq.validate();
  std::vector<int> raw;
  raw.reserve(static_cast<std::size_t>(seq.total_frames()));
  for (std::size_t i = 0; i < seq.units.size(); ++i) {
    raw.insert(raw.end(), static_cast<std::size_t>(seq.durations[i]), seq.units[i]);
  }
  return raw;
}

// Per-unit mean durations with a global-mean fallback for unseen units.
// Predictions are round-half-up integers, floored at 1.
class DurationModel {
 public:
  static DurationModel fit(const std::vector<UnitSequence>& corpus) {
    if (corpus.empty()) throw InvalidInputError("duration model needs a non-empty corpus");
    std::map<int, std::pair<long long, long long>> acc;  // unit -> (sum, count)
    long long total_sum = 0, total_count = 0;
    for (const UnitSequence& seq : corpus) {
      seq.validate();
      for (std::size_t i = 0; i < seq.units.size(); ++i) {
        auto& [sum, count] = acc[seq.units[i]];
        sum += seq.durations[i];
        ++count;
        total_sum += seq.durations[i];
        ++total_count;
      }
    }
    if (total_count == 0) throw InvalidInputError("duration model corpus has no units");
    DurationModel m;
    for (const auto& [unit, sc] : acc) {
      m.per_unit_[unit] = round_half_up(static_cast<double>(sc.first) / static_cast<double>(sc.second));
    }
    m.global_mean_ = round_half_up(static_cast<double>(total_sum) / static_cast<double>(total_count));
    return m;
  }

  static DurationModel from_table(std::map<int, int> table, int global_mean) {
    if (global_mean < 1) throw InvalidInputError("global mean duration must be >= 1");
    for (const auto& [unit, dur] : table) {
      if (unit < 0 || dur < 1) throw InvalidInputError("invalid duration table entry");
    }
    DurationModel m;
    m.per_unit_ = std::move(table);
    m.global_mean_ = global_mean;
    return m;
  }

  int predict(int unit) const {
    const auto it = per_unit_.find(unit);
    return it != per_unit_.end() ? it->second : global_mean_;
  }

  // Re-expands a deduplicated unit sequence using predicted durations.
  UnitSequence expand(const std::vector<int>& units) const {
    UnitSequence out;
    out.deduplicated = false;
    for (const int u : units) {
      out.units.push_back(u);
      out.durations.push_back(predict(u));
    }
    return out;
  }

  int global_mean() const { return global_mean_; }
  const std::map<int, int>& table() const { return per_unit_; }

  static int round_half_up(double x) {
    const int r = static_cast<int>(std::floor(x + 0.5));
    return r < 1 ? 1 : r;
  }

 private:
  std::map<int, int> per_unit_;
  int global_mean_ = 1;
};

// --- Feature file format: magic "UQFT", u32 T, u32 D, T*D float32 LE ---

inline void write_features(const std::string& path, const FrameFeatures& f) {
  f.validate();
  BinaryWriter w;
  w.bytes("UQFT", 4);
  w.u32(static_cast<std::uint32_t>(f.frames.rows()));
  w.u32(static_cast<std::uint32_t>(f.frames.cols()));
  for (Eigen::Index r = 0; r < f.frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.frames.cols(); ++c) w.f32(f.frames(r, c));
  }
  w.write_file(path);
}

inline FrameFeatures read_features(const std::string& path) {
  BinaryReader r = BinaryReader::from_file(path);
  char magic[4];
  r.raw(magic, 4);
  if (std::string_view(magic, 4) != "UQFT") throw InvalidInputError("not a feature file: " + path);
  const std::uint32_t t = r.u32();
  const std::uint32_t d = r.u32();
  FrameFeatures f;
  f.frames.resize(t, d);
  for (std::uint32_t i = 0; i < t; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) f.frames(i, j) = r.f32();
  }
  f.validate();
  return f;
}

}  // namespace unitqa
