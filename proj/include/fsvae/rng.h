// Copyright 2026 The FSVAE Authors.
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

#ifndef FSVAE_RNG_H_
#define FSVAE_RNG_H_

#include <cstdint>

namespace fsvae {

// Counter-based generator: draw i of a stream is a pure function of
// (seed, stream, i). Child streams depend only on the parent's identity,
// never on how far the parent has advanced.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(uint64_t seed, uint64_t stream = 0, uint64_t counter = 0)
      : seed_(seed), stream_(stream), counter_(counter) {}

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }
  uint64_t counter() const { return counter_; }

  // Each call consumes exactly one counter value.
  uint64_t NextU64();
  // Uniform integer in [0, n). Throws ConfigError for n == 0.
  uint64_t UniformInt(uint64_t n);
  // Uniform float in [0, 1) with 24 bits of resolution.
  float UniformFloat();

  RngStream Child(uint64_t id) const;

 private:
  uint64_t seed_ = 0;
  uint64_t stream_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace fsvae

#endif  // FSVAE_RNG_H_
