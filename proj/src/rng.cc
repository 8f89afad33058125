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

#include "fsvae/rng.h"

#include "fsvae/errors.h"

namespace fsvae {
namespace {

// SplitMix64 finalizer.
uint64_t Mix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

uint64_t RngStream::NextU64() {
  const uint64_t key = Mix(seed_ ^ Mix(stream_ + kGolden));
  return Mix(key + kGolden * ++counter_);
}

uint64_t RngStream::UniformInt(uint64_t n) {
  if (n == 0) throw ConfigError("UniformInt: n must be >= 1");
  // Multiply-shift range reduction; bias is below 2^-32 for n < 2^32.
  const unsigned __int128 wide =
      static_cast<unsigned __int128>(NextU64()) * static_cast<unsigned __int128>(n);
  return static_cast<uint64_t>(wide >> 64);
}

float RngStream::UniformFloat() {
  return static_cast<float>(NextU64() >> 40) * 0x1.0p-24f;
}

RngStream RngStream::Child(uint64_t id) const {
  return RngStream(seed_, Mix(stream_ * kGolden + Mix(id + 0x632be59bd9b4e019ULL)), 0);
}

}  // namespace fsvae
