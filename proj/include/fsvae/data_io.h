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

#ifndef FSVAE_DATA_IO_H_
#define FSVAE_DATA_IO_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsvae/tensor.h"

namespace fsvae {

inline constexpr uint32_t kIdxImageMagic = 0x00000803;
inline constexpr uint32_t kIdxLabelMagic = 0x00000801;

struct IdxDataset {
  int64_t count = 0;
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<uint8_t> pixels;  // count * rows * cols
  std::vector<uint8_t> labels;  // empty when no label file was read
};

// Whole file contents; gzip-compressed files are inflated transparently.
std::vector<uint8_t> ReadFileBytes(const std::string& path);
// Writes through a temporary file renamed over `path`.
void WriteFileAtomic(const std::string& path, const std::vector<uint8_t>& bytes);

// Big-endian IDX image file (optionally with its label file).
IdxDataset LoadIdx(const std::string& images_path,
                   const std::string& labels_path = "");
std::vector<uint8_t> ParseIdxLabels(const std::vector<uint8_t>& bytes,
                                    const std::string& what);
IdxDataset ParseIdxImages(const std::vector<uint8_t>& bytes,
                          const std::string& what);
std::vector<uint8_t> EncodeIdxImages(const IdxDataset& data);
std::vector<uint8_t> EncodeIdxLabels(const std::vector<uint8_t>& labels);

// Locates "<prefix>-images-idx3-ubyte[.gz]" and the matching label file
// under `dir`; `prefix` is "train" or "t10k".
IdxDataset LoadIdxSplit(const std::string& dir, const std::string& prefix);

// Bilinear resize (half-pixel centres) to target x target, then
// x / 127.5 - 1. Images [first, first+count) -> [count, 1, target, target].
Tensor Preprocess(const IdxDataset& data, int64_t target = 32,
                  int64_t first = 0, int64_t count = -1);
// Same for a single rows x cols byte image; returns [target, target].
Tensor ResizeToUnit(const uint8_t* pixels, int64_t rows, int64_t cols,
                    int64_t target);

struct GrayImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;
};

// [-1,1] -> [0,255], rounded.
uint8_t QuantizePixel(float v);
// Tiles images ([N,1,H,W] or [N,H,W]) row-major, ceil(sqrt(N)) per row.
// Unused tiles are black.
GrayImage ImageGrid(const Tensor& images);
void WritePgm(const std::string& path, const GrayImage& image);
GrayImage ReadPgm(const std::string& path);
void WriteImageGrid(const Tensor& images, const std::string& path);

// Named-tensor container. Layout (little-endian): "FSVA", u32 version,
// u32 chunk count, then chunks of {4-byte tag, u64 length, payload,
// u32 CRC32 of payload}. Tags: CONF (config text), META (key=value text),
// TENS (u32 name length, name, u32 rank, i64 dims, f32 data).
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_text;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* Find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<uint8_t> EncodeCheckpoint(const Checkpoint& ckpt);
Checkpoint DecodeCheckpoint(const std::vector<uint8_t>& bytes,
                            const std::string& what);
void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);

}  // namespace fsvae

#endif  // FSVAE_DATA_IO_H_
