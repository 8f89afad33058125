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

#include "fsvae/data_io.h"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fsvae/errors.h"

namespace fsvae {
namespace {

namespace fs = std::filesystem;

uint32_t ReadBe32(const uint8_t* p) {
  return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) |
         (uint32_t{p[2]} << 8) | uint32_t{p[3]};
}

void AppendBe32(std::vector<uint8_t>& out, uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<uint8_t>(v >> s));
}

uint32_t ReadIdxHeader(const std::vector<uint8_t>& bytes, uint32_t magic,
                       int rank, const std::string& what, uint32_t* dims) {
  const size_t header = 4 + 4 * static_cast<size_t>(rank);
  if (bytes.size() < header) {
    throw FormatError(what + ": truncated IDX header (expected " +
                      std::to_string(header) + " bytes, got " +
                      std::to_string(bytes.size()) + ")");
  }
  const uint32_t got = ReadBe32(bytes.data());
  if (got != magic) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": bad IDX magic 0x%08X (expected 0x%08X)",
                  got, magic);
    throw FormatError(what + buf);
  }
  uint64_t payload = 1;
  for (int i = 0; i < rank; ++i) {
    dims[i] = ReadBe32(bytes.data() + 4 + 4 * i);
    payload *= dims[i];
  }
  const uint64_t expected = header + payload;
  if (bytes.size() != expected) {
    throw FormatError(what + ": IDX length mismatch (expected " +
                      std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()) + ")");
  }
  return got;
}

// Little-endian serialization helpers for checkpoints.
class Writer {
 public:
  template <typename T>
  void Put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
  }
  void PutBytes(const void* p, size_t n) {
    const auto* c = static_cast<const uint8_t*>(p);
    out.insert(out.end(), c, c + n);
  }
  void PutString(const std::string& s) {
    Put<uint32_t>(static_cast<uint32_t>(s.size()));
    PutBytes(s.data(), s.size());
  }
  std::vector<uint8_t> out;
};

class Reader {
 public:
  Reader(const uint8_t* p, size_t n, std::string what)
      : p_(p), n_(n), what_(std::move(what)) {}
  template <typename T>
  T Get() {
    Need(sizeof(T));
    uint8_t b[sizeof(T)];
    std::memcpy(b, p_ + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  const uint8_t* Take(size_t n) {
    Need(n);
    const uint8_t* at = p_ + pos_;
    pos_ += n;
    return at;
  }
  std::string GetString() {
    const uint32_t len = Get<uint32_t>();
    const uint8_t* s = Take(len);
    return std::string(reinterpret_cast<const char*>(s), len);
  }
  size_t remaining() const { return n_ - pos_; }

 private:
  void Need(size_t n) const {
    if (n > n_ - pos_) {
      throw FormatError(what_ + ": truncated (need " + std::to_string(n) +
                        " more bytes at offset " + std::to_string(pos_) +
                        ", have " + std::to_string(n_ - pos_) + ")");
    }
  }
  const uint8_t* p_;
  size_t n_;
  size_t pos_ = 0;
  std::string what_;
};

uint32_t Crc32(const uint8_t* p, size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt step = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
    crc = crc32(crc, p, step);
    p += step;
    n -= step;
  }
  return static_cast<uint32_t>(crc);
}

std::string MetaText(const std::map<std::string, std::string>& meta) {
  std::string s;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos) {
      throw FormatError("checkpoint meta key '" + k + "' contains '=' or newline");
    }
    // Values may span lines; escape backslashes and newlines.
    std::string esc;
    for (char c : v) {
      if (c == '\\') esc += "\\\\";
      else if (c == '\n') esc += "\\n";
      else esc += c;
    }
    s += k + "=" + esc + "\n";
  }
  return s;
}

std::map<std::string, std::string> ParseMeta(const std::string& text,
                                             const std::string& what) {
  std::map<std::string, std::string> meta;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(what + ": malformed meta line");
    std::string v;
    for (size_t i = eq + 1; i < line.size(); ++i) {
      if (line[i] == '\\' && i + 1 < line.size()) {
        v += line[i + 1] == 'n' ? '\n' : line[i + 1];
        ++i;
      } else {
        v += line[i];
      }
    }
    meta[line.substr(0, eq)] = v;
  }
  return meta;
}

}  // namespace

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error("cannot open " + path);
  std::vector<uint8_t> out;
  uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof buf);
    if (n < 0) {
      int err = 0;
      const std::string msg = gzerror(f, &err);
      gzclose(f);
      throw FormatError("error reading " + path + ": " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  gzclose(f);
  return out;
}

void WriteFileAtomic(const std::string& path, const std::vector<uint8_t>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed: " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

IdxDataset ParseIdxImages(const std::vector<uint8_t>& bytes,
                          const std::string& what) {
  uint32_t dims[3];
  ReadIdxHeader(bytes, kIdxImageMagic, 3, what, dims);
  IdxDataset d;
  d.count = dims[0];
  d.rows = dims[1];
  d.cols = dims[2];
  d.pixels.assign(bytes.begin() + 16, bytes.end());
  return d;
}

std::vector<uint8_t> ParseIdxLabels(const std::vector<uint8_t>& bytes,
                                    const std::string& what) {
  uint32_t dims[1];
  ReadIdxHeader(bytes, kIdxLabelMagic, 1, what, dims);
  return {bytes.begin() + 8, bytes.end()};
}

std::vector<uint8_t> EncodeIdxImages(const IdxDataset& data) {
  if (static_cast<int64_t>(data.pixels.size()) != data.count * data.rows * data.cols) {
    throw ShapeError("idx images: pixel buffer does not match header dims");
  }
  std::vector<uint8_t> out;
  AppendBe32(out, kIdxImageMagic);
  AppendBe32(out, static_cast<uint32_t>(data.count));
  AppendBe32(out, static_cast<uint32_t>(data.rows));
  AppendBe32(out, static_cast<uint32_t>(data.cols));
  out.insert(out.end(), data.pixels.begin(), data.pixels.end());
  return out;
}

std::vector<uint8_t> EncodeIdxLabels(const std::vector<uint8_t>& labels) {
  std::vector<uint8_t> out;
  AppendBe32(out, kIdxLabelMagic);
  AppendBe32(out, static_cast<uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

IdxDataset LoadIdx(const std::string& images_path, const std::string& labels_path) {
  IdxDataset d = ParseIdxImages(ReadFileBytes(images_path), images_path);
  if (!labels_path.empty()) {
    d.labels = ParseIdxLabels(ReadFileBytes(labels_path), labels_path);
    if (static_cast<int64_t>(d.labels.size()) != d.count) {
      throw FormatError(labels_path + ": " + std::to_string(d.labels.size()) +
                        " labels for " + std::to_string(d.count) + " images");
    }
  }
  return d;
}

IdxDataset LoadIdxSplit(const std::string& dir, const std::string& prefix) {
  if (!fs::is_directory(dir)) throw Error("data directory not found: " + dir);
  auto find = [&](const std::string& stem) -> std::string {
    for (const std::string& name : {stem, stem + ".gz"}) {
      const fs::path p = fs::path(dir) / name;
      if (fs::exists(p)) return p.string();
    }
    return {};
  };
  const std::string images = find(prefix + "-images-idx3-ubyte");
  if (images.empty()) {
    throw Error("no " + prefix + "-images-idx3-ubyte[.gz] in " + dir);
  }
  return LoadIdx(images, find(prefix + "-labels-idx1-ubyte"));
}

Tensor ResizeToUnit(const uint8_t* pixels, int64_t rows, int64_t cols,
                    int64_t target) {
  if (rows < 1 || cols < 1 || target < 1) {
    throw ShapeError("preprocess: empty image or target size");
  }
  Tensor out({target, target});
  auto source = [](int64_t d, int64_t src, int64_t dst, int64_t& i0,
                   int64_t& i1, float& w) {
    const double s = (static_cast<double>(d) + 0.5) * static_cast<double>(src) /
                         static_cast<double>(dst) - 0.5;
    const double c = std::clamp(s, 0.0, static_cast<double>(src - 1));
    i0 = static_cast<int64_t>(std::floor(c));
    i1 = std::min(i0 + 1, src - 1);
    w = static_cast<float>(c - static_cast<double>(i0));
  };
  for (int64_t y = 0; y < target; ++y) {
    int64_t y0, y1;
    float wy;
    source(y, rows, target, y0, y1, wy);
    for (int64_t x = 0; x < target; ++x) {
      int64_t x0, x1;
      float wx;
      source(x, cols, target, x0, x1, wx);
      const float p00 = pixels[y0 * cols + x0], p01 = pixels[y0 * cols + x1];
      const float p10 = pixels[y1 * cols + x0], p11 = pixels[y1 * cols + x1];
      // Lerp form keeps constant regions exact.
      const float top = p00 + (p01 - p00) * wx;
      const float bottom = p10 + (p11 - p10) * wx;
      const float v = top + (bottom - top) * wy;
      out[y * target + x] = std::clamp(v / 127.5f - 1.0f, -1.0f, 1.0f);
    }
  }
  return out;
}

Tensor Preprocess(const IdxDataset& data, int64_t target, int64_t first,
                  int64_t count) {
  if (count < 0) count = data.count - first;
  if (first < 0 || count < 0 || first + count > data.count) {
    throw ShapeError("preprocess: range [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside dataset of " +
                     std::to_string(data.count));
  }
  Tensor out({count, 1, target, target});
  const int64_t in_px = data.rows * data.cols, out_px = target * target;
  for (int64_t i = 0; i < count; ++i) {
    Tensor img = ResizeToUnit(data.pixels.data() + (first + i) * in_px, data.rows,
                              data.cols, target);
    std::copy_n(img.data(), out_px, out.data() + i * out_px);
  }
  return out;
}

uint8_t QuantizePixel(float v) {
  const float c = std::clamp(v, -1.0f, 1.0f);
  return static_cast<uint8_t>(std::lround((c + 1.0f) * 127.5f));
}

GrayImage ImageGrid(const Tensor& images) {
  if (images.rank() != 3 && !(images.rank() == 4 && images.dim(1) == 1)) {
    throw ShapeError("image grid: expected [N,1,H,W] or [N,H,W], got " +
                     ShapeString(images.shape()));
  }
  const int64_t n = images.dim(0);
  if (n < 1) throw ShapeError("image grid: no images");
  const int64_t h = images.dim(images.rank() - 2), w = images.dim(images.rank() - 1);
  const auto per_row = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int64_t grid_rows = (n + per_row - 1) / per_row;
  GrayImage g;
  g.width = per_row * w;
  g.height = grid_rows * h;
  g.pixels.assign(static_cast<size_t>(g.width * g.height), 0);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t oy = (i / per_row) * h, ox = (i % per_row) * w;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        g.pixels[static_cast<size_t>((oy + y) * g.width + ox + x)] =
            QuantizePixel(images[(i * h + y) * w + x]);
      }
  }
  return g;
}

void WritePgm(const std::string& path, const GrayImage& image) {
  const std::string header = "P5\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  WriteFileAtomic(path, bytes);
}

GrayImage ReadPgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> int64_t {
    skip_space();
    int64_t v = 0;
    size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) throw FormatError(path + ": malformed PGM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError(path + ": not a binary PGM (P5)");
  }
  pos = 2;
  GrayImage g;
  g.width = number();
  g.height = number();
  const int64_t maxval = number();
  if (maxval != 255) {
    throw FormatError(path + ": unsupported PGM maxval " + std::to_string(maxval));
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError(path + ": malformed PGM header");
  }
  ++pos;
  const size_t expected = static_cast<size_t>(g.width * g.height);
  if (bytes.size() - pos != expected) {
    throw FormatError(path + ": PGM data length " + std::to_string(bytes.size() - pos) +
                      ", expected " + std::to_string(expected));
  }
  g.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return g;
}

void WriteImageGrid(const Tensor& images, const std::string& path) {
  WritePgm(path, ImageGrid(images));
}

const Tensor* Checkpoint::Find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<uint8_t> EncodeCheckpoint(const Checkpoint& ckpt) {
  Writer w;
  w.PutBytes("FSVA", 4);
  w.Put<uint32_t>(kCheckpointVersion);
  w.Put<uint32_t>(static_cast<uint32_t>(2 + ckpt.tensors.size()));
  auto chunk = [&w](const char* tag, const std::vector<uint8_t>& payload) {
    w.PutBytes(tag, 4);
    w.Put<uint64_t>(payload.size());
    w.PutBytes(payload.data(), payload.size());
    w.Put<uint32_t>(Crc32(payload.data(), payload.size()));
  };
  chunk("CONF", {ckpt.config_text.begin(), ckpt.config_text.end()});
  const std::string meta = MetaText(ckpt.meta);
  chunk("META", {meta.begin(), meta.end()});
  for (const auto& [name, t] : ckpt.tensors) {
    Writer p;
    p.PutString(name);
    p.Put<uint32_t>(static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) p.Put<int64_t>(d);
    for (float v : t.values()) p.Put<float>(v);
    chunk("TENS", p.out);
  }
  return w.out;
}

Checkpoint DecodeCheckpoint(const std::vector<uint8_t>& bytes,
                            const std::string& what) {
  Reader r(bytes.data(), bytes.size(), what);
  const uint8_t* magic = r.Take(4);
  if (std::memcmp(magic, "FSVA", 4) != 0) {
    throw FormatError(what + ": not a checkpoint (bad magic)");
  }
  const uint32_t version = r.Get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const uint32_t chunks = r.Get<uint32_t>();
  Checkpoint ckpt;
  for (uint32_t i = 0; i < chunks; ++i) {
    const std::string tag(reinterpret_cast<const char*>(r.Take(4)), 4);
    const uint64_t len = r.Get<uint64_t>();
    if (len > r.remaining()) {
      throw FormatError(what + ": chunk " + std::to_string(i) + " (" + tag +
                        ") truncated: " + std::to_string(len) + " bytes declared, " +
                        std::to_string(r.remaining()) + " available");
    }
    const uint8_t* payload = r.Take(len);
    const uint32_t crc = r.Get<uint32_t>();
    if (crc != Crc32(payload, len)) {
      throw FormatError(what + ": checksum mismatch in chunk " + std::to_string(i) +
                        " (" + tag + ")");
    }
    const std::string text(reinterpret_cast<const char*>(payload), len);
    if (tag == "CONF") {
      ckpt.config_text = text;
    } else if (tag == "META") {
      ckpt.meta = ParseMeta(text, what);
    } else if (tag == "TENS") {
      Reader p(payload, len, what + " tensor chunk " + std::to_string(i));
      std::string name = p.GetString();
      const uint32_t rank = p.Get<uint32_t>();
      if (rank > 8) throw FormatError(what + ": tensor '" + name + "' has rank " +
                                      std::to_string(rank));
      Shape shape(rank);
      uint64_t n = 1;
      for (auto& d : shape) {
        d = p.Get<int64_t>();
        if (d < 0) throw FormatError(what + ": tensor '" + name + "' negative dim");
        n *= static_cast<uint64_t>(d);
      }
      if (p.remaining() != n * sizeof(float)) {
        throw FormatError(what + ": tensor '" + name + "' data length " +
                          std::to_string(p.remaining()) + ", expected " +
                          std::to_string(n * sizeof(float)));
      }
      std::vector<float> values(n);
      for (float& v : values) v = p.Get<float>();
      ckpt.tensors.emplace_back(std::move(name), Tensor(shape, std::move(values)));
    } else {
      throw FormatError(what + ": unknown chunk tag '" + tag + "'");
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(what + ": " + std::to_string(r.remaining()) +
                      " trailing bytes after last chunk");
  }
  return ckpt;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  WriteFileAtomic(path, EncodeCheckpoint(ckpt));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes, path);
}

}  // namespace fsvae
