// Copyright 2026 The KCM Authors
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

#include "kcm/serialize.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace kcm {
namespace {

constexpr std::string_view kMagic("KCMNET\0\0", 8);

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint64_t uint(int bytes) {
    require(pos_ + bytes <= in_.size(), ErrorKind::kData, "model file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += bytes;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view raw(std::size_t n) {
    require(pos_ + n <= in_.size(), ErrorKind::kData, "model file truncated");
    std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

void WriteParams(Writer& w, const std::vector<std::span<const double>>& blocks) {
  std::uint64_t total = 0;
  for (auto b : blocks) total += b.size();
  w.u64(total);
  for (auto b : blocks)
    for (double v : b) w.f64(v);
}

void ReadParams(Reader& r, std::vector<std::span<double>> blocks) {
  std::uint64_t total = 0;
  for (auto b : blocks) total += b.size();
  require(r.u64() == total, ErrorKind::kData, "model parameter count does not match architecture");
  for (auto b : blocks)
    for (double& v : b) v = r.f64();
}

}  // namespace

std::string encode_network(const AnyNetwork& net) {
  Writer w;
  w.raw(kMagic);
  w.u32(kModelFormatVersion);
  if (const auto* kan = std::get_if<KanNetwork>(&net)) {
    const KanShape shape = kan->shape();
    w.u32(0);
    w.u32(static_cast<std::uint32_t>(kan->layers().size()));
    for (int d : shape.dims) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(shape.order));
    w.u32(static_cast<std::uint32_t>(shape.intervals));
    w.f64(shape.lo);
    w.f64(shape.hi);
    std::vector<std::span<const double>> blocks;
    for (const KanLayer& l : kan->layers()) blocks.push_back(l.parameters());
    WriteParams(w, blocks);
  } else {
    const auto& mlp = std::get<MlpNetwork>(net);
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(mlp.layers().size()));
    for (int d : mlp.dims()) w.u32(static_cast<std::uint32_t>(d));
    std::vector<std::span<const double>> blocks;
    for (const DenseLayer& l : mlp.layers()) blocks.push_back(l.parameters());
    WriteParams(w, blocks);
  }
  return w.take();
}

AnyNetwork decode_network(std::string_view bytes) {
  Reader r(bytes);
  require(r.raw(kMagic.size()) == kMagic, ErrorKind::kData, "not a KCM model file");
  const std::uint32_t version = r.u32();
  require(version == kModelFormatVersion, ErrorKind::kData,
          "unsupported model format version " + std::to_string(version));
  const std::uint32_t kind = r.u32();
  const std::uint32_t layers = r.u32();
  require(layers >= 1 && layers < 1024, ErrorKind::kData, "implausible layer count");
  std::vector<int> dims;
  for (std::uint32_t l = 0; l <= layers; ++l) dims.push_back(static_cast<int>(r.u32()));

  if (kind == 0) {
    KanShape shape;
    shape.dims = dims;
    shape.order = static_cast<int>(r.u32());
    shape.intervals = static_cast<int>(r.u32());
    shape.lo = r.f64();
    shape.hi = r.f64();
    KanNetwork net = KanNetwork::create(shape, 0);
    ReadParams(r, net.parameter_blocks());
    require(r.done(), ErrorKind::kData, "trailing bytes in model file");
    return net;
  }
  require(kind == 1, ErrorKind::kData, "unknown model kind " + std::to_string(kind));
  MlpNetwork net = MlpNetwork::create(dims, 0);
  ReadParams(r, net.parameter_blocks());
  require(r.done(), ErrorKind::kData, "trailing bytes in model file");
  return net;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kData, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kData, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kData, "short write to " + path.string());
}

void save_network(const std::filesystem::path& path, const AnyNetwork& net) {
  write_file(path, encode_network(net));
}

AnyNetwork load_network(const std::filesystem::path& path) { return decode_network(read_file(path)); }

}  // namespace kcm
