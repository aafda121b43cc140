#pragma once

// Versioned binary container for named parameter blobs: magic, kind tag,
// string metadata, then per-blob shape + CRC32 + little-endian float32
// payload. load(save(a)) reproduces bit-identical contents; a failed CRC is
// rejected at load time.

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "denfuse/serial.hpp"
#include "denfuse/tensor.hpp"

namespace denfuse {

constexpr std::uint32_t kArchiveVersion = 1;
constexpr std::uint32_t kBackboneArchiveKind = 0;
constexpr std::uint32_t kFusionArchiveKind = 1;

struct ArchiveBlob {
  std::string name;
  Tensor tensor;
};

class Archive {
 public:
  Archive() = default;
  explicit Archive(std::uint32_t kind) : kind_(kind) {}

  std::uint32_t kind() const { return kind_; }

  void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
  void set_meta_int(const std::string& key, std::int64_t value) { meta_[key] = std::to_string(value); }

  const std::string& meta(const std::string& key) const {
    auto it = meta_.find(key);
    if (it == meta_.end()) throw std::runtime_error("archive: missing metadata key '" + key + "'");
    return it->second;
  }

  std::int64_t meta_int(const std::string& key) const { return std::stoll(meta(key)); }

  void add_blob(std::string name, Tensor tensor) {
    blobs_.push_back({std::move(name), std::move(tensor)});
  }

  const std::vector<ArchiveBlob>& blobs() const { return blobs_; }

  const Tensor& blob(const std::string& name) const {
    for (const ArchiveBlob& b : blobs_) {
      if (b.name == name) return b.tensor;
    }
    throw std::runtime_error("archive: missing blob '" + name + "'");
  }

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'D', 'F', 'A', 'R'});
    serial::put_u32(out, kArchiveVersion);
    serial::put_u32(out, kind_);
    serial::put_u32(out, static_cast<std::uint32_t>(meta_.size()));
    for (const auto& [key, value] : meta_) {
      serial::put_string(out, key);
      serial::put_string(out, value);
    }
    serial::put_u32(out, static_cast<std::uint32_t>(blobs_.size()));
    for (const ArchiveBlob& b : blobs_) {
      serial::put_string(out, b.name);
      serial::put_u32(out, static_cast<std::uint32_t>(b.tensor.rank()));
      for (int d : b.tensor.shape()) serial::put_u32(out, static_cast<std::uint32_t>(d));
      serial::put_u32(out, serial::crc32_floats(b.tensor.data(), static_cast<std::size_t>(b.tensor.size())));
      serial::put_u64(out, static_cast<std::uint64_t>(b.tensor.size()));
      for (std::int64_t i = 0; i < b.tensor.size(); ++i) serial::put_f32(out, b.tensor[i]);
    }
    return out;
  }

  static Archive deserialize(const std::vector<std::uint8_t>& bytes) {
    serial::Reader r(bytes.data(), bytes.size());
    const std::uint8_t* magic = r.bytes(4);
    if (magic[0] != 'D' || magic[1] != 'F' || magic[2] != 'A' || magic[3] != 'R') {
      throw std::runtime_error("archive: bad magic");
    }
    const std::uint32_t version = r.u32();
    if (version != kArchiveVersion) {
      throw std::runtime_error("archive: unsupported version " + std::to_string(version));
    }
    Archive a(r.u32());
    const std::uint32_t meta_count = r.u32();
    for (std::uint32_t i = 0; i < meta_count; ++i) {
      std::string key = r.string();
      a.meta_[key] = r.string();
    }
    const std::uint32_t blob_count = r.u32();
    for (std::uint32_t i = 0; i < blob_count; ++i) {
      std::string name = r.string();
      const std::uint32_t rank = r.u32();
      if (rank < 1 || rank > 4) throw std::runtime_error("archive: bad blob rank");
      std::vector<int> shape(rank);
      for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
      const std::uint32_t stored_crc = r.u32();
      const std::uint64_t count = r.u64();
      std::vector<float> data(count);
      for (std::uint64_t j = 0; j < count; ++j) data[j] = r.f32();
      const std::uint32_t actual_crc = serial::crc32_floats(data.data(), data.size());
      if (actual_crc != stored_crc) {
        throw std::runtime_error("archive: CRC mismatch in blob '" + name + "'");
      }
      a.add_blob(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (!r.exhausted()) throw std::runtime_error("archive: trailing bytes");
    return a;
  }

  void save(const std::string& path) const {
    const std::vector<std::uint8_t> bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("archive: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("archive: write failed for '" + path + "'");
  }

  static Archive load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("archive: cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  std::uint32_t kind_ = 0;
  std::map<std::string, std::string> meta_;  // ordered: keeps serialization canonical
  std::vector<ArchiveBlob> blobs_;
};

}  // namespace denfuse
