#include "advseq/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace advseq::train {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'S', 'E', 'Q', 'C', 'K'};

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error("checkpoint: truncated file");
  return v;
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error("checkpoint: truncated file");
  return v;
}
std::string read_string(std::istream& is) {
  const std::uint64_t len = read_u64(is);
  if (len > (1ULL << 32)) throw Error("checkpoint: corrupted string length");
  std::string s(static_cast<std::size_t>(len), '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw Error("checkpoint: truncated file");
  return s;
}

}  // namespace

void Checkpoint::add_array(const std::string& name, ad::Tensor tensor) {
  for (const auto& [existing, _] : arrays_) {
    if (existing == name) throw Error("checkpoint: duplicate array '" + name + "'");
  }
  arrays_.emplace_back(name, std::move(tensor));
}

const ad::Tensor* Checkpoint::find_array(const std::string& name) const {
  for (const auto& [existing, tensor] : arrays_) {
    if (existing == name) return &tensor;
  }
  return nullptr;
}

const ad::Tensor& Checkpoint::array(const std::string& name) const {
  const ad::Tensor* t = find_array(name);
  if (t == nullptr) throw Error("checkpoint: missing array '" + name + "'");
  return *t;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw Error("checkpoint: missing metadata '" + key + "'");
  return it->second;
}

void Checkpoint::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("checkpoint: cannot write " + tmp);
    os.write(kMagic, sizeof kMagic);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(metadata.size()));
    for (const auto& [key, value] : metadata) {
      write_string(os, key);
      write_string(os, value);
    }
    write_u32(os, static_cast<std::uint32_t>(arrays_.size()));
    for (const auto& [name, tensor] : arrays_) {
      write_string(os, name);
      write_u32(os, static_cast<std::uint32_t>(tensor.rank()));
      for (std::int64_t ax = 0; ax < tensor.rank(); ++ax) {
        write_u64(os, static_cast<std::uint64_t>(tensor.extent(ax)));
      }
      os.write(reinterpret_cast<const char*>(tensor.data().data()),
               static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!os) throw Error("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path);
  char magic[8] = {};
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error("checkpoint: " + path + " is corrupted or not a checkpoint");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw Error("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint ck;
  const std::uint32_t n_meta = read_u32(is);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = read_string(is);
    ck.metadata.emplace(std::move(key), read_string(is));
  }
  const std::uint32_t n_arrays = read_u32(is);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    std::string name = read_string(is);
    const std::uint32_t rank = read_u32(is);
    if (rank > 8) throw Error("checkpoint: corrupted array rank");
    ad::Shape shape(rank);
    for (std::uint32_t ax = 0; ax < rank; ++ax) {
      shape[ax] = static_cast<std::int64_t>(read_u64(is));
    }
    std::vector<double> data(static_cast<std::size_t>(ad::shape_size(shape)));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw Error("checkpoint: truncated file");
    ck.add_array(name, ad::Tensor(std::move(shape), std::move(data)));
  }
  return ck;
}

}  // namespace advseq::train
