#include "datk/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "datk/errors.hpp"

namespace datk {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t take_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("truncated checkpoint: " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create checkpoint: " + path);
  out.write("DATK", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (shape_numel(t.shape) != static_cast<int64_t>(t.data.size()))
      throw ContractError("checkpoint tensor '" + t.name + "': shape/data mismatch");
    put_u32(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int e : t.shape) put_u32(out, static_cast<uint32_t>(e));
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 4));
  }
  if (!out) throw FormatError("checkpoint write failed: " + path);
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DATK", 4) != 0)
    throw FormatError("bad checkpoint magic in " + path);
  const uint32_t version = take_u32(in, path);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  const uint32_t count = take_u32(in, path);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const uint32_t name_len = take_u32(in, path);
    if (name_len > (1u << 16)) throw FormatError("unreasonable name length in " + path);
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    const uint32_t rank = take_u32(in, path);
    if (rank > 8) throw FormatError("unreasonable tensor rank in " + path);
    int64_t n = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      const uint32_t e = take_u32(in, path);
      t.shape.push_back(static_cast<int>(e));
      n *= e;
    }
    t.data.resize(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * 4));
    if (!in) throw FormatError("truncated checkpoint: " + path);
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace datk
