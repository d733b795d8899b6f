#include "vhd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "vhd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace vhd {

namespace {

constexpr char kMagic[4] = {'C', 'H', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot open '" + path.string() + "' for writing");
  }
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw DataError("write failed for '" + path.string() + "'");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path.string()), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open checkpoint '" + path_ + "'");
  }
  template <typename T>
  T get(const char* what) {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) {
      throw DataError("checkpoint '" + path_ + "': truncated reading " + what + " at offset " +
                      std::to_string(offset_));
    }
    offset_ += sizeof(T);
    return value;
  }
  void get_bytes(void* data, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in_) {
      throw DataError("checkpoint '" + path_ + "': truncated reading " + what + " at offset " +
                      std::to_string(offset_));
    }
    offset_ += n;
  }
  std::size_t offset() const { return offset_; }
  bool at_eof() {
    in_.peek();
    return in_.eof();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const ParamMap& params, const std::filesystem::path& path) {
  Writer w(path);
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("tensor name too long: " + name);
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(tensor.rank()));
    for (int d : tensor.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_bytes(tensor.data().data(), tensor.data().size() * sizeof(double));
  }
  w.finish(path);
}

ParamMap load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("checkpoint '" + r.path() + "': bad magic at offset 0");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw DataError("checkpoint '" + r.path() + "': unsupported version " +
                    std::to_string(version) + " at offset 4");
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  ParamMap params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name(name_len, '\0');
    r.get_bytes(name.data(), name_len, "name");
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape;
    std::int64_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::size_t dim_offset = r.offset();
      const auto dim = r.get<std::uint32_t>("dim");
      if (dim == 0 || dim > (1u << 30)) {
        throw DataError("checkpoint '" + r.path() + "': dim " + std::to_string(dim) +
                        " out of range at offset " + std::to_string(dim_offset));
      }
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
      if (numel > (std::int64_t{1} << 33)) {
        throw DataError("checkpoint '" + r.path() + "': tensor '" + name +
                        "' overflows the size limit at offset " + std::to_string(dim_offset));
      }
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    r.get_bytes(data.data(), data.size() * sizeof(double), ("payload of '" + name + "'").c_str());
    if (!params.emplace(std::move(name), Tensor(std::move(shape), std::move(data))).second) {
      throw DataError("checkpoint '" + r.path() + "': duplicate tensor name");
    }
  }
  if (!r.at_eof()) {
    throw DataError("checkpoint '" + r.path() + "': trailing bytes at offset " +
                    std::to_string(r.offset()));
  }
  return params;
}

}  // namespace vhd
