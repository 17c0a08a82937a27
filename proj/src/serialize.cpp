#include "sottac/serialize.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sottac {

namespace {

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw ContractViolation("read_params: truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void check_magic(std::string_view magic) {
  if (magic.size() != 4) throw ContractViolation("parameter magic must be 4 bytes");
}

}  // namespace

void write_params(std::ostream& out, std::string_view magic, std::span<const double> params) {
  check_magic(magic);
  out.write(magic.data(), 4);
  put_le<std::uint32_t>(out, kParamFormatVersion);
  put_le<std::uint64_t>(out, params.size());
  for (double x : params) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw ContractViolation("write_params: stream error");
}

ParamVector read_params(std::istream& in, std::string_view magic) {
  check_magic(magic);
  char got[4];
  if (!in.read(got, 4)) throw ContractViolation("read_params: truncated file");
  if (std::string_view(got, 4) != magic) {
    std::ostringstream os;
    os << "read_params: expected magic " << magic << ", found " << std::string_view(got, 4);
    throw ContractViolation(os.str());
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kParamFormatVersion) {
    std::ostringstream os;
    os << "read_params: unsupported version " << version;
    throw ContractViolation(os.str());
  }
  const auto dim = get_le<std::uint64_t>(in);
  if (dim > (std::uint64_t{1} << 32)) throw ContractViolation("read_params: implausible dimension");
  ParamVector out(dim);
  for (auto& x : out) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return out;
}

void save_params(const std::string& path, std::string_view magic, std::span<const double> params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ContractViolation("cannot open " + path + " for writing");
  write_params(f, magic, params);
}

ParamVector load_params(const std::string& path, std::string_view magic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractViolation("cannot open " + path);
  return read_params(f, magic);
}

}  // namespace sottac
