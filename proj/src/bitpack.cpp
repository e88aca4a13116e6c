#include "memescore/bitpack.hpp"

#include <algorithm>

#include "memescore/error.hpp"

namespace memescore {

namespace {

void check_bits(unsigned bits) {
  if (bits < 1 || bits > 8) throw DataError("code width must be 1..8 bits");
}

}  // namespace

void pack_codes_into(std::span<const std::uint8_t> codes, unsigned bits, std::span<std::uint8_t> out) {
  check_bits(bits);
  if (out.size() < packed_size(codes.size(), bits)) throw DataError("packed output buffer too small");
  std::fill(out.begin(), out.end(), std::uint8_t{0});
  const unsigned mask = (1u << bits) - 1u;
  std::size_t bitpos = 0;
  for (std::uint8_t code : codes) {
    const unsigned value = code & mask;
    const std::size_t byte = bitpos / 8;
    const unsigned shift = bitpos % 8;
    out[byte] |= static_cast<std::uint8_t>(value << shift);
    if (shift + bits > 8) out[byte + 1] |= static_cast<std::uint8_t>(value >> (8 - shift));
    bitpos += bits;
  }
}

std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, unsigned bits) {
  std::vector<std::uint8_t> out(packed_size(codes.size(), bits));
  pack_codes_into(codes, bits, out);
  return out;
}

std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> packed, unsigned bits, std::size_t count) {
  check_bits(bits);
  if (packed.size() < packed_size(count, bits)) throw DataError("packed code buffer too short");
  const unsigned mask = (1u << bits) - 1u;
  std::vector<std::uint8_t> codes(count);
  std::size_t bitpos = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t byte = bitpos / 8;
    const unsigned shift = bitpos % 8;
    unsigned value = packed[byte] >> shift;
    if (shift + bits > 8) value |= static_cast<unsigned>(packed[byte + 1]) << (8 - shift);
    codes[i] = static_cast<std::uint8_t>(value & mask);
    bitpos += bits;
  }
  return codes;
}

}  // namespace memescore
