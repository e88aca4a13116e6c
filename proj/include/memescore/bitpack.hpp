#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace memescore {

// Bytes needed for `count` codes of `bits` bits each.
constexpr std::size_t packed_size(std::size_t count, unsigned bits) noexcept {
  return (count * bits + 7) / 8;
}

// Packs codes into a contiguous LSB-first bit stream: code i occupies stream
// bits [i*bits, (i+1)*bits), and stream bit k lives in bit (k % 8) of byte
// k / 8. Codes must fit in `bits` (1..8) bits; higher bits are masked off.
std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, unsigned bits);
void pack_codes_into(std::span<const std::uint8_t> codes, unsigned bits, std::span<std::uint8_t> out);

std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> packed, unsigned bits, std::size_t count);

}  // namespace memescore
