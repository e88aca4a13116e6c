#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "memescore/error.hpp"
#include "memescore/quant.hpp"

namespace memescore {

namespace {

constexpr char kTensorMagic[4] = {'A', 'Q', 'T', '1'};
constexpr char kImportanceMagic[4] = {'I', 'M', 'X', '1'};

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw DataError(std::string("truncated file while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void expect_magic(std::istream& in, const char (&magic)[4]) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw DataError("bad magic, expected " + std::string(magic, 4));
  }
}

void expect_eof(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("unexpected trailing bytes");
}

void check_written(std::ostream& out) {
  if (!out) throw DataError("write failure");
}

}  // namespace

void write_quantized(const QuantizedTensor& tensor, std::ostream& out) {
  tensor.validate();
  out.write(kTensorMagic, 4);
  put_le<std::uint32_t>(out, tensor.rows);
  put_le<std::uint32_t>(out, tensor.cols);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.bits));
  put_le<std::uint32_t>(out, tensor.block_size);
  const std::size_t stride = tensor.bytes_per_block();
  for (std::size_t b = 0; b < tensor.num_blocks(); ++b) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(tensor.params[b].scale));
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(tensor.params[b].min));
    out.write(reinterpret_cast<const char*>(tensor.packed.data() + b * stride),
              static_cast<std::streamsize>(stride));
  }
  check_written(out);
}

QuantizedTensor read_quantized(std::istream& in) {
  expect_magic(in, kTensorMagic);
  QuantizedTensor t;
  t.rows = get_le<std::uint32_t>(in, "rows");
  t.cols = get_le<std::uint32_t>(in, "cols");
  t.bits = get_le<std::uint8_t>(in, "bits");
  t.block_size = get_le<std::uint32_t>(in, "block_size");
  QuantConfig{t.bits, t.block_size, 0, 1e-8}.validate();
  if (t.cols % t.block_size != 0) throw DataError("block_size does not divide column count");
  const std::size_t blocks = static_cast<std::size_t>(t.rows) * t.cols / t.block_size;
  const std::size_t stride = t.bytes_per_block();
  t.params.resize(blocks);
  t.packed.resize(blocks * stride);
  for (std::size_t b = 0; b < blocks; ++b) {
    t.params[b].scale = std::bit_cast<float>(get_le<std::uint32_t>(in, "block scale"));
    t.params[b].min = std::bit_cast<float>(get_le<std::uint32_t>(in, "block min"));
    if (!in.read(reinterpret_cast<char*>(t.packed.data() + b * stride), static_cast<std::streamsize>(stride))) {
      throw DataError("truncated file while reading block codes");
    }
  }
  expect_eof(in);
  return t;
}

void write_importance(const ImportanceMatrix& matrix, std::ostream& out) {
  out.write(kImportanceMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.cols()));
  put_le<std::uint64_t>(out, matrix.count);
  for (double s : matrix.sums) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(s));
  check_written(out);
}

ImportanceMatrix read_importance(std::istream& in) {
  expect_magic(in, kImportanceMagic);
  const auto cols = get_le<std::uint32_t>(in, "cols");
  ImportanceMatrix m(cols);
  m.count = get_le<std::uint64_t>(in, "count");
  for (double& s : m.sums) {
    s = std::bit_cast<double>(get_le<std::uint64_t>(in, "sums"));
    if (!(s >= 0.0)) throw DataError("importance sums must be >= 0");
  }
  expect_eof(in);
  return m;
}

void save_quantized(const QuantizedTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create " + path.string());
  write_quantized(tensor, out);
}

QuantizedTensor load_quantized(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_quantized(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_importance(const ImportanceMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create " + path.string());
  write_importance(matrix, out);
}

ImportanceMatrix load_importance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_importance(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace memescore
