#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace memescore {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// Running per-column sum of squared calibration activations.
struct ImportanceMatrix {
  std::vector<double> sums;
  std::uint64_t count = 0;

  ImportanceMatrix() = default;
  explicit ImportanceMatrix(std::size_t cols) : sums(cols, 0.0) {}

  std::size_t cols() const noexcept { return sums.size(); }

  // In-place accumulation; throws DataError on length mismatch or non-finite input.
  void accumulate(std::span<const double> activation_row);
  // Associative combination of two accumulators over the same columns.
  void merge(const ImportanceMatrix& other);

  // sums[j] / count + epsilon; just epsilon before anything was accumulated.
  std::vector<double> weights(double epsilon) const;

  bool operator==(const ImportanceMatrix&) const = default;
};

ImportanceMatrix accumulate_importance(ImportanceMatrix matrix, std::span<const double> activation_row);

struct QuantConfig {
  unsigned bits = 4;
  std::size_t block_size = 32;
  std::size_t refine_iters = 5;
  double importance_epsilon = 1e-8;

  // bits in {2, 3, 4, 8}, block_size >= 2, epsilon > 0.
  void validate() const;
  unsigned max_code() const noexcept { return (1u << bits) - 1u; }
};

// Result of fitting one block in working precision.
struct BlockFit {
  double scale = 0.0;
  double min = 0.0;
  std::vector<std::uint8_t> codes;
  // Weighted error after the initial assignment, then after every
  // (assign, refit) round that was run. Non-increasing.
  std::vector<double> error_trace;

  double error() const noexcept { return error_trace.empty() ? 0.0 : error_trace.back(); }
};

// sum_i importance_i * (w_i - (scale * q_i + min))^2
double weighted_block_error(std::span<const double> weights, std::span<const double> importance,
                            std::span<const std::uint8_t> codes, double scale, double min);

// Weighted least-squares (scale, min) for fixed codes. When every code is
// equal the system is singular and the result is scale = 0, min = weighted
// mean of the weights.
struct AffineParams {
  double scale = 0.0;
  double min = 0.0;
};
AffineParams fit_affine(std::span<const double> weights, std::span<const double> importance,
                        std::span<const std::uint8_t> codes);

// Importance-weighted affine quantization of one block.
//
// Starting point: the lowest weighted error among
//   - grids with min = min(w) and scale = (max - min) / k for
//     k = 2^bits - 1 down to 1 (k = 2^bits - 1 is the plain min/max grid; the
//     shorter spans make blocks that sit on fewer levels reconstruct exactly),
//   - the result of quantizing the same block with uniform importance.
// Then refine_iters rounds of nearest-code assignment followed by a weighted
// least-squares refit. A step that would raise the weighted error is not
// taken, and refinement stops once a round changes nothing. The result is
// therefore never worse, under the given importance, than the uniform run.
//
// A constant block gives scale 0, min = that value, all codes 0.
BlockFit quantize_block(std::span<const double> weights, std::span<const double> importance,
                        const QuantConfig& config);

struct BlockParams {
  float scale = 0.0f;
  float min = 0.0f;

  bool operator==(const BlockParams&) const = default;
};

// Row-major blocks of `block_size` consecutive elements within a row. Codes
// of each block are bit-packed LSB-first into packed_size(block_size, bits)
// bytes; all blocks' bytes are stored back to back.
struct QuantizedTensor {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  unsigned bits = 0;
  std::uint32_t block_size = 0;
  std::vector<BlockParams> params;
  std::vector<std::uint8_t> packed;

  std::size_t num_blocks() const noexcept { return params.size(); }
  std::size_t bytes_per_block() const noexcept;
  std::vector<std::uint8_t> block_codes(std::size_t block) const;
  void validate() const;

  bool operator==(const QuantizedTensor&) const = default;
};

// Quantizes a matrix block by block. `importance`, when non-empty, holds one
// weight per column (already including epsilon); empty means uniform.
// Blocks are independent and are spread over `workers` threads.
QuantizedTensor quantize_tensor(const Matrix& weights, std::span<const double> importance,
                                const QuantConfig& config, std::size_t workers = 1);

Matrix dequantize(const QuantizedTensor& tensor);

struct QuantReport {
  double weighted_mse = 0.0;
  double unweighted_mse = 0.0;
  double bits_per_weight = 0.0;
};

// Column importance is broadcast across rows. bits_per_weight counts two f32
// block parameters amortized over the block.
QuantReport quantization_report(const Matrix& original, const QuantizedTensor& tensor,
                                const ImportanceMatrix& importance, double epsilon = 1e-8);

// Binary formats (little-endian):
//   tensor:     "AQT1" u32 rows, u32 cols, u8 bits, u32 block_size, then per
//               block f32 scale, f32 min, packed code bytes
//   importance: "IMX1" u32 cols, u64 count, f64 sums[cols]
void write_quantized(const QuantizedTensor& tensor, std::ostream& out);
QuantizedTensor read_quantized(std::istream& in);
void write_importance(const ImportanceMatrix& matrix, std::ostream& out);
ImportanceMatrix read_importance(std::istream& in);

void save_quantized(const QuantizedTensor& tensor, const std::filesystem::path& path);
QuantizedTensor load_quantized(const std::filesystem::path& path);
void save_importance(const ImportanceMatrix& matrix, const std::filesystem::path& path);
ImportanceMatrix load_importance(const std::filesystem::path& path);

}  // namespace memescore
