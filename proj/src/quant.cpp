#include "memescore/quant.hpp"

#include <algorithm>
#include <cmath>

#include "memescore/bitpack.hpp"
#include "memescore/error.hpp"
#include "memescore/parallel.hpp"

namespace memescore {

void ImportanceMatrix::accumulate(std::span<const double> activation_row) {
  if (activation_row.size() != sums.size()) {
    throw DataError("activation row has " + std::to_string(activation_row.size()) + " entries, expected " +
                    std::to_string(sums.size()));
  }
  for (double a : activation_row) {
    if (!std::isfinite(a)) throw DataError("activation values must be finite");
  }
  for (std::size_t j = 0; j < sums.size(); ++j) sums[j] += activation_row[j] * activation_row[j];
  ++count;
}

void ImportanceMatrix::merge(const ImportanceMatrix& other) {
  if (other.sums.size() != sums.size()) throw DataError("cannot merge importance matrices of different widths");
  for (std::size_t j = 0; j < sums.size(); ++j) sums[j] += other.sums[j];
  count += other.count;
}

std::vector<double> ImportanceMatrix::weights(double epsilon) const {
  std::vector<double> w(sums.size(), epsilon);
  if (count == 0) return w;
  const double n = static_cast<double>(count);
  for (std::size_t j = 0; j < sums.size(); ++j) w[j] = sums[j] / n + epsilon;
  return w;
}

ImportanceMatrix accumulate_importance(ImportanceMatrix matrix, std::span<const double> activation_row) {
  matrix.accumulate(activation_row);
  return matrix;
}

void QuantConfig::validate() const {
  if (bits != 2 && bits != 3 && bits != 4 && bits != 8) throw DataError("bits must be one of 2, 3, 4, 8");
  if (block_size < 2) throw DataError("block_size must be at least 2");
  if (!(importance_epsilon > 0.0) || !std::isfinite(importance_epsilon)) {
    throw DataError("importance_epsilon must be positive");
  }
}

double weighted_block_error(std::span<const double> weights, std::span<const double> importance,
                            std::span<const std::uint8_t> codes, double scale, double min) {
  double e = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double r = weights[i] - (scale * codes[i] + min);
    e += importance[i] * r * r;
  }
  return e;
}

AffineParams fit_affine(std::span<const double> weights, std::span<const double> importance,
                        std::span<const std::uint8_t> codes) {
  double s0 = 0.0, sq = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    s0 += importance[i];
    sq += importance[i] * codes[i];
    sw += importance[i] * weights[i];
  }
  const double q_mean = sq / s0;
  const double w_mean = sw / s0;
  const bool all_equal = std::adjacent_find(codes.begin(), codes.end(), std::not_equal_to<>()) == codes.end();
  if (all_equal) return {0.0, w_mean};

  double cov = 0.0, var = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double dq = codes[i] - q_mean;
    cov += importance[i] * dq * (weights[i] - w_mean);
    var += importance[i] * dq * dq;
  }
  if (!(var > 0.0)) return {0.0, w_mean};
  const double scale = cov / var;
  return {scale, w_mean - scale * q_mean};
}

namespace {

void assign_codes(std::span<const double> weights, double scale, double min, unsigned max_code,
                  std::vector<std::uint8_t>& codes) {
  codes.resize(weights.size());
  if (scale == 0.0) {
    std::fill(codes.begin(), codes.end(), std::uint8_t{0});
    return;
  }
  const double hi = max_code;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // std::round rounds half away from zero.
    const double q = std::clamp(std::round((weights[i] - min) / scale), 0.0, hi);
    codes[i] = static_cast<std::uint8_t>(q);
  }
}

}  // namespace

BlockFit quantize_block(std::span<const double> weights, std::span<const double> importance,
                        const QuantConfig& config) {
  config.validate();
  if (weights.size() != importance.size()) throw DataError("block weights and importance differ in length");
  if (weights.empty()) throw DataError("empty block");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) throw DataError("block weights must be finite");
    if (!(importance[i] > 0.0) || !std::isfinite(importance[i])) {
      throw DataError("block importance must be positive and finite");
    }
  }

  BlockFit fit;
  const auto [lo_it, hi_it] = std::minmax_element(weights.begin(), weights.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) {
    fit.min = lo;
    fit.codes.assign(weights.size(), 0);
    fit.error_trace.push_back(0.0);
    return fit;
  }

  const unsigned max_code = config.max_code();
  std::vector<std::uint8_t> trial;
  double current = 0.0;
  for (unsigned span = max_code; span >= 1; --span) {
    const double scale = (hi - lo) / span;
    assign_codes(weights, scale, lo, max_code, trial);
    const double e = weighted_block_error(weights, importance, trial, scale, lo);
    if (span == max_code || e < current) {
      current = e;
      fit.scale = scale;
      fit.codes = trial;
    }
  }
  fit.min = lo;

  // The importance-blind fit is one more starting point, so weighting can
  // never end up worse than ignoring importance under the weighted error.
  const bool uniform = std::adjacent_find(importance.begin(), importance.end(), std::not_equal_to<>()) ==
                       importance.end();
  if (!uniform) {
    const std::vector<double> ones(weights.size(), 1.0);
    BlockFit blind = quantize_block(weights, ones, config);
    const double e = weighted_block_error(weights, importance, blind.codes, blind.scale, blind.min);
    if (e < current) {
      current = e;
      fit.scale = blind.scale;
      fit.min = blind.min;
      fit.codes = std::move(blind.codes);
    }
  }
  fit.error_trace.push_back(current);

  for (std::size_t round = 0; round < config.refine_iters; ++round) {
    bool changed = false;
    assign_codes(weights, fit.scale, fit.min, max_code, trial);
    if (trial != fit.codes) {
      const double e = weighted_block_error(weights, importance, trial, fit.scale, fit.min);
      if (e <= current) {
        fit.codes.swap(trial);
        current = e;
        changed = true;
      }
    }
    const AffineParams refit = fit_affine(weights, importance, fit.codes);
    if (refit.scale != fit.scale || refit.min != fit.min) {
      const double e = weighted_block_error(weights, importance, fit.codes, refit.scale, refit.min);
      if (e <= current) {
        fit.scale = refit.scale;
        fit.min = refit.min;
        current = e;
        changed = true;
      }
    }
    fit.error_trace.push_back(current);
    if (!changed) break;
  }
  return fit;
}

std::size_t QuantizedTensor::bytes_per_block() const noexcept { return packed_size(block_size, bits); }

std::vector<std::uint8_t> QuantizedTensor::block_codes(std::size_t block) const {
  const std::size_t stride = bytes_per_block();
  return unpack_codes(std::span(packed).subspan(block * stride, stride), bits, block_size);
}

void QuantizedTensor::validate() const {
  QuantConfig{bits, block_size, 0, 1e-8}.validate();
  if (cols % block_size != 0) throw DataError("block_size must divide the column count");
  const std::size_t blocks = static_cast<std::size_t>(rows) * cols / block_size;
  if (params.size() != blocks) throw DataError("block parameter count does not match tensor shape");
  if (packed.size() != blocks * bytes_per_block()) throw DataError("packed code size does not match tensor shape");
}

QuantizedTensor quantize_tensor(const Matrix& weights, std::span<const double> importance,
                                const QuantConfig& config, std::size_t workers) {
  config.validate();
  if (weights.data.size() != weights.rows * weights.cols) throw DataError("matrix data size mismatch");
  if (weights.cols % config.block_size != 0) {
    throw DataError("block_size " + std::to_string(config.block_size) + " does not divide row length " +
                    std::to_string(weights.cols));
  }
  if (!importance.empty() && importance.size() != weights.cols) {
    throw DataError("importance has " + std::to_string(importance.size()) + " columns, matrix has " +
                    std::to_string(weights.cols));
  }

  QuantizedTensor out;
  out.rows = static_cast<std::uint32_t>(weights.rows);
  out.cols = static_cast<std::uint32_t>(weights.cols);
  out.bits = config.bits;
  out.block_size = static_cast<std::uint32_t>(config.block_size);
  const std::size_t per_row = weights.cols / config.block_size;
  const std::size_t blocks = weights.rows * per_row;
  const std::size_t stride = out.bytes_per_block();
  out.params.resize(blocks);
  out.packed.resize(blocks * stride);
  const std::vector<double> uniform(config.block_size, 1.0);

  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t row = b / per_row;
    const std::size_t col0 = (b % per_row) * config.block_size;
    const auto block = weights.row(row).subspan(col0, config.block_size);
    const auto block_importance =
        importance.empty() ? std::span<const double>(uniform) : importance.subspan(col0, config.block_size);
    const BlockFit fit = quantize_block(block, block_importance, config);
    out.params[b] = {static_cast<float>(fit.scale), static_cast<float>(fit.min)};
    pack_codes_into(fit.codes, config.bits, std::span(out.packed).subspan(b * stride, stride));
  });
  return out;
}

Matrix dequantize(const QuantizedTensor& tensor) {
  tensor.validate();
  Matrix out(tensor.rows, tensor.cols);
  for (std::size_t b = 0; b < tensor.num_blocks(); ++b) {
    const std::vector<std::uint8_t> codes = tensor.block_codes(b);
    const double scale = tensor.params[b].scale;
    const double min = tensor.params[b].min;
    double* dst = out.data.data() + b * tensor.block_size;
    for (std::size_t i = 0; i < codes.size(); ++i) dst[i] = scale * codes[i] + min;
  }
  return out;
}

QuantReport quantization_report(const Matrix& original, const QuantizedTensor& tensor,
                                const ImportanceMatrix& importance, double epsilon) {
  if (original.rows != tensor.rows || original.cols != tensor.cols) {
    throw DataError("original matrix and quantized tensor differ in shape");
  }
  if (importance.cols() != original.cols) throw DataError("importance width does not match matrix columns");
  const Matrix restored = dequantize(tensor);
  const std::vector<double> m = importance.weights(epsilon);

  double weighted = 0.0, weight_total = 0.0, plain = 0.0;
  for (std::size_t r = 0; r < original.rows; ++r) {
    for (std::size_t c = 0; c < original.cols; ++c) {
      const double d = original(r, c) - restored(r, c);
      weighted += m[c] * d * d;
      weight_total += m[c];
      plain += d * d;
    }
  }
  QuantReport report;
  const double n = static_cast<double>(original.rows * original.cols);
  report.weighted_mse = weight_total > 0.0 ? weighted / weight_total : 0.0;
  report.unweighted_mse = n > 0.0 ? plain / n : 0.0;
  report.bits_per_weight = tensor.bits + (2.0 * 32.0) / tensor.block_size;
  return report;
}

}  // namespace memescore
