#pragma once

#include <stdexcept>
#include <string>

namespace memescore {

// Malformed or invalid input data: bad records, bad files, violated
// preconditions on caller-supplied values. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage failed while scoring one sample.
class StageError : public DataError {
 public:
  StageError(std::string stage, const std::string& what)
      : DataError(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace memescore
