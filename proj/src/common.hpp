#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace slmrf {

// Error hierarchy. The C API maps each class onto a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: missing columns, bad cells, schema mismatches.
class InputError : public Error {
 public:
  using Error::Error;
};

// A covariance or normal-equation matrix could not be factorized.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// A model fit could not be completed.
class FitError : public Error {
 public:
  using Error::Error;
};

// Serialized model with an unknown schema tag or version.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Warnings go through a replaceable sink (stderr by default).
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

// Deterministic random source. Distribution helpers are implemented here
// rather than with <random> distributions so streams are identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

  std::uint64_t next() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  // Uniform integer on [0, bound).
  std::size_t index(std::size_t bound);
  double normal();
  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
// visited exactly once; callers write results by index so the outcome does
// not depend on scheduling. Exceptions are rethrown (lowest index wins).
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

// Worker cap used when an options struct leaves threads at 0.
int default_threads();
void set_default_threads(int threads);

}  // namespace slmrf
