#pragma once

#include <stdexcept>
#include <string>

namespace spoafd {

/// Root of every error raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or argument lies outside its mathematical domain.
class invalid_parameter : public error {
 public:
  using error::error;
};

class mixed_family_error : public error {
 public:
  mixed_family_error() : error("kernel parameters come from different dictionaries") {}
  using error::error;
};

class degenerate_kernel_error : public error {
 public:
  using error::error;
};

/// Finite-difference stencil would leave the open parameter domain.
class step_underflow_error : public error {
 public:
  using error::error;
};

class dimension_mismatch_error : public error {
 public:
  using error::error;
};

class not_psd_error : public error {
 public:
  using error::error;
};

/// Candidate kernel is numerically inside the span of the current system.
class degenerate_candidate_error : public error {
 public:
  degenerate_candidate_error(const std::string& what, double denominator)
      : error(what), denominator_(denominator) {}
  double denominator() const noexcept { return denominator_; }

 private:
  double denominator_;
};

class all_degenerate_error : public error {
 public:
  using error::error;
};

class no_progress_error : public error {
 public:
  using error::error;
};

class singular_system_error : public error {
 public:
  using error::error;
};

/// Experiment configuration could not be parsed or validated.
class config_error : public error {
 public:
  using error::error;
};

}  // namespace spoafd
