#pragma once

#include <stdexcept>
#include <string>

namespace csireid {

/// Base of every error raised by the library. The category maps onto the
/// command-line exit status (config = 2, data = 3, numeric = 4).
class Error : public std::runtime_error {
 public:
  enum class Category { config, data, numeric };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  [[nodiscard]] Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Invalid parameters or configuration values.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

/// Malformed files, IO failures, or data that violates a shape contract.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

/// Non-finite values, degenerate normalizations, failed gradient checks.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Category::numeric, what) {}
};

}  // namespace csireid
