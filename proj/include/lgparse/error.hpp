#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lgparse {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error carrying a module-specific kind tag and an optional location
/// (byte offset for text parsers, 1-based line for TSV loaders, tree index
/// for treebank-level checks).
template <typename Kind>
class KindedError : public Error {
 public:
  KindedError(Kind kind, std::string what, std::size_t where = npos)
      : Error(std::move(what)), kind_(kind), where_(where) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t where() const noexcept { return where_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  Kind kind_;
  std::size_t where_;
};

}  // namespace lgparse
