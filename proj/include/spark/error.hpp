#pragma once

#include <stdexcept>
#include <string>

namespace spark {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

/// Malformed record in a persisted log; `line` is 1-based.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class SinkError : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  OutOfBounds(std::size_t offset, std::size_t delete_count, std::size_t length)
      : Error("edit out of bounds: offset=" + std::to_string(offset) +
              " delete_count=" + std::to_string(delete_count) +
              " length=" + std::to_string(length)),
        offset_(offset),
        delete_count_(delete_count),
        length_(length) {}
  std::size_t offset() const noexcept { return offset_; }
  std::size_t delete_count() const noexcept { return delete_count_; }
  std::size_t length() const noexcept { return length_; }

 private:
  std::size_t offset_;
  std::size_t delete_count_;
  std::size_t length_;
};

class SelectorError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

class KeyNotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace spark
