#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmt {

// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input bytes/text; carries the byte offset (or line number) of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EmptyScoreError : public Error {
 public:
  EmptyScoreError() : Error("score contains no notes") {}
};

// Token-grammar violation at a given sequence index.
class GrammarError : public Error {
 public:
  GrammarError(const std::string& what, std::size_t index)
      : Error("token " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmt
