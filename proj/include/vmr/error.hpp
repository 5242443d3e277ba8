#pragma once

#include <stdexcept>
#include <string>

namespace vmr {

// Base of every error raised by the library. The CLI maps the subclasses
// onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed manifest, inconsistent corpus, bad config.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller violated a function precondition (wrong shape, unsorted input).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Value outside the domain of a function (tag not in collection, OOV tag).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A file could not be read or parsed. `path()` names the offending file.
class LoadError : public Error {
 public:
  LoadError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace vmr
