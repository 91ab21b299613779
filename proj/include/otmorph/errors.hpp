#pragma once

#include <stdexcept>
#include <string>

namespace otmorph {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad caller input: unreadable files, malformed configs, shape mismatches.
class InputError : public Error {
public:
  explicit InputError(const std::string& what) : Error(what) {}
};

// The computation itself cannot proceed: infeasible problems, silent
// spectrograms, undefined divergences.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

}  // namespace otmorph
