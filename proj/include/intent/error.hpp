#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace intent {

// stream-concatenating message builder used by throw sites
template <class... Parts>
std::string msg(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// malformed input files (annotations, configs, checkpoints)
struct ParseError : Error {
  using Error::Error;
};

// data that parses but breaks a domain invariant
struct ValidationError : Error {
  using Error::Error;
};

// bad run configuration (ratios, masks, learning-rate combinations, ...)
struct ConfigError : Error {
  using Error::Error;
};

// tensor dimension mismatches
struct ShapeError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// non-finite loss during training
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace intent
