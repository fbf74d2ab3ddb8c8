#pragma once
#include <stdexcept>

namespace pfn {

// shape mismatch between operands
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// invalid field value in a config or spec struct
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// precondition violated by a caller
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// malformed input file
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// non-finite values, failed factorizations, degenerate denominators
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotSpdError : NumericError {
  using NumericError::NumericError;
};

// network graph is not a rooted tree
struct TopologyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// iterative solver or training loop left the finite regime
struct DivergenceError : NumericError {
  using NumericError::NumericError;
};

}  // namespace pfn
