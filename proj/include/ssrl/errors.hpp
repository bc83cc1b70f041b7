#pragma once

#include <stdexcept>
#include <string>

namespace ssrl {

// Error taxonomy mirrors the CLI exit codes: ConfigError -> 2, DataError -> 3,
// InternalError -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Broken internal invariant: a bug, not a user error.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

// A query for which no supervised labels can be generated (empty answer set,
// or no answer reachable within the depth bound). Callers skip the query and
// count it for coverage reporting.
struct UnlabelableQuery : DataError {
    using DataError::DataError;
};

}  // namespace ssrl
