#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace causalfair {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input files, schema violations, unknown columns.
class DataError : public Error {
public:
    using Error::Error;
};

/// Rejected graph edit. `cycle` holds the witness path when the edit
/// would have closed a directed cycle.
class EditError : public Error {
public:
    explicit EditError(const std::string& what, std::vector<std::string> cycle = {})
        : Error(what), cycle_(std::move(cycle)) {}

    const std::vector<std::string>& cycle() const noexcept { return cycle_; }

private:
    std::vector<std::string> cycle_;
};

/// Operation not allowed in the current pipeline stage.
class StageError : public Error {
public:
    using Error::Error;
};

}  // namespace causalfair
