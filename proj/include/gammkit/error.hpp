#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gammkit {

// User or data problem: bad input file, bad formula, bad option. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure while fitting (rank deficiency, degenerate fit). CLI exit code 3.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found);

    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }
    [[nodiscard]] const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::vector<std::string> expected_;
};

}  // namespace gammkit
