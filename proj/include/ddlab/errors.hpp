#ifndef DDLAB_ERRORS_HPP
#define DDLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ddlab {

/// Input data is well-formed but unusable (wrong shape, non-finite, missing block).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required table block (logits, labels, head) is absent.
class MissingBlock : public DataError {
public:
    explicit MissingBlock(const std::string& block, const std::string& needed_by)
        : DataError("missing block '" + block + "' required by " + needed_by), block_(block) {}
    const std::string& block() const noexcept { return block_; }

private:
    std::string block_;
};

/// File does not follow the expected layout (bad magic, unknown version, ragged CSV).
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// Declared sizes disagree with the bytes actually present.
class CorruptFile : public DataError {
public:
    using DataError::DataError;
};

}  // namespace ddlab

#endif  // DDLAB_ERRORS_HPP
