#pragma once

#include <stdexcept>
#include <string>

#include "attnshort/transformer.hpp"

namespace attnshort {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionMismatchError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct TruncatedFileError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct ShapeMismatchError : CheckpointError {
    using CheckpointError::CheckpointError;
};

/// Binary format: magic "ATSH", u32 version, config JSON, then every named
/// tensor in registration order with its shape and float32 data. Loading
/// rebuilds the model from the embedded config and verifies each tensor.
void save_checkpoint(const Transformer<float>& model, const std::string& path);
Transformer<float> load_checkpoint(const std::string& path);

}  // namespace attnshort
