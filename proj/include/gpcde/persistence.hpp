#pragma once

// Binary model files.
//
// Layout (little-endian):
//   "GPCDE"            5-byte magic
//   u32 version
//   u32 crc32 of everything that follows
//   u32 length, bytes  model configuration as JSON
//   u32 length, bytes  column spec as JSON ({"inputs", "outputs", "periodic"})
//   u64 num_data
//   u32 count, then per array:
//     u32 length, bytes  name
//     u64 rows, u64 cols
//     rows*cols f64       column-major values
//
// Parameters are stored as "param/<name>" with their unconstrained values.
// The training curve is "curve" (iteration, elbo, wall_ms) and the
// standardization statistics "std/x_mean", "std/x_std", "std/y_mean", "std/y_std".

#include "gpcde/data.hpp"
#include "gpcde/trainer.hpp"

#include <cstdint>
#include <string>

namespace gpcde {

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct SavedModel {
  TrainedModel trained;
  Standardizer standardizer;
  /// How raw CSV columns map to model inputs and outputs.
  ColumnSpec columns;
};

/// An identity standardizer (zero mean, unit scale) for the given widths.
Standardizer identity_standardizer(Eigen::Index dx, Eigen::Index dy);

/// Written to a temporary file and renamed into place.
void save_model(const std::string& path, const SavedModel& model);

/// Throws IoError, FormatError (bad magic, truncation, inconsistent arrays),
/// VersionError or ChecksumError.
SavedModel load_model(const std::string& path);

std::string serialize_model(const SavedModel& model);
SavedModel deserialize_model(const std::string& bytes);

}  // namespace gpcde
