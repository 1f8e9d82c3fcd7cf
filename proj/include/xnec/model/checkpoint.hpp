#pragma once

#include <filesystem>

#include "xnec/model/necessity_model.hpp"

namespace xnec::model {

// Binary archive (little endian):
//   char[8] "XNECCKPT", uint32 version, uint32 n + n bytes of config JSON,
//   uint32 tensor count, then per tensor: uint32 n + name, uint32 rows,
//   uint32 cols, rows * cols float64 in column-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, NecessityModel& model);
// Throws Errc::version_mismatch for other archive versions and
// Errc::validation for truncated or inconsistent archives.
NecessityModel load_checkpoint(const std::filesystem::path& path);

}  // namespace xnec::model
