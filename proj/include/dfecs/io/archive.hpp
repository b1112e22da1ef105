#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "dfecs/eval.hpp"
#include "dfecs/ffm.hpp"

namespace dfecs::io {

inline constexpr int kArchiveVersion = 1;

/// FNV-1a, 64 bit.
std::uint64_t checksum(std::string_view bytes);

/// Plain-text archive: a `dfecs-archive <version>` line, `key: value` header lines, then matrix blocks
///
///     matrix NAME rows cols
///     <rows lines of cols numbers>
///     checksum <16 hex digits of FNV-1a over the row lines>
///
/// and a closing `end`. Numbers use the shortest representation that parses back to the same double,
/// so a save/load round trip is bit-exact and identical models give identical bytes.
std::string serialize_model(const FullFaceModel& model);

/// Verifies block checksums, the layout tag and U' = U A. Throws ChecksumMismatch, VersionUnsupported,
/// SchemaError, ParseError or InconsistentModel.
FullFaceModel parse_model(std::string_view text);

void save_model(const FullFaceModel& model, const std::filesystem::path& path);
FullFaceModel load_model(const std::filesystem::path& path);

std::string serialize_au_matrix(const AuMatrix& aus);

/// Accepts an AU-matrix archive (block `AU`) or a model archive (block `U_PRIME`). Throws ShapeError
/// unless the matrix has 136 rows.
AuMatrix parse_au_matrix(std::string_view text, std::string_view source = "<memory>");

void save_au_matrix(const AuMatrix& aus, const std::filesystem::path& path);
AuMatrix load_external_au_matrix(const std::filesystem::path& path);

}  // namespace dfecs::io
