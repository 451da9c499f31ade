#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "divrank/corpus.hpp"

namespace divrank {

// DRC1 corpus format: `<name>.manifest.jsonl` (header line, one line per
// query/image/descriptor, trailing {"crc32": ...}) plus `<name>.f32`, the
// 8 bytes "DRC1BLOB" followed by little-endian float32 rows.
inline constexpr int kCorpusFormatVersion = 1;

// Accepts either "<name>" or "<name>.manifest.jsonl".
std::string resolve_manifest_path(const std::string& path);

void save_corpus(const EmbeddingCorpus& corpus, const std::string& path);
EmbeddingCorpus load_corpus(const std::string& path);

std::uint32_t crc32_of(std::span<const unsigned char> bytes);

}  // namespace divrank
