#pragma once

#include <cstdint>
#include <span>

namespace podi {

/// IEEE CRC-32 (the zlib/PNG polynomial).
std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

}  // namespace podi
