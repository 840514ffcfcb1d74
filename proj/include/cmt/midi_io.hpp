#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cmt/score.hpp"

namespace cmt::midi {

inline constexpr int kWritePpqn = 480;
inline constexpr int kWriteVelocity = 80;
inline constexpr int kDrumChannel = 9;  // "channel 10" in 1-based MIDI numbering

// General MIDI program -> instrument category. Channel 10 is handled by the caller.
Instrument instrument_for_program(int program);

// Reads an SMF (format 0 or 1) and quantizes it to the 16-ticks-per-bar grid.
// Throws ParseError (with byte offset) on malformed data and EmptyScoreError when no
// note survives quantization.
QuantizedScore parse(std::span<const std::uint8_t> bytes);

// Format 1, 480 PPQN, one conductor track plus one track per populated instrument.
// Output depends only on the score, so it is byte-stable.
std::vector<std::uint8_t> write(const QuantizedScore& score);

QuantizedScore read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const QuantizedScore& score);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cmt::midi
