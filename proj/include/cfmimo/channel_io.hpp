#pragma once

#include <filesystem>
#include <string>

#include "cfmimo/network.hpp"

namespace cfmimo {

/// Binary channel file, all integers u32 and all reals IEEE-754 binary64,
/// little-endian:
///
///   "CFCH"  version  I  K
///   for i in 0..I-1, k in 0..K-1:  N_k  M_i  then N_k*M_i (re, im) pairs, row-major
///   sigma_k^2 for k in 0..K-1       (all zero when noise is unset)
///   for k in 0..K-1:  |I_k|  then the AP indices of I_k
inline constexpr std::uint32_t kChannelFileVersion = 1;

std::string encode_channels(const ChannelSet& channels);
/// Throws FormatError on bad magic, unknown version, truncation, trailing
/// bytes, inconsistent or oversized dimensions.
ChannelSet decode_channels(const std::string& bytes);

void dump_channels(const ChannelSet& channels, const std::filesystem::path& path);
ChannelSet load_channels(const std::filesystem::path& path);

}  // namespace cfmimo
