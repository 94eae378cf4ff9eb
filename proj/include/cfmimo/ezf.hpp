#pragma once

#include "cfmimo/network.hpp"
#include "cfmimo/types.hpp"

namespace cfmimo {

/// Local eigen-zero-forcing.  Each AP uses only the channels of the UEs it
/// serves: the first D_{i,k} right singular vectors of every H_{i,k} form the
/// effective channel Vbar_i, and P_i = pinv(Vbar_i^H) scaled to exactly
/// P_max,i in Frobenius norm.
///
/// Right singular vectors are phase-fixed so that their first nonzero entry
/// is real and positive.  Throws std::invalid_argument when an AP is asked
/// for more streams than it has antennas or a link for more streams than
/// its rank allows, and NumericError when Vbar_i is numerically rank
/// deficient.
Beamformer ezf_beamformer(const ChannelSet& channels, const StreamCounts& streams,
                          const SystemParams& params);

/// The same precoder written as X_{i,k} over the all-UE stack Hbar_i, so that
/// expand(ezf_lowdim(...)) reproduces ezf_beamformer.  Rows of UEs that AP i
/// does not serve are zero.
LowDimBeamformer ezf_lowdim(const ChannelSet& channels, const StreamCounts& streams,
                            const SystemParams& params);

}  // namespace cfmimo
