#pragma once

#include <cstdint>
#include <random>

namespace coordiff {

// Stream tags for per-(run, agent) substreams.  Data and masks draw from
// separate generators so that disabling the masking (r = 0) leaves the data
// stream untouched and the trajectory bit-identical to a full-gradient run.
enum class StreamTag : std::uint32_t {
  data = 0,
  mask = 1,
  scenario = 2,
  calibration = 3,
};

// Counter-based substream derivation: the generator state is a pure function
// of (master seed, run index, agent index, tag).
inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t run,
                                   std::uint32_t agent, StreamTag tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(run),
                    static_cast<std::uint32_t>(run >> 32), agent,
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

}  // namespace coordiff
