#pragma once

// .scsq sequence container. Little-endian:
//   "SCSQ" | version u8 = 1 | count u32 | frames u32 | height u32 | width u32 |
//   channels u32 = 1 | count*frames*height*width u8 pixels

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/datasets/sample.hpp"

namespace nowcast::datasets {

inline constexpr std::size_t kContainerHeaderBytes = 25;

std::vector<std::uint8_t> encode_container(const Dataset& samples);
Dataset decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const Dataset& samples, const std::string& path);
Dataset read_container(const std::string& path);

// Seeded shuffle, then the first round(fraction * n) samples go to train.
struct Split {
  Dataset train;
  Dataset test;
};
Split split(const Dataset& samples, double train_fraction, std::uint64_t seed);

}  // namespace nowcast::datasets
