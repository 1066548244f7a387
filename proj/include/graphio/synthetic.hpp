#pragma once

#include <cstdint>

#include "graphio/types.hpp"

namespace graphio {

struct SyntheticConfig {
    int n_classes = 5;
    int samples_per_class = 40;
    int channels = 2;
    int length = 400;  // L_total per record
};

// Desk-scale stand-in for the vibration benchmarks: each class is a family
// of harmonic signatures plus an amplitude-modulated impulse train and unit
// Gaussian noise. Bit-reproducible for a given seed.
Dataset generate_synthetic_dataset(const SyntheticConfig& cfg, std::uint64_t seed);

Dataset generate_synthetic_dataset(int n_classes, int samples_per_class, const PreprocessConfig& prep,
                                   std::uint64_t seed);

}  // namespace graphio
