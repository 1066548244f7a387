#include "graphio/synthetic.hpp"

#include <cmath>
#include <random>

namespace graphio {

using numkit::Tensor;

namespace {

constexpr double kTwoPi = 6.283185307179586;

struct ClassSignature {
    double base_freq;   // cycles per sample
    double h2, h3;      // harmonic amplitudes
    int impulse_period;
    double impulse_amp;
    double mod_rate;    // impulse envelope, cycles per window
};

ClassSignature signature(int c) {
    ClassSignature s;
    s.base_freq = 0.02 + 0.016 * c;
    s.h2 = (c % 2 == 0) ? 0.25 : 0.6;
    s.h3 = (c % 3 == 0) ? 0.45 : 0.15;
    s.impulse_period = 24 + 6 * c;
    s.impulse_amp = 1.6 + 0.2 * (c % 3);
    s.mod_rate = 1.0 + 0.5 * c;
    return s;
}

}  // namespace

Dataset generate_synthetic_dataset(const SyntheticConfig& cfg, std::uint64_t seed) {
    if (cfg.n_classes < 2) throw numkit::ConfigError("synthetic: need at least 2 classes");
    if (cfg.samples_per_class < 1 || cfg.channels < 1 || cfg.length < 8)
        throw numkit::ConfigError("synthetic: bad generator config");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uphase(0.0, kTwoPi);
    std::uniform_real_distribution<double> ujitter(-0.02, 0.02);
    std::uniform_real_distribution<double> ugain(0.85, 1.15);
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset data;
    data.reserve(static_cast<std::size_t>(cfg.n_classes) * cfg.samples_per_class);

    for (int c = 0; c < cfg.n_classes; ++c) {
        ClassSignature sig = signature(c);
        for (int r = 0; r < cfg.samples_per_class; ++r) {
            double phase = uphase(rng);
            double freq = sig.base_freq * (1.0 + ujitter(rng));
            double amp = 1.5 * ugain(rng);
            int impulse_offset = static_cast<int>(uphase(rng) / kTwoPi * sig.impulse_period);

            SignalRecord rec;
            rec.label = c;
            rec.channels = Tensor::zeros(cfg.channels, cfg.length);
            for (int ch = 0; ch < cfg.channels; ++ch) {
                double gain = ugain(rng);
                double ch_phase = phase + 0.35 * ch;
                for (int i = 0; i < cfg.length; ++i) {
                    double w = kTwoPi * freq * i + ch_phase;
                    double v = amp * (std::sin(w) + sig.h2 * std::sin(2.0 * w) + sig.h3 * std::sin(3.0 * w));
                    if ((i + impulse_offset) % sig.impulse_period == 0) {
                        double env = 1.0 + 0.5 * std::sin(kTwoPi * sig.mod_rate * i / cfg.length);
                        v += sig.impulse_amp * env;
                    }
                    rec.channels.at(ch, i) = gain * v + noise(rng);
                }
            }
            data.push_back(std::move(rec));
        }
    }
    return data;
}

Dataset generate_synthetic_dataset(int n_classes, int samples_per_class, const PreprocessConfig& prep,
                                   std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.n_classes = n_classes;
    cfg.samples_per_class = samples_per_class;
    cfg.length = prep.window_len;  // one window per record
    return generate_synthetic_dataset(cfg, seed);
}

}  // namespace graphio
