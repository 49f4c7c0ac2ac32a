#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cigan/core/errors.hpp"
#include "cigan/core/rng.hpp"
#include "cigan/data/patch.hpp"

namespace cigan {

// Real-data proportion schedule for mixed real/synthetic training. The
// default multiplicative reading grows the proportion by 20% every
// step_every iterations (0.5 at iteration 0, capped at 0.9); the additive
// reading (+20 percentage points) is available as a config alternative.
struct CurriculumSchedule {
    double base_real_fraction = 0.5;
    std::int64_t step_every = 1000;
    double growth = 1.2;
    double cap = 0.9;
    bool additive = false;
    double additive_step = 0.2;

    void validate() const {
        if (base_real_fraction < 0.0 || base_real_fraction > 1.0 || cap < 0.0 || cap > 1.0)
            throw ConfigError("curriculum: fractions must be in [0,1]");
        if (cap < base_real_fraction)
            throw ConfigError("curriculum: cap must be >= base_real_fraction");
        if (step_every < 1) throw ConfigError("curriculum: step_every must be >= 1");
        if (growth < 1.0) throw ConfigError("curriculum: growth must be >= 1");
        if (additive_step < 0.0) throw ConfigError("curriculum: additive_step must be >= 0");
    }
};

inline double real_fraction(std::int64_t iteration, const CurriculumSchedule& schedule) {
    if (iteration < 0) throw InvalidInputError("real_fraction: iteration must be >= 0");
    const double steps = std::floor(static_cast<double>(iteration) /
                                    static_cast<double>(schedule.step_every));
    const double f = schedule.additive
                         ? schedule.base_real_fraction + schedule.additive_step * steps
                         : schedule.base_real_fraction * std::pow(schedule.growth, steps);
    return std::min(schedule.cap, f);
}

struct CurriculumExample {
    const Patch* patch;
    bool real;
};

// Batch of round(batch_size * real_fraction) real examples, remainder
// synthetic; uniform with replacement, deterministic per (iteration, seed).
inline std::vector<CurriculumExample> curriculum_batch(const std::vector<Patch>& real_pool,
                                                       const std::vector<Patch>& synthetic_pool,
                                                       std::int64_t iteration, int batch_size,
                                                       const CurriculumSchedule& schedule,
                                                       std::uint64_t seed) {
    if (batch_size < 1) throw InvalidInputError("curriculum_batch: batch_size must be >= 1");
    const double f = real_fraction(iteration, schedule);
    const int n_real = static_cast<int>(std::lround(batch_size * f));
    const int n_syn = batch_size - n_real;
    if (n_real > 0 && real_pool.empty())
        throw ConfigError("curriculum_batch: real pool required but empty");
    if (n_syn > 0 && synthetic_pool.empty())
        throw ConfigError("curriculum_batch: synthetic pool required but empty");
    Rng rng(derive_seed(seed, "curriculum", static_cast<std::uint64_t>(iteration)));
    std::vector<CurriculumExample> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < n_real; ++i)
        batch.push_back({&real_pool[rng.uniform_int(real_pool.size())], true});
    for (int i = 0; i < n_syn; ++i)
        batch.push_back({&synthetic_pool[rng.uniform_int(synthetic_pool.size())], false});
    return batch;
}

} // namespace cigan
