#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "cascadelab/engine.hpp"

namespace cascadelab {

struct CalibrationPoint {
    double stickiness;
    std::size_t sim_uses;
    double objective;
};

struct CalibrationResult {
    double stickiness = 0.1;
    // |log10(sim_uses * sample_rate / empirical_size)| at the chosen value.
    double objective = 0.0;
    std::pair<double, double> coarse_interval{0.1, 0.2};
    std::size_t evaluations = 0;
    // Every coarse run stayed at the seed events.
    bool degenerate = false;
    // The fit landed on an end of [0.1, 1].
    bool boundary = false;
    // Every evaluated point in evaluation order (coarse pass first).
    std::vector<CalibrationPoint> trace;
};

double size_objective(std::size_t sim_uses, std::size_t empirical_size, double sample_rate);

/// Nested grid search for stickiness: one run per value on {0.1,...,1.0},
/// then step 0.01 across the best width-0.1 interval. Each grid value has its
/// own derived seed, so a value shared by both passes is evaluated once.
/// Ties go to the smaller stickiness.
CalibrationResult fit_stickiness(const Network& net, const HashtagCache& cache,
                                 const HashtagSpec& spec, const SimulationConfig& base_cfg,
                                 std::uint64_t rng_seed, unsigned jobs = 1);

CalibrationResult fit_stickiness(const Network& net, const IdentityMatrix& ids,
                                 const HashtagSpec& spec, const SimulationConfig& base_cfg,
                                 std::uint64_t rng_seed, unsigned jobs = 1);

// `s_h,sim_uses,objective` rows.
void write_calibration_trace(std::ostream& out, const CalibrationResult& result);

} // namespace cascadelab
