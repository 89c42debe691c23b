#include "cascadelab/calibrate.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include "cascadelab/graph.hpp"
#include "cascadelab/parallel.hpp"
#include "cascadelab/textio.hpp"

namespace cascadelab {

double size_objective(std::size_t sim_uses, std::size_t empirical_size, double sample_rate) {
    return std::abs(std::log10(static_cast<double>(sim_uses) * sample_rate /
                               static_cast<double>(empirical_size)));
}

CalibrationResult fit_stickiness(const Network& net, const HashtagCache& cache,
                                 const HashtagSpec& spec, const SimulationConfig& base_cfg,
                                 std::uint64_t rng_seed, unsigned jobs) {
    if (spec.empirical_size == 0)
        throw ValidationError("calibration needs a positive empirical cascade size");
    if (!(spec.sample_rate > 0.0 && spec.sample_rate <= 1.0))
        throw ValidationError("sample_rate must lie in (0,1]");

    CalibrationResult result;
    // Keyed by stickiness in hundredths.
    std::map<int, CalibrationPoint> done;
    std::size_t seed_events = 0;

    auto evaluate = [&](const std::vector<int>& grid) {
        std::vector<int> todo;
        for (int h : grid)
            if (!done.count(h))
                todo.push_back(h);
        std::vector<CalibrationPoint> points(todo.size());
        std::vector<std::size_t> seed_counts(todo.size());
        parallel_for(todo.size(), jobs, [&](std::size_t k) {
            SimulationConfig cfg = base_cfg;
            cfg.stickiness = todo[k] / 100.0;
            cfg.rng_seed = derive_seed(rng_seed, todo[k]);
            const Cascade c = run_simulation(net, cache, spec.seeds, cfg);
            points[k] = {cfg.stickiness, c.uses(),
                         size_objective(c.uses(), spec.empirical_size, spec.sample_rate)};
            seed_counts[k] = c.seeds.size();
        });
        for (std::size_t k = 0; k < todo.size(); ++k) {
            done.emplace(todo[k], points[k]);
            result.trace.push_back(points[k]);
            seed_events = seed_counts[k];
        }
        result.evaluations += todo.size();
    };
    // Smallest objective over evaluated points; ties keep the smaller value.
    auto best_of = [&](int lo, int hi) {
        int best = lo;
        for (int h = lo; h <= hi; h += 1)
            if (done.count(h) && done.at(h).objective < done.at(best).objective)
                best = h;
        return best;
    };

    std::vector<int> coarse;
    for (int h = 10; h <= 100; h += 10)
        coarse.push_back(h);
    evaluate(coarse);

    bool all_seed_only = true;
    for (int h : coarse)
        all_seed_only = all_seed_only && done.at(h).sim_uses <= seed_events;
    if (all_seed_only) {
        result.degenerate = true;
        result.boundary = true;
        result.stickiness = 0.1;
        result.objective = done.at(10).objective;
        result.coarse_interval = {0.1, 0.2};
        return result;
    }

    const int c = best_of(10, 100);
    int lo = c, hi = c;
    if (c == 10) {
        hi = 20;
    } else if (c == 100) {
        lo = 90;
    } else if (done.at(c - 10).objective <= done.at(c + 10).objective) {
        lo = c - 10;
    } else {
        hi = c + 10;
    }
    result.coarse_interval = {lo / 100.0, hi / 100.0};

    std::vector<int> fine;
    for (int h = lo; h <= hi; ++h)
        fine.push_back(h);
    evaluate(fine);

    const int best = best_of(lo, hi);
    result.stickiness = best / 100.0;
    result.objective = done.at(best).objective;
    result.boundary = best == 10 || best == 100;
    return result;
}

CalibrationResult fit_stickiness(const Network& net, const IdentityMatrix& ids,
                                 const HashtagSpec& spec, const SimulationConfig& base_cfg,
                                 std::uint64_t rng_seed, unsigned jobs) {
    const auto cache = HashtagCache::build(net, ids, spec, base_cfg.variant);
    return fit_stickiness(net, cache, spec, base_cfg, rng_seed, jobs);
}

void write_calibration_trace(std::ostream& out, const CalibrationResult& result) {
    out << "s_h,sim_uses,objective\n";
    for (const auto& p : result.trace)
        out << format_double(p.stickiness) << ',' << p.sim_uses << ','
            << format_double(p.objective) << '\n';
}

} // namespace cascadelab
