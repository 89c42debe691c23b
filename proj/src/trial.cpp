#include <algorithm>
#include <cmath>

#include "cascadelab/experiment.hpp"
#include "cascadelab/parallel.hpp"

namespace cascadelab {

TrialResult run_trial(const TrialInputs& inputs, const EmpiricalHashtag& hashtag,
                      const TrialConfig& cfg) {
    if (inputs.world == nullptr)
        throw ValidationError("trial has no world");
    if (cfg.runs < 1)
        throw ValidationError("a trial needs at least one run per model");
    const World& world = *inputs.world;
    HashtagSpec spec = hashtag.spec;
    if (spec.seeds.empty())
        spec.seeds = hashtag.cascade.seeds;
    if (spec.empirical_size == 0)
        spec.empirical_size = hashtag.cascade.uses();
    if (hashtag.cascade.events.empty())
        throw ValidationError("hashtag '" + spec.tag + "' has an empty empirical cascade");

    std::vector<NodePositionFeatures> owned;
    const auto* positions = inputs.positions;
    if (positions == nullptr) {
        owned = node_position_features(world.net, 0.85, 1e-10, cfg.master_seed);
        positions = &owned;
    }

    TrialResult result;
    result.hashtag = spec.tag;
    for (Variant v : cfg.models) {
        ModelOutcome outcome;
        outcome.variant = v;
        const std::string model(to_string(v));
        try {
            Network rewired;
            const Network* graph = &world.net;
            if (v == Variant::identity_only) {
                rewired = rewire_configuration_model(world.net,
                                                     derive_seed(cfg.master_seed, spec.tag, "rewire"));
                graph = &rewired;
            }
            const auto cache = HashtagCache::build(*graph, world.ids, spec, v);
            SimulationConfig sim = cfg.sim;
            sim.variant = v;
            outcome.calibration = fit_stickiness(*graph, cache, spec, sim,
                                                 derive_seed(cfg.master_seed, spec.tag, model, "calibrate"),
                                                 cfg.jobs);
            sim.stickiness = outcome.calibration.stickiness;

            outcome.runs.resize(cfg.runs);
            outcome.metrics.resize(cfg.runs);
            parallel_for(cfg.runs, cfg.jobs, [&](std::size_t r) {
                SimulationConfig run_cfg = sim;
                run_cfg.rng_seed = derive_seed(cfg.master_seed, spec.tag, model, "run", r);
                outcome.runs[r] = run_simulation(*graph, cache, spec.seeds, run_cfg);

                MetricContext ctx;
                ctx.net = &world.net;
                ctx.ids = &world.ids;
                ctx.regions = world.regions.region_count() > 0 ? &world.regions : nullptr;
                ctx.positions = positions;
                ctx.regressor = inputs.regressor;
                ctx.seeds = spec.seeds;
                ctx.sample_rate = spec.sample_rate;
                ctx.rng_seed = derive_seed(cfg.master_seed, spec.tag, model, "metrics", r);
                ctx.growth_width = cfg.growth_width;
                ctx.kl_bins = cfg.kl_bins;
                ctx.region_alpha = cfg.region_alpha;
                ctx.stop_window = cfg.sim.stop_window;
                ctx.stop_growth = cfg.sim.stop_growth;
                ctx.warmup = cfg.sim.warmup;
                outcome.metrics[r] = compute_metrics(outcome.runs[r], hashtag.cascade, ctx);
            });
        } catch (const ValidationError& e) {
            outcome = ModelOutcome{};
            outcome.variant = v;
            outcome.error = e.what();
        } catch (const RuntimeFailure& e) {
            outcome = ModelOutcome{};
            outcome.variant = v;
            outcome.error = e.what();
        }
        result.models.push_back(std::move(outcome));
    }
    return result;
}

std::vector<TrialResult> run_experiment(const TrialInputs& inputs,
                                        std::span<const EmpiricalHashtag> hashtags,
                                        const TrialConfig& cfg) {
    if (inputs.world == nullptr)
        throw ValidationError("experiment has no world");
    std::vector<NodePositionFeatures> owned;
    TrialInputs shared = inputs;
    if (shared.positions == nullptr) {
        owned = node_position_features(inputs.world->net, 0.85, 1e-10, cfg.master_seed);
        shared.positions = &owned;
    }
    std::vector<TrialResult> results(hashtags.size());
    // Parallelise across trials when there are enough of them, otherwise
    // inside each trial; derived seeds make both schedules give the same output.
    const bool outer = hashtags.size() >= std::max(1u, cfg.jobs);
    TrialConfig inner = cfg;
    if (outer)
        inner.jobs = 1;
    parallel_for(hashtags.size(), outer ? cfg.jobs : 1,
                 [&](std::size_t h) { results[h] = run_trial(shared, hashtags[h], inner); });
    return results;
}

std::vector<MetricRecord> metric_records(std::span<const TrialResult> trials) {
    std::vector<MetricRecord> out;
    for (const auto& trial : trials)
        for (const auto& m : trial.models) {
            if (m.error)
                continue;
            for (std::size_t r = 0; r < m.metrics.size(); ++r)
                out.push_back({trial.hashtag, std::string(to_string(m.variant)), r, m.metrics[r]});
        }
    return out;
}

std::unique_ptr<SizeRegressor> train_size_regressor(const World& world,
                                                    std::span<const EmpiricalHashtag> hashtags,
                                                    const TrialConfig& cfg, std::size_t augment,
                                                    MlpOptions options) {
    FeatureRows x;
    std::vector<double> y;
    double rate = 0.0;
    for (const auto& h : hashtags) {
        x.push_back(growth_features(world.net, world.ids, h.cascade, cfg.growth_width));
        y.push_back(static_cast<double>(h.cascade.uses()));
        rate += h.spec.sample_rate;
    }
    rate = hashtags.empty() ? 1.0 : rate / static_cast<double>(hashtags.size());

    const auto net_cache = HashtagCache::build(world.net, world.ids, HashtagSpec{}, Variant::network_only);
    for (std::size_t a = 0; a < augment; ++a) {
        Rng rng(derive_seed(cfg.master_seed, "augment", a));
        std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(world.net.node_count() - 1));
        const auto seeds = bfs_seeds(world.net, pick(rng), 10);
        SimulationConfig sim = cfg.sim;
        sim.variant = Variant::network_only;
        sim.stickiness = 0.1 + 0.9 * uniform01(rng);
        sim.rng_seed = rng();
        Cascade c = run_simulation(world.net, net_cache, seeds, sim);
        const auto keep = static_cast<std::size_t>(
            std::max(1.0, std::round(static_cast<double>(c.uses()) * rate)));
        c = downsample(c, keep, rng());
        x.push_back(growth_features(world.net, world.ids, c, cfg.growth_width));
        y.push_back(static_cast<double>(c.uses()));
    }
    if (x.empty())
        throw ValidationError("no cascades to train the growth regressor on");
    options.seed = derive_seed(cfg.master_seed, "regressor");
    auto model = std::make_unique<MlpRegressor>(options);
    model->fit(x, y);
    return model;
}

} // namespace cascadelab
