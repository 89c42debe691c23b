#include "cascadelab/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>

#include "cascadelab/graph.hpp"

namespace cascadelab {

namespace {

// Decayed probabilities below this are treated as zero and the agent leaves
// the active set until its next exposure.
constexpr double kNegligible = 1e-12;

} // namespace

std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::network_identity:
        return "network+identity";
    case Variant::network_only:
        return "network-only";
    case Variant::identity_only:
        return "identity-only";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    if (s == "network+identity" || s == "network_identity" || s == "ni")
        return Variant::network_identity;
    if (s == "network-only" || s == "network_only" || s == "network")
        return Variant::network_only;
    if (s == "identity-only" || s == "identity_only" || s == "identity")
        return Variant::identity_only;
    throw ValidationError("unknown model variant '" + std::string(s) +
                          "' (expected network+identity, network-only or identity-only)");
}

void SimulationConfig::validate() const {
    if (!(stickiness >= 0.0 && stickiness <= 1.0))
        throw ValidationError("stickiness must lie in [0,1]");
    if (!(decay >= 0.0 && decay <= 1.0))
        throw ValidationError("decay must lie in [0,1]");
    if (novelty_cap < 1)
        throw ValidationError("novelty_cap must be at least 1");
    if (max_steps < 1)
        throw ValidationError("max_steps must be at least 1");
    if (stop_window < 1)
        throw ValidationError("stop_window must be at least 1");
    if (!(stop_growth >= 0.0))
        throw ValidationError("stop_growth must be non-negative");
    if (warmup < 0)
        throw ValidationError("warmup must be non-negative");
}

std::vector<NodeId> Cascade::adopters() const {
    std::vector<NodeId> out;
    std::vector<NodeId> seen;
    for (const auto& e : events)
        seen.push_back(e.agent);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    std::vector<char> done(seen.size(), 0);
    for (const auto& e : events) {
        const auto idx = static_cast<std::size_t>(
            std::lower_bound(seen.begin(), seen.end(), e.agent) - seen.begin());
        if (!done[idx]) {
            done[idx] = 1;
            out.push_back(e.agent);
        }
    }
    return out;
}

std::vector<double> Cascade::usage_curve() const {
    std::vector<double> curve(static_cast<std::size_t>(steps) + 1, 0.0);
    for (const auto& e : events)
        if (e.t <= steps)
            curve[e.t] += 1.0;
    return curve;
}

void Cascade::validate() const {
    for (std::size_t k = 1; k < events.size(); ++k)
        if (events[k].t < events[k - 1].t)
            throw ValidationError("cascade events must be sorted by timestep");
    for (const auto& e : events)
        if (e.t > steps)
            throw ValidationError("cascade event beyond the cascade's last step");
    for (NodeId s : seeds) {
        const bool at_zero = std::any_of(events.begin(), events.end(), [s](const UsageEvent& e) {
            return e.agent == s && e.t == 0;
        });
        if (!at_zero)
            throw ValidationError("every seed must use the hashtag at t=0");
    }
}

double novelty(std::uint64_t exposures, int cap) {
    if (cap < 1)
        throw ValidationError("novelty cap must be at least 1");
    const double clipped = static_cast<double>(std::min<std::uint64_t>(exposures, cap));
    return 0.5 * (std::cos(std::numbers::pi * clipped / cap) + 1.0);
}

HashtagCache HashtagCache::build(const Network& net, const IdentityMatrix& ids,
                                 const HashtagSpec& spec, Variant variant) {
    HashtagCache cache;
    const std::size_t n = net.node_count();
    if (variant != Variant::network_only) {
        if (ids.agents() != n)
            throw ValidationError("identity matrix rows do not match network size");
        cache.agent_delta = delta_agent_hashtag_all(ids, spec);
        cache.edge_delta = delta_edge_all(net, ids, spec.relevant_dims);
    }
    cache.in_strength.assign(n, 0.0);
    for (NodeId i = 0; i < n; ++i) {
        auto ws = net.in_weights(i);
        const std::size_t base = net.in_edge_begin(i);
        double s = 0.0;
        for (std::size_t k = 0; k < ws.size(); ++k)
            s += ws[k] * (cache.edge_delta.empty() ? 1.0 : cache.edge_delta[base + k]);
        cache.in_strength[i] = s;
    }
    return cache;
}

Cascade run_simulation(const Network& net, const HashtagCache& cache,
                       std::span<const NodeId> seeds, const SimulationConfig& cfg) {
    cfg.validate();
    const std::size_t n = net.node_count();
    if (seeds.empty())
        throw ValidationError("simulation needs at least one seed");
    if (cache.in_strength.size() != n)
        throw ValidationError("hashtag cache was built for a different network");

    Rng rng(cfg.rng_seed);
    std::vector<double> p(n, 0.0);
    std::vector<double> adopted_strength(n, 0.0);
    std::vector<std::uint32_t> exposures(n, 0);
    std::vector<std::uint32_t> exposed_at(n, 0);
    std::vector<std::uint32_t> exposure_hits(n, 0);
    std::vector<char> adopted(n, 0);
    std::vector<char> active_flag(n, 0);
    std::vector<NodeId> active, users_prev, users_now, exposed;

    auto adopt = [&](NodeId u) {
        adopted[u] = 1;
        auto nbrs = net.out_neighbors(u);
        auto pos = net.out_to_in(u);
        auto ws = net.out_weights(u);
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const double delta = cache.edge_delta.empty() ? 1.0 : cache.edge_delta[pos[k]];
            adopted_strength[nbrs[k]] += ws[k] * delta;
        }
    };

    Cascade out;
    for (NodeId s : seeds) {
        if (s >= n)
            throw ValidationError("seed outside the network");
        if (adopted[s])
            continue;
        out.seeds.push_back(s);
        out.events.push_back({s, 0});
        // A seed has already heard the hashtag once: it coined it.
        exposures[s] = 1;
        adopt(s);
        users_prev.push_back(s);
    }

    std::vector<std::size_t> cumulative{out.events.size()};
    const double s_h = cfg.stickiness;
    const double decay = cfg.decay;
    std::uint32_t t = 0;
    while (t < static_cast<std::uint32_t>(cfg.max_steps)) {
        ++t;
        exposed.clear();
        for (NodeId u : users_prev) {
            for (NodeId i : net.out_neighbors(u)) {
                if (exposed_at[i] != t) {
                    exposed_at[i] = t;
                    exposure_hits[i] = 0;
                    exposed.push_back(i);
                }
                ++exposure_hits[i];
            }
        }
        for (NodeId i : exposed) {
            const double frac =
                cache.in_strength[i] > 0.0 ? adopted_strength[i] / cache.in_strength[i] : 0.0;
            const double agent_delta = cache.agent_delta.empty() ? 1.0 : cache.agent_delta[i];
            p[i] = s_h * agent_delta * novelty(exposures[i], cfg.novelty_cap) * std::min(frac, 1.0);
            assert(p[i] >= 0.0 && p[i] <= 1.0);
            exposures[i] += cfg.exposure == ExposureCounting::per_step ? 1 : exposure_hits[i];
            if (!active_flag[i]) {
                active_flag[i] = 1;
                active.push_back(i);
            }
        }

        users_now.clear();
        std::size_t keep = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const NodeId i = active[a];
            if (exposed_at[i] != t) {
                p[i] *= decay;
                if (p[i] < kNegligible) {
                    p[i] = 0.0;
                    active_flag[i] = 0;
                    continue;
                }
            }
            active[keep++] = i;
            if (uniform01(rng) < p[i])
                users_now.push_back(i);
        }
        active.resize(keep);

        for (NodeId u : users_now) {
            out.events.push_back({u, t});
            if (!adopted[u])
                adopt(u);
        }
        cumulative.push_back(out.events.size());
        users_prev.swap(users_now);

        const auto window = static_cast<std::uint32_t>(cfg.stop_window);
        if (t >= static_cast<std::uint32_t>(cfg.warmup) && t >= window) {
            const double before = static_cast<double>(cumulative[t - window]);
            const double growth = static_cast<double>(cumulative[t]) - before;
            if (growth < cfg.stop_growth * before)
                break;
        }
    }
    out.steps = t;
    return out;
}

Cascade run_simulation(const Network& net, const IdentityMatrix& ids, const HashtagSpec& spec,
                       const SimulationConfig& cfg) {
    const auto cache = HashtagCache::build(net, ids, spec, cfg.variant);
    return run_simulation(net, cache, spec.seeds, cfg);
}

} // namespace cascadelab
