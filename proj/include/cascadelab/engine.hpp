#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadelab/common.hpp"
#include "cascadelab/identity.hpp"

namespace cascadelab {

class Network;

enum class Variant { network_identity, network_only, identity_only };

std::string_view to_string(Variant v);
// Accepts "network+identity", "network-only", "identity-only" (and the
// underscore spellings). Throws ValidationError otherwise.
Variant parse_variant(std::string_view s);
inline constexpr Variant kAllVariants[] = {Variant::network_identity, Variant::network_only,
                                           Variant::identity_only};

enum class ExposureCounting {
    // n grows by one per step in which any in-neighbour used the hashtag.
    per_step,
    // n grows by the number of in-neighbours that used it.
    per_neighbor,
};

struct SimulationConfig {
    double stickiness = 0.5;
    double decay = 0.9;
    int novelty_cap = 20;
    Variant variant = Variant::network_identity;
    int max_steps = 1000;
    int stop_window = 10;
    double stop_growth = 0.01;
    int warmup = 100;
    std::uint64_t rng_seed = 0;
    ExposureCounting exposure = ExposureCounting::per_step;

    // Throws ValidationError on out-of-range fields.
    void validate() const;
};

struct UsageEvent {
    NodeId agent;
    std::uint32_t t;

    friend bool operator==(const UsageEvent&, const UsageEvent&) = default;
};

/// Time-ordered usage events of one hashtag; seeds use it at t = 0.
struct Cascade {
    std::vector<NodeId> seeds;
    std::vector<UsageEvent> events;
    // Last timestep covered by the cascade (a run that halts at t has steps t).
    std::uint32_t steps = 0;

    std::size_t uses() const { return events.size(); }
    // Distinct agents in order of first use.
    std::vector<NodeId> adopters() const;
    // Usage count per timestep 0..steps.
    std::vector<double> usage_curve() const;
    // Throws ValidationError if events are unsorted or seeds are not at t=0.
    void validate() const;

    friend bool operator==(const Cascade&, const Cascade&) = default;
};

/// Novelty multiplier: 1 before any exposure, 0 after `cap` exposures.
double novelty(std::uint64_t exposures, int cap);

/// Per-hashtag similarity caches shared read-only by every run on the same
/// (network, hashtag, variant).
struct HashtagCache {
    // delta_ih per agent; empty means identically 1.
    std::vector<double> agent_delta;
    // delta per in-edge position; empty means identically 1.
    std::vector<double> edge_delta;
    // Sum over in-edges of w * delta.
    std::vector<double> in_strength;

    static HashtagCache build(const Network& net, const IdentityMatrix& ids,
                              const HashtagSpec& spec, Variant variant);
};

/// One stochastic run of the usage-based threshold dynamics.
///
/// For the identity-only variant `net` must already be the rewired graph the
/// cache was built on. Deterministic given cfg.rng_seed.
Cascade run_simulation(const Network& net, const HashtagCache& cache,
                       std::span<const NodeId> seeds, const SimulationConfig& cfg);

Cascade run_simulation(const Network& net, const IdentityMatrix& ids, const HashtagSpec& spec,
                       const SimulationConfig& cfg);

} // namespace cascadelab
