#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascadelab/engine.hpp"
#include "cascadelab/graph.hpp"
#include "cascadelab/identity.hpp"
#include "cascadelab/metrics.hpp"

namespace cascadelab {

struct SynthWorldParams {
    std::size_t blocks = 20;
    std::size_t nodes_per_block = 100;
    double intra_p = 0.08;
    double inter_p = 0.002;
    // 0 draws every pair with the pooled mean probability; 1 uses the block
    // probabilities as given.
    double homophily = 0.8;
    // Dirichlet concentration around each block's base identity; infinity
    // copies the base vector to every member.
    double identity_concentration = 20.0;
    std::size_t region_rows = 4;
    std::size_t region_cols = 5;
    // Registers per identity category.
    std::vector<std::size_t> category_sizes{4, 3};
    // Tie weights are integers drawn uniformly from [1, max_weight], per direction.
    int max_weight = 5;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

struct World {
    Network net;
    IdentityMatrix ids;
    RegionMap regions;
    // Generating block per node; empty for worlds loaded from disk.
    std::vector<std::uint32_t> block_of;
    std::vector<std::string> warnings;
};

World generate_world(const SynthWorldParams& params);

/// `start` followed by its breadth-first neighbourhood, up to `count` nodes.
std::vector<NodeId> bfs_seeds(const Network& net, NodeId start, std::size_t count);

struct PlantedCascade {
    Cascade cascade;
    HashtagSpec spec;
    Variant variant = Variant::network_identity;
    double stickiness = 0.0;
};

/// Runs the engine under a known mechanism. The hashtag identity is inferred
/// from the seeds; the identity-only variant runs on a rewiring of the world
/// graph drawn from cfg.rng_seed.
PlantedCascade plant_cascade(const World& world, std::vector<NodeId> seeds, Variant variant,
                             double stickiness, SimulationConfig cfg, const std::string& tag = "h");

// ---------------------------------------------------------------------------
// Cascade files: a header line {"seeds":[...],"steps":N,...} followed by one
// {"agent":"id","t":k} line per usage event.

struct CascadeFile {
    Cascade cascade;
    // Remaining header fields, serialized JSON values keyed by name.
    std::map<std::string, std::string> labels;
};

void write_cascade_jsonl(std::ostream& out, const Cascade& cascade, const Network& net,
                         const std::map<std::string, std::string>& labels = {});
CascadeFile read_cascade_jsonl(std::istream& in, const Network& net);

// ---------------------------------------------------------------------------
// World directories

inline constexpr const char* kWorldFiles[] = {"edges.tsv",      "node_map.tsv",
                                              "schema.csv",     "identity.csv",
                                              "regions.csv",    "region_adjacency.csv"};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Writes every component file plus world_manifest.json with their hashes.
void save_world(const std::filesystem::path& dir, const World& world,
                const std::string& generator_note = "");
/// Loads a world directory, rejecting files whose hash differs from the manifest.
World load_world(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// INI configuration: `section.key` -> value.

class IniConfig {
public:
    IniConfig() = default;
    static IniConfig parse(std::istream& in);
    static IniConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// [world] section.
SynthWorldParams world_params_from_ini(const IniConfig& ini);
// [simulation] section over the given defaults.
SimulationConfig simulation_config_from_ini(const IniConfig& ini, SimulationConfig base = {});

} // namespace cascadelab
