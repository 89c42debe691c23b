#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cascadelab/common.hpp"

namespace cascadelab {

struct Edge {
    NodeId src;
    NodeId dst;
    double weight;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed, weighted social graph in which every tie is reciprocated.
///
/// Immutable after construction. Adjacency is stored twice in CSR form (by
/// source and by destination) with neighbour lists sorted by node index, so
/// both exposure (in-edges) and broadcast (out-edges) are contiguous scans.
class Network {
public:
    Network() = default;

    /// Validates and indexes an edge list. Throws ValidationError on a
    /// self-loop, a duplicate (src,dst) pair, a non-positive weight, an
    /// out-of-range index, or an edge whose reverse is missing.
    static Network from_edges(std::vector<std::string> names, std::vector<Edge> edges);

    std::size_t node_count() const { return names_.size(); }
    std::size_t edge_count() const { return out_targets_.size(); }

    std::span<const NodeId> out_neighbors(NodeId i) const {
        return {out_targets_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
    }
    std::span<const double> out_weights(NodeId i) const {
        return {out_weights_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
    }
    std::span<const NodeId> in_neighbors(NodeId i) const {
        return {in_sources_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
    }
    std::span<const double> in_weights(NodeId i) const {
        return {in_weights_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
    }

    // Global positions into the in-edge arrays; used to key per-edge caches.
    std::size_t in_edge_begin(NodeId i) const { return in_offsets_[i]; }
    std::size_t in_edge_end(NodeId i) const { return in_offsets_[i + 1]; }
    // For each out-edge position, the position of the same edge among the
    // destination's in-edges.
    std::span<const std::size_t> out_to_in(NodeId i) const {
        return {out_to_in_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
    }

    std::size_t out_degree(NodeId i) const { return out_offsets_[i + 1] - out_offsets_[i]; }
    std::size_t in_degree(NodeId i) const { return in_offsets_[i + 1] - in_offsets_[i]; }

    bool has_edge(NodeId src, NodeId dst) const;
    std::optional<double> weight(NodeId src, NodeId dst) const;

    const std::string& name(NodeId i) const { return names_[i]; }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<NodeId> find(std::string_view name) const;
    // Throws ValidationError naming the unknown id.
    NodeId require(std::string_view name) const;

    /// Edges in canonical (src, dst) order.
    std::vector<Edge> edges() const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, NodeId> index_;
    std::vector<std::size_t> out_offsets_{0};
    std::vector<NodeId> out_targets_;
    std::vector<double> out_weights_;
    std::vector<std::size_t> in_offsets_{0};
    std::vector<NodeId> in_sources_;
    std::vector<double> in_weights_;
    std::vector<std::size_t> out_to_in_;
};

struct EdgeListOptions {
    // Add the reverse of an unreciprocated edge with the forward weight
    // instead of rejecting the input.
    bool symmetrize = false;
};

/// Reads `src<TAB>dst<TAB>weight` records (`#` comments and blank lines are
/// skipped). Node indices follow first appearance unless `node_map` is given,
/// in which case every id must appear in it.
Network load_edge_list(std::istream& in, const EdgeListOptions& options = {},
                       const std::vector<std::string>* node_map = nullptr);
void write_edge_list(std::ostream& out, const Network& net);

// Sidecar `id<TAB>index` mapping; returned vector is indexed by node index.
std::vector<std::string> read_node_map(std::istream& in);
void write_node_map(std::ostream& out, const Network& net);

struct RewireOptions {
    // Attempted double-edge swaps per undirected edge.
    double swaps_per_edge = 10.0;
};

/// Degree-preserving randomisation of the reciprocal graph.
///
/// Reciprocal pairs are treated as undirected edges and randomised with
/// double-edge swaps that never create self-loops or parallel edges, so the
/// per-node in- and out-degree are exactly preserved and every tie remains
/// reciprocated. Directed weights are then a seeded shuffle of the original
/// weight multiset.
Network rewire_configuration_model(const Network& net, std::uint64_t seed,
                                   const RewireOptions& options = {});

struct NodePositionFeatures {
    double pagerank = 0.0;
    double eigencentrality = 0.0;
    double transitivity = 0.0;
    std::uint32_t community = 0;
};

struct IterationOptions {
    double tol = 1e-12;
    int max_iter = 10000;
};

std::vector<double> pagerank(const Network& net, double damping = 0.85,
                             const IterationOptions& options = {});
// Dominant eigenvector of the symmetrised weight matrix, unit L2 norm.
std::vector<double> eigencentrality(const Network& net, const IterationOptions& options = {});
// Local clustering coefficient on the undirected simple graph.
std::vector<double> local_transitivity(const Network& net);
// Louvain modularity optimisation on symmetrised weights; ids are dense and
// numbered by first appearance in node order.
std::vector<std::uint32_t> louvain_communities(const Network& net, std::uint64_t seed);
double modularity(const Network& net, std::span<const std::uint32_t> community);

std::vector<NodePositionFeatures> node_position_features(const Network& net, double damping,
                                                         double tol, std::uint64_t seed);

struct SeedDistances {
    // Hop count per adopter (input order); nullopt when no seed is reachable.
    std::vector<std::optional<std::uint32_t>> distance;
    std::size_t unreachable = 0;
    // Mean over reachable adopters; nullopt when none are reachable.
    std::optional<double> mean;
};

SeedDistances nearest_seed_distances(const Network& net, std::span<const NodeId> adopters,
                                     std::span<const NodeId> seeds);

/// Directed edges among the distinct adopters over |A|(|A|-1).
double adopter_edge_density(const Network& net, std::span<const NodeId> adopters);

} // namespace cascadelab
