#include "cascadelab/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <deque>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "cascadelab/textio.hpp"

namespace cascadelab {

Network Network::from_edges(std::vector<std::string> names, std::vector<Edge> edges) {
    const std::size_t n = names.size();
    Network net;
    net.index_.reserve(n);
    for (NodeId i = 0; i < n; ++i) {
        if (!net.index_.emplace(names[i], i).second)
            throw ValidationError("duplicate node id '" + names[i] + "'");
    }
    net.names_ = std::move(names);

    for (const Edge& e : edges) {
        if (e.src >= n || e.dst >= n)
            throw ValidationError("edge endpoint out of range");
        if (e.src == e.dst)
            throw ValidationError("self-loop on node '" + net.names_[e.src] + "'");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw ValidationError("non-positive weight on edge '" + net.names_[e.src] + "' -> '" +
                                  net.names_[e.dst] + "'");
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    for (std::size_t k = 1; k < edges.size(); ++k) {
        if (edges[k].src == edges[k - 1].src && edges[k].dst == edges[k - 1].dst)
            throw ValidationError("duplicate edge '" + net.names_[edges[k].src] + "' -> '" +
                                  net.names_[edges[k].dst] + "'");
    }

    const std::size_t m = edges.size();
    net.out_offsets_.assign(n + 1, 0);
    net.in_offsets_.assign(n + 1, 0);
    for (const Edge& e : edges) {
        ++net.out_offsets_[e.src + 1];
        ++net.in_offsets_[e.dst + 1];
    }
    std::partial_sum(net.out_offsets_.begin(), net.out_offsets_.end(), net.out_offsets_.begin());
    std::partial_sum(net.in_offsets_.begin(), net.in_offsets_.end(), net.in_offsets_.begin());

    net.out_targets_.resize(m);
    net.out_weights_.resize(m);
    net.in_sources_.resize(m);
    net.in_weights_.resize(m);
    net.out_to_in_.resize(m);
    std::vector<std::size_t> in_fill(net.in_offsets_.begin(), net.in_offsets_.end() - 1);
    // Edges are sorted by source, so each destination's in-list is filled in
    // increasing source order.
    for (std::size_t k = 0; k < m; ++k) {
        const Edge& e = edges[k];
        net.out_targets_[k] = e.dst;
        net.out_weights_[k] = e.weight;
        const std::size_t slot = in_fill[e.dst]++;
        net.in_sources_[slot] = e.src;
        net.in_weights_[slot] = e.weight;
        net.out_to_in_[k] = slot;
    }

    for (const Edge& e : edges) {
        if (!net.has_edge(e.dst, e.src))
            throw ValidationError("unreciprocated edge '" + net.names_[e.src] + "' -> '" +
                                  net.names_[e.dst] + "'");
    }
    return net;
}

bool Network::has_edge(NodeId src, NodeId dst) const {
    auto nbrs = out_neighbors(src);
    return std::binary_search(nbrs.begin(), nbrs.end(), dst);
}

std::optional<double> Network::weight(NodeId src, NodeId dst) const {
    auto nbrs = out_neighbors(src);
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), dst);
    if (it == nbrs.end() || *it != dst)
        return std::nullopt;
    return out_weights(src)[static_cast<std::size_t>(it - nbrs.begin())];
}

std::optional<NodeId> Network::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

NodeId Network::require(std::string_view name) const {
    if (auto id = find(name))
        return *id;
    throw ValidationError("unknown node id '" + std::string(name) + "'");
}

std::vector<Edge> Network::edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (NodeId i = 0; i < node_count(); ++i) {
        auto nbrs = out_neighbors(i);
        auto ws = out_weights(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k)
            out.push_back({i, nbrs[k], ws[k]});
    }
    return out;
}

Network load_edge_list(std::istream& in, const EdgeListOptions& options,
                       const std::vector<std::string>* node_map) {
    std::vector<std::string> names;
    std::unordered_map<std::string, NodeId> index;
    if (node_map) {
        names = *node_map;
        for (NodeId i = 0; i < names.size(); ++i)
            index.emplace(names[i], i);
    }
    auto intern = [&](const std::string& id, std::size_t line_no) -> NodeId {
        auto it = index.find(id);
        if (it != index.end())
            return it->second;
        if (node_map)
            throw ValidationError("line " + std::to_string(line_no) + ": node '" + id +
                                  "' missing from node map");
        const auto idx = static_cast<NodeId>(names.size());
        names.push_back(id);
        index.emplace(id, idx);
        return idx;
    };

    std::vector<Edge> edges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = split_fields(line);
        if (fields.empty())
            continue;
        if (fields.size() != 3)
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": expected 'src<TAB>dst<TAB>weight'");
        double w = 0.0;
        if (!parse_double(fields[2], w))
            throw ValidationError("line " + std::to_string(line_no) + ": bad weight '" +
                                  std::string(fields[2]) + "'");
        if (fields[0] == fields[1])
            throw ValidationError("line " + std::to_string(line_no) + ": self-loop on '" +
                                  std::string(fields[0]) + "'");
        if (!(w > 0.0))
            throw ValidationError("line " + std::to_string(line_no) + ": non-positive weight");
        const NodeId s = intern(std::string(fields[0]), line_no);
        const NodeId d = intern(std::string(fields[1]), line_no);
        edges.push_back({s, d, w});
    }

    if (options.symmetrize) {
        std::unordered_set<std::uint64_t> present;
        present.reserve(edges.size() * 2);
        auto key = [](NodeId a, NodeId b) { return (std::uint64_t{a} << 32) | b; };
        for (const Edge& e : edges)
            present.insert(key(e.src, e.dst));
        const std::size_t m = edges.size();
        for (std::size_t k = 0; k < m; ++k) {
            const Edge e = edges[k];
            if (present.insert(key(e.dst, e.src)).second)
                edges.push_back({e.dst, e.src, e.weight});
        }
    }
    return Network::from_edges(std::move(names), std::move(edges));
}

void write_edge_list(std::ostream& out, const Network& net) {
    for (const Edge& e : net.edges())
        out << net.name(e.src) << '\t' << net.name(e.dst) << '\t' << format_double(e.weight)
            << '\n';
}

std::vector<std::string> read_node_map(std::istream& in) {
    std::vector<std::pair<std::size_t, std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = split_fields(line);
        if (fields.empty())
            continue;
        std::size_t idx = 0;
        if (fields.size() != 2 || !parse_size(fields[1], idx))
            throw ValidationError("node map line " + std::to_string(line_no) +
                                  ": expected 'id<TAB>index'");
        rows.emplace_back(idx, std::string(fields[0]));
    }
    std::vector<std::string> names(rows.size());
    std::vector<bool> seen(rows.size(), false);
    for (auto& [idx, id] : rows) {
        if (idx >= names.size() || seen[idx])
            throw ValidationError("node map indices must be a permutation of 0..n-1");
        seen[idx] = true;
        names[idx] = std::move(id);
    }
    return names;
}

void write_node_map(std::ostream& out, const Network& net) {
    for (NodeId i = 0; i < net.node_count(); ++i)
        out << net.name(i) << '\t' << i << '\n';
}

SeedDistances nearest_seed_distances(const Network& net, std::span<const NodeId> adopters,
                                     std::span<const NodeId> seeds) {
    const std::size_t n = net.node_count();
    if (seeds.empty())
        throw ValidationError("nearest_seed_distances: seed set is empty");
    for (NodeId s : seeds)
        if (s >= n)
            throw ValidationError("nearest_seed_distances: seed not in network");
    for (NodeId a : adopters)
        if (a >= n)
            throw ValidationError("nearest_seed_distances: adopter not in network");

    constexpr auto unseen = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> dist(n, unseen);
    std::vector<NodeId> frontier;
    for (NodeId s : seeds) {
        if (dist[s] != 0) {
            dist[s] = 0;
            frontier.push_back(s);
        }
    }
    // Every tie is reciprocated, so out-neighbours are the undirected neighbours.
    for (std::size_t head = 0; head < frontier.size(); ++head) {
        const NodeId u = frontier[head];
        for (NodeId v : net.out_neighbors(u)) {
            if (dist[v] == unseen) {
                dist[v] = dist[u] + 1;
                frontier.push_back(v);
            }
        }
    }

    SeedDistances out;
    out.distance.reserve(adopters.size());
    double total = 0.0;
    std::size_t reached = 0;
    for (NodeId a : adopters) {
        if (dist[a] == unseen) {
            out.distance.emplace_back(std::nullopt);
            ++out.unreachable;
        } else {
            out.distance.emplace_back(dist[a]);
            total += dist[a];
            ++reached;
        }
    }
    if (reached > 0)
        out.mean = total / static_cast<double>(reached);
    return out;
}

double adopter_edge_density(const Network& net, std::span<const NodeId> adopters) {
    std::vector<NodeId> nodes(adopters.begin(), adopters.end());
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    if (nodes.size() < 2)
        throw ValidationError("edge density needs at least 2 adopters");
    std::vector<char> member(net.node_count(), 0);
    for (NodeId a : nodes) {
        if (a >= net.node_count())
            throw ValidationError("adopter not in network");
        member[a] = 1;
    }
    std::size_t internal = 0;
    for (NodeId a : nodes)
        for (NodeId b : net.out_neighbors(a))
            internal += member[b];
    const double k = static_cast<double>(nodes.size());
    return static_cast<double>(internal) / (k * (k - 1.0));
}

} // namespace cascadelab
