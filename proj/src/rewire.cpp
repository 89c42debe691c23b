#include <algorithm>
#include <unordered_set>

#include "cascadelab/graph.hpp"

namespace cascadelab {

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
    if (a > b)
        std::swap(a, b);
    return (std::uint64_t{a} << 32) | b;
}

} // namespace

Network rewire_configuration_model(const Network& net, std::uint64_t seed,
                                   const RewireOptions& options) {
    Rng rng(seed);

    std::vector<std::pair<NodeId, NodeId>> ties;
    std::vector<double> weights;
    weights.reserve(net.edge_count());
    for (NodeId u = 0; u < net.node_count(); ++u) {
        auto nbrs = net.out_neighbors(u);
        auto ws = net.out_weights(u);
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            weights.push_back(ws[k]);
            if (u < nbrs[k])
                ties.emplace_back(u, nbrs[k]);
        }
    }

    std::unordered_set<std::uint64_t> present;
    present.reserve(ties.size() * 2);
    for (auto [a, b] : ties)
        present.insert(pair_key(a, b));

    const std::size_t m = ties.size();
    if (m >= 2) {
        const auto attempts = static_cast<std::size_t>(options.swaps_per_edge * static_cast<double>(m));
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        for (std::size_t t = 0; t < attempts; ++t) {
            const std::size_t e1 = pick(rng);
            const std::size_t e2 = pick(rng);
            if (e1 == e2)
                continue;
            auto [a, b] = ties[e1];
            auto [c, d] = ties[e2];
            if (rng() & 1)
                std::swap(c, d);
            // (a,b),(c,d) -> (a,d),(c,b)
            if (a == d || c == b)
                continue;
            const auto k1 = pair_key(a, d);
            const auto k2 = pair_key(c, b);
            if (k1 == k2 || present.count(k1) || present.count(k2))
                continue;
            present.erase(pair_key(a, b));
            present.erase(pair_key(c, d));
            present.insert(k1);
            present.insert(k2);
            ties[e1] = {a, d};
            ties[e2] = {c, b};
        }
    }

    std::shuffle(weights.begin(), weights.end(), rng);
    std::vector<Edge> edges;
    edges.reserve(2 * m);
    std::size_t w = 0;
    for (auto [a, b] : ties) {
        edges.push_back({a, b, weights[w++]});
        edges.push_back({b, a, weights[w++]});
    }
    return Network::from_edges(net.names(), std::move(edges));
}

} // namespace cascadelab
