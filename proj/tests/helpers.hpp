#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cascadelab/graph.hpp"

namespace testing {

using cascadelab::Edge;
using cascadelab::Network;
using cascadelab::NodeId;

// Reciprocal graph on n nodes named "0".."n-1" from undirected pairs.
inline Network undirected(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& pairs,
                          double w = 1.0) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i)
        names.push_back(std::to_string(i));
    std::vector<Edge> edges;
    for (auto [a, b] : pairs) {
        edges.push_back({a, b, w});
        edges.push_back({b, a, w});
    }
    return Network::from_edges(std::move(names), std::move(edges));
}

inline std::vector<std::pair<NodeId, NodeId>> clique(NodeId from, NodeId to) {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId a = from; a < to; ++a)
        for (NodeId b = a + 1; b < to; ++b)
            out.emplace_back(a, b);
    return out;
}

// Connected random reciprocal graph: a ring plus extra random chords, with
// random weights per direction.
template <class Rng>
Network random_graph(std::size_t n, double p, Rng& rng, bool weighted = true) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i)
        names.push_back(std::to_string(i));
    std::uniform_real_distribution<double> u(0.0, 1.0), w(0.5, 3.0);
    std::vector<Edge> edges;
    for (NodeId a = 0; a < n; ++a)
        for (NodeId b = a + 1; b < n; ++b)
            if (b == a + 1 || (a == 0 && b == n - 1) || u(rng) < p) {
                edges.push_back({a, b, weighted ? w(rng) : 1.0});
                edges.push_back({b, a, weighted ? w(rng) : 1.0});
            }
    return Network::from_edges(std::move(names), std::move(edges));
}

} // namespace testing
