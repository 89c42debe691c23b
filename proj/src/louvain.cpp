#include <algorithm>
#include <numeric>

#include "cascadelab/graph.hpp"

namespace cascadelab {

namespace {

// Undirected weighted multigraph used between Louvain levels. Self-loop
// weight is stored separately and counts twice toward node strength.
struct LevelGraph {
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> targets;
    std::vector<double> weights;
    std::vector<double> self_loop;
    std::vector<double> strength;
    double total = 0.0; // 2m

    std::size_t size() const { return self_loop.size(); }
};

LevelGraph from_network(const Network& net) {
    const std::size_t n = net.node_count();
    LevelGraph g;
    g.offsets.assign(n + 1, 0);
    g.self_loop.assign(n, 0.0);
    g.strength.assign(n, 0.0);
    for (NodeId i = 0; i < n; ++i)
        g.offsets[i + 1] = g.offsets[i] + net.out_degree(i);
    g.targets.resize(g.offsets[n]);
    g.weights.resize(g.offsets[n]);
    for (NodeId i = 0; i < n; ++i) {
        auto nbrs = net.out_neighbors(i);
        auto out_w = net.out_weights(i);
        auto in_w = net.in_weights(i);
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const double w = 0.5 * (out_w[k] + in_w[k]);
            g.targets[g.offsets[i] + k] = nbrs[k];
            g.weights[g.offsets[i] + k] = w;
            g.strength[i] += w;
        }
        g.total += g.strength[i];
    }
    return g;
}

// One round of local moves. Returns true if any node changed community.
bool local_moves(const LevelGraph& g, std::vector<std::uint32_t>& comm, Rng& rng) {
    const std::size_t n = g.size();
    std::vector<double> tot(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        tot[comm[i]] += g.strength[i];

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<double> link(n, 0.0);
    std::vector<std::uint32_t> touched;
    bool moved_any = false;
    const double m2 = g.total;
    if (m2 <= 0.0)
        return false;

    for (int pass = 0; pass < 1000; ++pass) {
        bool moved = false;
        for (std::uint32_t i : order) {
            const std::uint32_t own = comm[i];
            const double ki = g.strength[i];
            touched.clear();
            for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
                const std::uint32_t c = comm[g.targets[e]];
                if (link[c] == 0.0)
                    touched.push_back(c);
                link[c] += g.weights[e];
            }
            tot[own] -= ki;
            // Gain of joining community c (up to a common factor) is
            // link_c - tot_c * k_i / 2m.
            double best_gain = link[own] - tot[own] * ki / m2;
            std::uint32_t best = own;
            for (std::uint32_t c : touched) {
                const double gain = link[c] - tot[c] * ki / m2;
                if (gain > best_gain + 1e-12 ||
                    (std::abs(gain - best_gain) <= 1e-12 && c < best && best != own)) {
                    best_gain = gain;
                    best = c;
                }
            }
            tot[best] += ki;
            if (best != own) {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
            for (std::uint32_t c : touched)
                link[c] = 0.0;
            link[own] = 0.0;
        }
        if (!moved)
            break;
    }
    return moved_any;
}

// Renumbers communities densely in order of first appearance.
std::uint32_t relabel(std::vector<std::uint32_t>& comm) {
    std::vector<std::uint32_t> map(comm.size(), static_cast<std::uint32_t>(-1));
    std::uint32_t next = 0;
    for (auto& c : comm) {
        if (map[c] == static_cast<std::uint32_t>(-1))
            map[c] = next++;
        c = map[c];
    }
    return next;
}

LevelGraph aggregate(const LevelGraph& g, const std::vector<std::uint32_t>& comm,
                     std::uint32_t count) {
    LevelGraph out;
    out.self_loop.assign(count, 0.0);
    out.strength.assign(count, 0.0);
    out.total = g.total;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(count);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::uint32_t ci = comm[i];
        out.strength[ci] += g.strength[i];
        out.self_loop[ci] += g.self_loop[i];
        for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e) {
            const std::uint32_t cj = comm[g.targets[e]];
            if (ci == cj)
                out.self_loop[ci] += g.weights[e];
            else
                rows[ci].emplace_back(cj, g.weights[e]);
        }
    }
    out.offsets.assign(count + 1, 0);
    for (std::uint32_t c = 0; c < count; ++c) {
        auto& row = rows[c];
        std::sort(row.begin(), row.end());
        std::size_t w = 0;
        for (std::size_t r = 0; r < row.size(); ++r) {
            if (w > 0 && row[w - 1].first == row[r].first)
                row[w - 1].second += row[r].second;
            else
                row[w++] = row[r];
        }
        row.resize(w);
        out.offsets[c + 1] = out.offsets[c] + w;
    }
    out.targets.reserve(out.offsets[count]);
    out.weights.reserve(out.offsets[count]);
    for (auto& row : rows)
        for (auto [t, w] : row) {
            out.targets.push_back(t);
            out.weights.push_back(w);
        }
    return out;
}

} // namespace

std::vector<std::uint32_t> louvain_communities(const Network& net, std::uint64_t seed) {
    const std::size_t n = net.node_count();
    Rng rng(seed);
    LevelGraph g = from_network(net);
    std::vector<std::uint32_t> membership(n);
    std::iota(membership.begin(), membership.end(), 0u);

    for (int level = 0; level < 64; ++level) {
        std::vector<std::uint32_t> comm(g.size());
        std::iota(comm.begin(), comm.end(), 0u);
        if (!local_moves(g, comm, rng))
            break;
        const std::uint32_t count = relabel(comm);
        for (auto& c : membership)
            c = comm[c];
        if (count == g.size())
            break;
        g = aggregate(g, comm, count);
    }
    relabel(membership);
    return membership;
}

double modularity(const Network& net, std::span<const std::uint32_t> community) {
    if (community.size() != net.node_count())
        throw ValidationError("modularity: community vector size mismatch");
    const LevelGraph g = from_network(net);
    if (g.total <= 0.0)
        return 0.0;
    std::uint32_t count = 0;
    for (auto c : community)
        count = std::max(count, c + 1);
    std::vector<double> internal(count, 0.0), tot(count, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        tot[community[i]] += g.strength[i];
        for (std::size_t e = g.offsets[i]; e < g.offsets[i + 1]; ++e)
            if (community[g.targets[e]] == community[i])
                internal[community[i]] += g.weights[e];
    }
    double q = 0.0;
    for (std::uint32_t c = 0; c < count; ++c)
        q += internal[c] / g.total - (tot[c] / g.total) * (tot[c] / g.total);
    return q;
}

} // namespace cascadelab
