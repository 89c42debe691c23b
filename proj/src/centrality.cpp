#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "cascadelab/graph.hpp"

namespace cascadelab {

namespace {

constexpr std::size_t kDenseEigenLimit = 2000;

} // namespace

std::vector<double> pagerank(const Network& net, double damping, const IterationOptions& options) {
    const std::size_t n = net.node_count();
    if (n == 0)
        return {};
    if (!(damping >= 0.0 && damping < 1.0))
        throw ValidationError("pagerank damping must lie in [0,1)");

    std::vector<double> out_strength(n, 0.0);
    for (NodeId i = 0; i < n; ++i)
        for (double w : net.out_weights(i))
            out_strength[i] += w;

    const double uniform = 1.0 / static_cast<double>(n);
    std::vector<double> x(n, uniform), next(n);
    for (int iter = 0; iter < options.max_iter; ++iter) {
        double dangling = 0.0;
        for (NodeId i = 0; i < n; ++i)
            if (out_strength[i] == 0.0)
                dangling += x[i];
        const double base = (1.0 - damping) * uniform + damping * dangling * uniform;
        // Pull formulation over in-edges keeps the update free of scatter writes.
        for (NodeId j = 0; j < n; ++j) {
            double acc = 0.0;
            auto srcs = net.in_neighbors(j);
            auto ws = net.in_weights(j);
            for (std::size_t k = 0; k < srcs.size(); ++k)
                acc += x[srcs[k]] * ws[k] / out_strength[srcs[k]];
            next[j] = base + damping * acc;
        }
        const double total = std::accumulate(next.begin(), next.end(), 0.0);
        double diff = 0.0;
        for (NodeId i = 0; i < n; ++i) {
            next[i] /= total;
            diff += std::abs(next[i] - x[i]);
        }
        x.swap(next);
        if (diff < options.tol)
            return x;
    }
    throw RuntimeFailure("pagerank did not converge within " + std::to_string(options.max_iter) +
                         " iterations");
}

std::vector<double> eigencentrality(const Network& net, const IterationOptions& options) {
    const std::size_t n = net.node_count();
    if (n == 0)
        return {};

    // Reciprocity makes in- and out-lists of a node the same sorted set, so the
    // k-th in-weight is the reverse of the k-th out-edge.
    std::vector<double> sym(net.edge_count());
    for (NodeId i = 0; i < n; ++i) {
        auto out_w = net.out_weights(i);
        auto in_w = net.in_weights(i);
        const std::size_t base = net.in_edge_begin(i);
        for (std::size_t k = 0; k < out_w.size(); ++k)
            sym[base + k] = 0.5 * (out_w[k] + in_w[k]);
    }

    // Iterate with A + I: same eigenvectors, and the shift removes the +/-
    // eigenvalue pairing of bipartite graphs that stalls plain power iteration.
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n))), next(n);
    for (int iter = 0; iter < options.max_iter; ++iter) {
        double norm = 0.0;
        for (NodeId i = 0; i < n; ++i) {
            double acc = x[i];
            auto nbrs = net.out_neighbors(i);
            const std::size_t base = net.in_edge_begin(i);
            for (std::size_t k = 0; k < nbrs.size(); ++k)
                acc += sym[base + k] * x[nbrs[k]];
            next[i] = acc;
            norm += acc * acc;
        }
        norm = std::sqrt(norm);
        double diff = 0.0;
        for (NodeId i = 0; i < n; ++i) {
            next[i] /= norm;
            diff = std::max(diff, std::abs(next[i] - x[i]));
        }
        x.swap(next);
        if (diff < options.tol)
            return x;
    }

    // Long paths and chains have a tiny spectral gap; small graphs fall back
    // to a dense symmetric eigensolver.
    if (n <= kDenseEigenLimit) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (NodeId i = 0; i < n; ++i) {
            auto nbrs = net.out_neighbors(i);
            const std::size_t base = net.in_edge_begin(i);
            for (std::size_t k = 0; k < nbrs.size(); ++k)
                a(i, nbrs[k]) = sym[base + k];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
        if (solver.info() == Eigen::Success) {
            const Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(n) - 1);
            for (NodeId i = 0; i < n; ++i)
                x[i] = std::abs(v(i));
            return x;
        }
    }
    throw RuntimeFailure("eigencentrality did not converge within " +
                         std::to_string(options.max_iter) + " iterations");
}

std::vector<double> local_transitivity(const Network& net) {
    const std::size_t n = net.node_count();
    std::vector<double> out(n, 0.0);
    std::vector<NodeId> mark(n, static_cast<NodeId>(-1));
    for (NodeId i = 0; i < n; ++i) {
        auto nbrs = net.out_neighbors(i);
        const double d = static_cast<double>(nbrs.size());
        if (nbrs.size() < 2)
            continue;
        for (NodeId j : nbrs)
            mark[j] = i;
        std::size_t closed = 0;
        for (NodeId j : nbrs)
            for (NodeId k : net.out_neighbors(j))
                closed += (mark[k] == i);
        // Each triangle through i is seen from both of its other corners.
        out[i] = static_cast<double>(closed) / (d * (d - 1.0));
    }
    return out;
}

std::vector<NodePositionFeatures> node_position_features(const Network& net, double damping,
                                                         double tol, std::uint64_t seed) {
    IterationOptions opts;
    opts.tol = tol;
    const auto pr = pagerank(net, damping, opts);
    const auto ev = eigencentrality(net, opts);
    const auto tr = local_transitivity(net);
    const auto comm = louvain_communities(net, seed);
    std::vector<NodePositionFeatures> out(net.node_count());
    for (NodeId i = 0; i < net.node_count(); ++i)
        out[i] = {pr[i], ev[i], tr[i], comm[i]};
    return out;
}

} // namespace cascadelab
