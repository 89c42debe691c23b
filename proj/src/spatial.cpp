#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "cascadelab/metrics.hpp"
#include "cascadelab/textio.hpp"

namespace cascadelab {

SpatialWeights SpatialWeights::identity(std::size_t n) {
    SpatialWeights w;
    w.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.rows[i].emplace_back(i, 1.0);
    return w;
}

SpatialWeights SpatialWeights::row_standardized() const {
    SpatialWeights out = *this;
    for (auto& row : out.rows) {
        double s = 0.0;
        for (auto& [j, v] : row)
            s += v;
        if (s > 0.0)
            for (auto& [j, v] : row)
                v /= s;
    }
    return out;
}

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

double lee_l(std::span<const double> x, std::span<const double> y, const SpatialWeights& w) {
    const std::size_t n = x.size();
    if (n < 2)
        throw ValidationError("Lee's L needs at least 2 regions");
    if (y.size() != n || w.size() != n)
        throw ValidationError("Lee's L: x, y and weights must cover the same regions");
    auto constant = [](std::span<const double> v) {
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *lo == *hi;
    };
    if (constant(x) || constant(y))
        throw ValidationError("Lee's L undefined for a constant series");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw ValidationError("Lee's L undefined for a constant series");

    double row_sq = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double rs = 0.0, lx = 0.0, ly = 0.0;
        for (auto [j, v] : w.rows[i]) {
            if (j >= n)
                throw ValidationError("Lee's L: weight refers to an unknown region");
            rs += v;
            lx += v * (x[j] - mx);
            ly += v * (y[j] - my);
        }
        row_sq += rs * rs;
        cross += lx * ly;
    }
    if (row_sq == 0.0)
        throw ValidationError("Lee's L: weight matrix is empty");
    return static_cast<double>(n) / row_sq * cross / (std::sqrt(sxx) * std::sqrt(syy));
}

double lee_l_correlation(std::span<const double> x, std::span<const double> y,
                         const SpatialWeights& w) {
    const double lxy = lee_l(x, y, w);
    const double lxx = lee_l(x, x, w);
    const double lyy = lee_l(y, y, w);
    if (lxx <= 0.0 || lyy <= 0.0)
        throw ValidationError("spatially smoothed series has no variation");
    return std::clamp(lxy / std::sqrt(lxx * lyy), -1.0, 1.0);
}

RegionMap read_region_map(std::istream& regions, std::istream& adjacency, const Network& net) {
    RegionMap map;
    std::map<std::string, std::uint32_t> index;
    constexpr auto unset = static_cast<std::uint32_t>(-1);
    map.region_of.assign(net.node_count(), unset);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(regions, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        auto f = split_csv(t);
        if (f.size() != 2)
            throw ValidationError("region map line " + std::to_string(line_no) +
                                  ": expected 'node_id,region'");
        if (line_no == 1 && f[0] == "node_id" && f[1] == "region")
            continue;
        const NodeId node = net.require(f[0]);
        auto [it, fresh] =
            index.emplace(std::string(f[1]), static_cast<std::uint32_t>(map.region_names.size()));
        if (fresh)
            map.region_names.emplace_back(f[1]);
        map.region_of[node] = it->second;
    }
    for (NodeId i = 0; i < net.node_count(); ++i)
        if (map.region_of[i] == unset)
            throw ValidationError("region map: node '" + net.name(i) + "' has no region");

    map.adjacency.rows.resize(map.region_names.size());
    line_no = 0;
    while (std::getline(adjacency, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        auto f = split_csv(t);
        if (f.size() != 3)
            throw ValidationError("region adjacency line " + std::to_string(line_no) +
                                  ": expected 'region_a,region_b,weight'");
        if (line_no == 1 && f[0] == "region_a")
            continue;
        auto a = index.find(std::string(f[0]));
        auto b = index.find(std::string(f[1]));
        if (a == index.end() || b == index.end())
            throw ValidationError("region adjacency line " + std::to_string(line_no) +
                                  ": unknown region");
        double w = 0.0;
        if (!parse_double(f[2], w) || w < 0.0)
            throw ValidationError("region adjacency line " + std::to_string(line_no) +
                                  ": weight must be a non-negative number");
        map.adjacency.rows[a->second].emplace_back(b->second, w);
        if (a->second != b->second)
            map.adjacency.rows[b->second].emplace_back(a->second, w);
    }
    return map;
}

void write_region_map(std::ostream& regions, std::ostream& adjacency, const RegionMap& map,
                      const Network& net) {
    regions << "node_id,region\n";
    for (NodeId i = 0; i < net.node_count(); ++i)
        regions << net.name(i) << ',' << map.region_names[map.region_of[i]] << '\n';
    adjacency << "region_a,region_b,weight\n";
    for (std::size_t a = 0; a < map.adjacency.size(); ++a)
        for (auto [b, w] : map.adjacency.rows[a])
            if (a <= b)
                adjacency << map.region_names[a] << ',' << map.region_names[b] << ','
                          << format_double(w) << '\n';
}

std::vector<double> region_adoption(const RegionMap& map, std::span<const NodeId> adopters,
                                    double alpha) {
    const std::size_t r = map.region_count();
    std::vector<double> agents(r, 0.0), adopted(r, 0.0);
    for (auto region : map.region_of)
        agents[region] += 1.0;
    std::vector<NodeId> unique(adopters.begin(), adopters.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (NodeId a : unique)
        adopted[map.region_of.at(a)] += 1.0;
    std::vector<double> out(r);
    for (std::size_t k = 0; k < r; ++k)
        out[k] = (adopted[k] + alpha) / (agents[k] + 2.0 * alpha);
    return out;
}

} // namespace cascadelab
