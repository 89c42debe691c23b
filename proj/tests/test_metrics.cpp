#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "cascadelab/engine.hpp"
#include "cascadelab/graph.hpp"
#include "cascadelab/identity.hpp"
#include "cascadelab/metrics.hpp"
#include "helpers.hpp"

using namespace cascadelab;

namespace {

// Minimum-cost monotone path by exhaustive enumeration.
double dtw_brute(const std::vector<double>& a, const std::vector<double>& b) {
    std::function<double(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
        const double here = std::abs(a[i] - b[j]);
        if (i + 1 == a.size() && j + 1 == b.size())
            return here;
        double best = std::numeric_limits<double>::infinity();
        if (i + 1 < a.size())
            best = std::min(best, go(i + 1, j));
        if (j + 1 < b.size())
            best = std::min(best, go(i, j + 1));
        if (i + 1 < a.size() && j + 1 < b.size())
            best = std::min(best, go(i + 1, j + 1));
        return here + best;
    };
    return go(0, 0);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Rook adjacency on a rows x cols grid.
SpatialWeights rook(std::size_t rows, std::size_t cols) {
    SpatialWeights w;
    w.rows.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            if (r > 0)
                w.rows[i].emplace_back(i - cols, 1.0);
            if (r + 1 < rows)
                w.rows[i].emplace_back(i + cols, 1.0);
            if (c > 0)
                w.rows[i].emplace_back(i - 1, 1.0);
            if (c + 1 < cols)
                w.rows[i].emplace_back(i + 1, 1.0);
        }
    return w;
}

// Lee's L from the dense matrix expression.
double lee_dense(const std::vector<double>& x, const std::vector<double>& y, const SpatialWeights& w) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < w.rows.size(); ++i)
        for (auto [j, wij] : w.rows[i])
            v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = wij;
    Eigen::VectorXd zx = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    Eigen::VectorXd zy = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    zx.array() -= zx.mean();
    zy.array() -= zy.mean();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const double scale = static_cast<double>(n) / (v * ones).squaredNorm();
    return scale * (v * zx).dot(v * zy) / (zx.norm() * zy.norm());
}

IdentityMatrix random_identity(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(2 * n);
    for (auto& x : v)
        x = u(rng);
    return IdentityMatrix(CategorySchema::make({{"c", {"a", "b"}}}), n, v);
}

Cascade cascade_of(std::vector<NodeId> seeds, std::vector<UsageEvent> events) {
    Cascade c;
    c.seeds = std::move(seeds);
    c.events = std::move(events);
    c.steps = c.events.empty() ? 0 : c.events.back().t;
    return c;
}

} // namespace

TEST_CASE("log-ratio error") {
    CHECK(*log_ratio_error(5000, 1000, 0.1) == doctest::Approx(std::log10(2.0)));
    CHECK(*log_ratio_error(20000, 1000, 0.1) == doctest::Approx(std::log10(2.0)));
    CHECK(*log_ratio_error(10000, 1000, 0.1) == doctest::Approx(0.0));
    CHECK(*log_ratio_error(10, 100) == doctest::Approx(1.0));
    CHECK(!log_ratio_error(0, 100));
    CHECK(!log_ratio_error(10, 0));
}

TEST_CASE("relative error") {
    CHECK(*relative_error(3, 2) == doctest::Approx(0.5));
    CHECK(*relative_error(1, 2) == doctest::Approx(0.5));
    CHECK(*relative_error(-1, -2) == doctest::Approx(0.5));
    CHECK(*relative_error(2, 2) == 0.0);
    CHECK(!relative_error(1, 0));
}

TEST_CASE("DTW: small examples") {
    const std::vector<double> a{0, 0}, b{1, 1};
    CHECK(dtw_distance(a, b) == 2.0);
    const std::vector<double> c{0, 1}, d{0, 0, 1};
    CHECK(dtw_distance(c, d) == 0.0);
    CHECK(dtw_distance(a, a) == 0.0);
    CHECK_THROWS_AS(dtw_distance(std::vector<double>{}, a), ValidationError);
}

TEST_CASE("DTW: matches exhaustive path search") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> len(1, 6), val(0, 9);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
        for (auto& x : a)
            x = val(rng);
        for (auto& x : b)
            x = val(rng);
        CHECK(dtw_distance(a, b) == doctest::Approx(dtw_brute(a, b)));
        CHECK(dtw_distance(a, b) == doctest::Approx(dtw_distance(b, a)));
    }
}

TEST_CASE("rebin preserves mass and splits straddling cells") {
    const std::vector<double> s{2, 4, 6};
    const auto two = rebin(s, 2);
    CHECK(two[0] == doctest::Approx(4.0));
    CHECK(two[1] == doctest::Approx(8.0));
    CHECK(rebin(s, 3) == s);
    const auto six = rebin(s, 6);
    CHECK(six == std::vector<double>{1, 1, 2, 2, 3, 3});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (std::size_t len = 1; len < 30; len += 3)
        for (std::size_t bins = 1; bins < 25; bins += 4) {
            std::vector<double> x(len);
            for (auto& v : x)
                v = u(rng);
            const auto r = rebin(x, bins);
            CHECK(std::accumulate(r.begin(), r.end(), 0.0) ==
                  doctest::Approx(std::accumulate(x.begin(), x.end(), 0.0)));
        }
    CHECK_THROWS_AS(rebin(s, 0), ValidationError);
}

TEST_CASE("truncated length follows the stopping rule") {
    // 5 uses per step for 20 steps, then nothing.
    std::vector<double> curve(60, 0.0);
    for (std::size_t t = 0; t < 20; ++t)
        curve[t] = 5;
    // Window 5 from warmup 10: first stall is at t=24 (cumulative flat over 20..24).
    CHECK(truncated_length(curve, 5, 0.01, 10) == 25);
    // Warmup beyond the stall start delays the cut.
    CHECK(truncated_length(curve, 5, 0.01, 40) == 41);
    // Never fires on steady growth.
    const std::vector<double> steady(50, 1.0);
    CHECK(truncated_length(steady, 5, 0.01, 0) == 50);
}

TEST_CASE("downsample keeps time order, seeds and a subset of events") {
    Cascade c;
    c.seeds = {0};
    for (std::uint32_t t = 0; t < 100; ++t)
        c.events.push_back({t % 7, t});
    c.steps = 99;
    const auto d = downsample(c, 30, 4);
    CHECK(d.events.size() == 30);
    CHECK(d.seeds == c.seeds);
    CHECK(d.steps == c.steps);
    CHECK(std::is_sorted(d.events.begin(), d.events.end(),
                         [](const UsageEvent& a, const UsageEvent& b) { return a.t < b.t; }));
    for (const auto& e : d.events)
        CHECK(e.agent == e.t % 7);
    CHECK(downsample(c, 30, 4) == d);
    CHECK(downsample(c, 500, 4) == c);
}

TEST_CASE("histogram KL against a direct recomputation") {
    const std::vector<double> p{0.05, 0.1, 0.55, 0.6, 0.65, 0.95};
    const std::vector<double> q{0.15, 0.45, 0.5, 0.55, 0.99};
    const double eps = 1e-6;
    // Four bins: [0,.25) [.25,.5) [.5,.75) [.75,1].
    const std::vector<double> hp{2, 0, 3, 1}, hq{1, 1, 2, 1};
    double kl = 0.0;
    for (std::size_t b = 0; b < 4; ++b) {
        const double pb = (hp[b] + eps) / (6 + 4 * eps);
        const double qb = (hq[b] + eps) / (5 + 4 * eps);
        kl += pb * std::log(pb / qb);
    }
    CHECK(histogram_kl(p, q, 4) == doctest::Approx(kl).epsilon(1e-12));
    CHECK(histogram_kl(p, p, 4) == 0.0);
    CHECK(histogram_kl(p, q, 4) >= 0.0);
}

TEST_CASE("propensity KL separates different populations") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z(0.0, 1.0);
    FeatureRows a, b, c;
    for (int i = 0; i < 400; ++i) {
        a.push_back({z(rng), z(rng)});
        b.push_back({z(rng), z(rng)});
        c.push_back({z(rng) + 3.0, z(rng)});
    }
    const double same = propensity_kl(a, b);
    const double shifted = propensity_kl(a, c);
    CHECK(same < 0.1);
    CHECK(shifted > 1.0);
    CHECK(propensity_kl(a, a) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(propensity_kl(FeatureRows{{1.0}}, b), ValidationError);
}

TEST_CASE("Lee's L: identity weights reduce to Pearson correlation") {
    const std::vector<double> x{1, 4, 2, 8, 5}, y{2, 3, 3, 9, 4};
    CHECK(lee_l(x, y, SpatialWeights::identity(5)) == doctest::Approx(pearson(x, y)));
}

TEST_CASE("Lee's L: dense matrix oracle on a 2x2 and a 4x5 grid") {
    const auto w22 = rook(2, 2);
    const std::vector<double> x{1, 2, 3, 5}, y{2, 1, 4, 4};
    CHECK(lee_l(x, y, w22) == doctest::Approx(lee_dense(x, y, w22)));
    // Hand value: smoothed deviations are (-.5,.5,.5,-.5) for both series,
    // row sums are 2, sxx = 8.75 and syy = 6.75.
    CHECK(lee_l(x, y, w22) == doctest::Approx(0.25 / std::sqrt(8.75 * 6.75)));
    const auto s22 = w22.row_standardized();
    CHECK(lee_l(x, y, s22) == doctest::Approx(lee_dense(x, y, s22)));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto w = rook(4, 5).row_standardized();
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(20), b(20);
        for (auto& v : a)
            v = u(rng);
        for (auto& v : b)
            v = u(rng);
        CHECK(lee_l(a, b, w) == doctest::Approx(lee_dense(a, b, w)));
        const double r = lee_l_correlation(a, b, w);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("Lee's L correlation: x against itself and its negation") {
    const auto w = rook(4, 5).row_standardized();
    std::vector<double> x(20), neg(20), shifted(20);
    for (std::size_t i = 0; i < 20; ++i) {
        x[i] = std::sin(static_cast<double>(i));
        neg[i] = -x[i];
        shifted[i] = 3.0 * x[i] + 7.0;
    }
    CHECK(lee_l_correlation(x, x, w) == doctest::Approx(1.0));
    CHECK(lee_l_correlation(x, neg, w) == doctest::Approx(-1.0));
    CHECK(lee_l_correlation(x, shifted, w) == doctest::Approx(1.0));
    const std::vector<double> flat(20, 0.3);
    CHECK_THROWS_AS(lee_l(x, flat, w), ValidationError);
}

TEST_CASE("region adoption is smoothed per region") {
    const auto net = testing::undirected(4, {{0, 1}, {1, 2}, {2, 3}});
    std::istringstream regions("node_id,region\n0,A\n1,A\n2,A\n3,B\n");
    std::istringstream adj("region_a,region_b,weight\nA,B,1\n");
    const auto map = read_region_map(regions, adj, net);
    CHECK(map.region_count() == 2);
    const std::vector<NodeId> adopters{0, 1, 1, 3};
    const auto r = region_adoption(map, adopters, 0.5);
    CHECK(r[0] == doctest::Approx(2.5 / 4.0));
    CHECK(r[1] == doctest::Approx(1.5 / 2.0));

    std::ostringstream ro, ao;
    write_region_map(ro, ao, map, net);
    std::istringstream ri(ro.str()), ai(ao.str());
    const auto again = read_region_map(ri, ai, net);
    CHECK(again.region_of == map.region_of);
    CHECK(again.adjacency.rows == map.adjacency.rows);

    std::istringstream partial("0,A\n1,A\n");
    std::istringstream adj2("");
    CHECK_THROWS_AS(read_region_map(partial, adj2, net), ValidationError);
}

namespace {

struct World {
    Network net;
    IdentityMatrix ids;
    RegionMap regions;
    std::vector<NodePositionFeatures> positions;
};

World small_world(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    World w{testing::random_graph(400, 0.02, rng), random_identity(400, rng), {}, {}};
    // 4x5 grid of regions; node i lives in region i % 20.
    w.regions.adjacency = rook(4, 5);
    for (std::size_t r = 0; r < 20; ++r)
        w.regions.region_names.push_back("r" + std::to_string(r));
    for (NodeId i = 0; i < 400; ++i)
        w.regions.region_of.push_back(i % 20);
    w.positions = node_position_features(w.net, 0.85, 1e-10, 1);
    return w;
}

Cascade simulate(const World& w, double s_h, std::uint64_t seed) {
    HashtagSpec spec;
    spec.seeds = {0, 100, 200, 300};
    SimulationConfig cfg;
    cfg.variant = Variant::network_only;
    cfg.stickiness = s_h;
    cfg.rng_seed = seed;
    return run_simulation(w.net, w.ids, spec, cfg);
}

class ConstantRegressor final : public SizeRegressor {
public:
    explicit ConstantRegressor(double v) : v_(v) {}
    void fit(const FeatureRows&, std::span<const double>) override {}
    double predict(std::span<const double>) const override { return v_; }

private:
    double v_;
};

} // namespace

TEST_CASE("compute_metrics: a cascade compared with itself") {
    const auto w = small_world(1);
    const auto c = simulate(w, 0.5, 3);
    REQUIRE(c.uses() > 50);
    ConstantRegressor reg(static_cast<double>(c.uses()));
    MetricContext ctx;
    ctx.net = &w.net;
    ctx.ids = &w.ids;
    ctx.regions = &w.regions;
    ctx.positions = &w.positions;
    ctx.regressor = &reg;
    const auto m = compute_metrics(c, c, ctx);
    for (std::size_t k = 0; k < kMetricCount; ++k)
        CHECK(m.valid[k]);
    CHECK(m.value[0] == 0.0);
    CHECK(m.value[1] == 0.0);
    CHECK(m.value[2] == 0.0);
    CHECK(m.value[3] == 0.0);
    CHECK(m.value[4] == 0.0);
    CHECK(m.value[5] == doctest::Approx(0.0));
    CHECK(m.value[6] == 0.0);
    CHECK(m.value[7] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.value[8] == doctest::Approx(1.0));
    CHECK(m.value[9] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("compute_metrics: ten times the volume gives M1 = 1") {
    const auto w = small_world(2);
    Cascade emp = cascade_of({0}, {{0, 0}, {1, 1}, {2, 1}, {3, 2}});
    Cascade sim = emp;
    sim.events.clear();
    for (std::uint32_t t = 0; t < 40; ++t)
        sim.events.push_back({t % 10, t / 10});
    sim.events.front() = {0, 0};
    sim.steps = 3;
    MetricContext ctx;
    ctx.net = &w.net;
    const auto m = compute_metrics(sim, emp, ctx);
    CHECK(m.valid[0]);
    CHECK(m.value[0] == doctest::Approx(1.0));
    // Without identities, regressor or regions those metrics are flagged.
    CHECK(!m.valid[6]);
    CHECK(!m.valid[7]);
    CHECK(!m.valid[8]);
    // With a sample rate of 0.1 the same volumes match.
    ctx.sample_rate = 0.1;
    CHECK(compute_metrics(sim, emp, ctx).value[0] == doctest::Approx(0.0));
}

TEST_CASE("compute_metrics: M9 drops when adoption moves to other regions") {
    const auto w = small_world(3);
    // Empirical adopters concentrated in the first grid row, simulated in the last.
    Cascade emp, near, far;
    emp.seeds = near.seeds = far.seeds = {0};
    emp.events = near.events = far.events = {{0, 0}};
    std::uint32_t t = 1;
    for (NodeId i = 1; i < 400 && emp.events.size() < 60; ++i)
        if (w.regions.region_of[i] < 5)
            emp.events.push_back({i, t++});
    t = 1;
    for (NodeId i = 399; i > 0 && near.events.size() < 60; --i)
        if (w.regions.region_of[i] < 5)
            near.events.push_back({i, t++});
    t = 1;
    for (NodeId i = 1; i < 400 && far.events.size() < 60; ++i)
        if (w.regions.region_of[i] >= 15)
            far.events.push_back({i, t++});
    emp.steps = near.steps = far.steps = 59;
    MetricContext ctx;
    ctx.net = &w.net;
    ctx.regions = &w.regions;
    const auto a = compute_metrics(near, emp, ctx);
    const auto b = compute_metrics(far, emp, ctx);
    REQUIRE(a.valid[8]);
    REQUIRE(b.valid[8]);
    CHECK(a.value[8] > 0.8);
    CHECK(b.value[8] < 0.0);
}

TEST_CASE("compute_metrics: empty cascades give an all-invalid vector") {
    const auto w = small_world(4);
    MetricContext ctx;
    ctx.net = &w.net;
    const auto m = compute_metrics(Cascade{}, simulate(w, 0.5, 1), ctx);
    for (bool v : m.valid)
        CHECK(!v);
    CHECK_THROWS_AS(compute_metrics(Cascade{}, Cascade{}, MetricContext{}), ValidationError);
}

TEST_CASE("compute_metrics: deterministic under the context seed") {
    const auto w = small_world(5);
    const auto sim = simulate(w, 0.7, 1), emp = simulate(w, 0.4, 2);
    MetricContext ctx;
    ctx.net = &w.net;
    ctx.ids = &w.ids;
    ctx.regions = &w.regions;
    ctx.rng_seed = 42;
    const auto a = compute_metrics(sim, emp, ctx);
    const auto b = compute_metrics(sim, emp, ctx);
    CHECK(a.value == b.value);
    CHECK(a.valid == b.valid);
}

TEST_CASE("growth features layout") {
    const auto net = testing::undirected(5, {{0, 1}, {1, 2}, {0, 2}, {3, 4}});
    const IdentityMatrix ids(CategorySchema::make({{"c", {"a", "b"}}}), 5,
                             {1, 0, 0, 1, 0.5, 0.5, 0, 0, 0, 0});
    const auto c = cascade_of({0}, {{0, 0}, {1, 2}, {0, 3}, {3, 4}});
    const auto f = growth_features(net, ids, c, 2);
    REQUIRE(f.size() == 3 * 2 + 2);
    CHECK(f[0] == 0);
    CHECK(f[1] == 2);
    CHECK(f[2] == 1);
    CHECK(f[3] == 2);
    CHECK(f[4] == 2);
    CHECK(f[5] == 1);
    CHECK(f[6] == doctest::Approx(0.5));
    CHECK(f[7] == doctest::Approx(0.5));
    const auto wide = growth_features(net, ids, c, 4);
    CHECK(wide[6] == 4);
    CHECK(wide[7] == 1);
    CHECK(wide[8] == 0);
    for (std::size_t k = 9; k < 12; ++k)
        CHECK(wide[k] == 0);
}

TEST_CASE("size regressors recover a linear size signal") {
    // Synthetic size = 50 + 3 * (sum of early-adopter degrees).
    std::mt19937_64 rng(8);
    std::vector<std::pair<NodeId, NodeId>> pairs;
    std::uniform_int_distribution<NodeId> node(0, 299);
    for (int k = 0; k < 1500; ++k) {
        const NodeId a = node(rng), b = node(rng) % (1 + node(rng) % 300);
        if (a != b)
            pairs.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    const auto net = testing::undirected(300, pairs);
    const auto ids = random_identity(300, rng);
    const std::size_t width = 10;

    FeatureRows x;
    std::vector<double> y;
    for (int k = 0; k < 500; ++k) {
        Cascade c;
        std::vector<NodeId> order(300);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::uint32_t t = 0; t < 20; ++t)
            c.events.push_back({order[t], t});
        c.seeds = {order[0]};
        c.steps = 19;
        double deg = 0.0;
        for (std::size_t j = 0; j < width; ++j)
            deg += static_cast<double>(net.out_degree(order[j]));
        x.push_back(growth_features(net, ids, c, width));
        y.push_back(50.0 + 3.0 * deg);
    }
    const FeatureRows train(x.begin(), x.begin() + 400), test(x.begin() + 400, x.end());
    const std::vector<double> ytrain(y.begin(), y.begin() + 400);

    auto mean_relative_error = [&](const SizeRegressor& r) {
        double total = 0.0;
        for (std::size_t k = 0; k < test.size(); ++k)
            total += *relative_error(r.predict(test[k]), y[400 + k]);
        return total / static_cast<double>(test.size());
    };
    RidgeRegressor ridge;
    ridge.fit(train, ytrain);
    CHECK(mean_relative_error(ridge) < 0.01);
    MlpRegressor mlp;
    mlp.fit(train, ytrain);
    CHECK(mean_relative_error(mlp) < 0.15);
    MlpRegressor again;
    again.fit(train, ytrain);
    CHECK(again.predict(test[0]) == mlp.predict(test[0]));
    CHECK_THROWS_AS(MlpRegressor().predict(test[0]), ValidationError);
}

TEST_CASE("metric csv row") {
    MetricVector m;
    m.value[0] = 0.25;
    m.valid[0] = true;
    m.value[8] = -0.5;
    m.valid[8] = true;
    std::ostringstream out;
    write_metric_header(out);
    write_metric_row(out, "tag", "network-only", 2, m);
    CHECK(out.str() == "hashtag,model,run,m1,m2,m3,m4,m5,m6,m7,m8,m9,m10,flags\n"
                       "tag,network-only,2,0.25,NA,NA,NA,NA,NA,NA,NA,-0.5,NA,1000000010\n");
}

TEST_CASE("comparison primitives: remaining hand cases") {
    CHECK(*relative_error(3.3, 3.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(*relative_error(0.0, 2.0) == 1.0);
    const std::vector<double> x{0.3, -1.2, 0.4, 2.0, 0.1};
    std::vector<double> neg(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        neg[i] = -x[i];
    CHECK(lee_l(x, x, SpatialWeights::identity(5)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lee_l(x, neg, SpatialWeights::identity(5)) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("propensity KL: identical multisets and separable sides") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z(0.0, 1.0);
    FeatureRows a, far;
    for (int i = 0; i < 200; ++i) {
        a.push_back({z(rng), z(rng)});
        far.push_back({z(rng) + 20.0, z(rng) + 20.0});
    }
    FeatureRows shuffled = a;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(propensity_kl(a, shuffled) <= 1e-3);
    CHECK(propensity_kl(a, far) > 1.0);
    // Fixed scores: the metric is the histogram KL of the fitted scores.
    const auto scores = propensity_scores(a, far);
    CHECK(propensity_kl(a, far) == doctest::Approx(histogram_kl(scores.empirical, scores.simulated, 20)).epsilon(1e-12));
}

TEST_CASE("compute_metrics: ten times the uses from the same adopters") {
    const auto w = small_world(6);
    Cascade emp, sim;
    emp.seeds = sim.seeds = {0};
    for (std::uint32_t t = 0; t < 200; ++t)
        emp.events.push_back({t % 20, t});
    for (std::uint32_t t = 0; t < 2000; ++t)
        sim.events.push_back({t % 20, t / 10});
    emp.steps = 199;
    sim.steps = 199;
    MetricContext ctx;
    ctx.net = &w.net;
    ctx.sample_rate = 0.1;
    const auto m = compute_metrics(sim, emp, ctx);
    CHECK(m.value[0] == doctest::Approx(0.0));
    CHECK(m.value[1] == 0.0);
}

TEST_CASE("compute_metrics: M9 matches a dense recomputation after a one-region shift") {
    // 4x4 region grid; adopters of region 5 move to region 6 in the simulation.
    const auto net = testing::undirected(160, [] {
        std::vector<std::pair<NodeId, NodeId>> p;
        for (NodeId i = 0; i + 1 < 160; ++i)
            p.emplace_back(i, i + 1);
        return p;
    }());
    RegionMap regions;
    regions.adjacency = rook(4, 4);
    for (std::size_t r = 0; r < 16; ++r)
        regions.region_names.push_back("r" + std::to_string(r));
    for (NodeId i = 0; i < 160; ++i)
        regions.region_of.push_back(i / 10);
    Cascade emp, sim;
    emp.seeds = sim.seeds = {0};
    std::uint32_t t = 0;
    for (NodeId i : {0u, 1u, 2u, 20u, 21u, 50u, 51u, 52u, 53u, 54u, 55u, 120u, 121u, 122u})
        emp.events.push_back({i, t++});
    t = 0;
    for (NodeId i : {0u, 1u, 2u, 20u, 21u, 60u, 61u, 62u, 63u, 64u, 65u, 120u, 121u, 122u})
        sim.events.push_back({i, t++});
    emp.steps = sim.steps = t - 1;
    MetricContext ctx;
    ctx.net = &net;
    ctx.regions = &regions;
    const auto self = compute_metrics(emp, emp, ctx);
    const auto shifted = compute_metrics(sim, emp, ctx);
    REQUIRE(shifted.valid[8]);
    CHECK(shifted.value[8] < self.value[8]);

    // Brute force on raw (unsmoothed) adoption counts per region.
    std::vector<double> x(16, 0.0), y(16, 0.0);
    for (const auto& e : sim.events)
        x[regions.region_of[e.agent]] += 1.0;
    for (const auto& e : emp.events)
        y[regions.region_of[e.agent]] += 1.0;
    const auto ws = regions.adjacency.row_standardized();
    const double raw = lee_dense(x, y, ws) / std::sqrt(lee_dense(x, x, ws) * lee_dense(y, y, ws));
    CHECK(raw < 1.0);
    // The metric itself, recomputed densely on the smoothed fractions.
    const std::vector<NodeId> sa = sim.adopters(), ea = emp.adopters();
    const auto xs = region_adoption(regions, sa, 0.5), ys = region_adoption(regions, ea, 0.5);
    CHECK(shifted.value[8] == doctest::Approx(lee_dense(xs, ys, ws) /
                                              std::sqrt(lee_dense(xs, xs, ws) * lee_dense(ys, ys, ws)))
                                  .epsilon(1e-12));
}
