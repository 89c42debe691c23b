#include "cascadelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <ostream>

#include "cascadelab/textio.hpp"

namespace cascadelab {

std::optional<double> log_ratio_error(double sim, double emp, double sample_rate) {
    if (!(sim > 0.0) || !(emp > 0.0) || !(sample_rate > 0.0))
        return std::nullopt;
    return std::abs(std::log10(sim * sample_rate / emp));
}

std::optional<double> relative_error(double sim, double emp) {
    if (emp == 0.0 || !std::isfinite(sim) || !std::isfinite(emp))
        return std::nullopt;
    return std::abs(sim - emp) / std::abs(emp);
}

double dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty())
        throw ValidationError("DTW needs two non-empty sequences");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(b.size() + 1, inf), cur(b.size() + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = std::abs(a[i - 1] - b[j - 1]) + best;
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<double> rebin(std::span<const double> series, std::size_t bins) {
    if (bins == 0)
        throw ValidationError("rebin needs at least one bin");
    const std::size_t len = series.size();
    std::vector<double> out(bins, 0.0);
    if (len == 0)
        return out;
    // Work on a common grid of len*bins units: cell i spans [i*bins, (i+1)*bins),
    // bin b spans [b*len, (b+1)*len).
    for (std::size_t i = 0; i < len; ++i) {
        const std::size_t lo = i * bins, hi = lo + bins;
        for (std::size_t b = lo / len; b < bins && b * len < hi; ++b) {
            const std::size_t overlap = std::min(hi, (b + 1) * len) - std::max(lo, b * len);
            out[b] += series[i] * static_cast<double>(overlap) / static_cast<double>(bins);
        }
    }
    return out;
}

std::size_t truncated_length(std::span<const double> curve, int window, double growth, int warmup) {
    if (window < 1)
        throw ValidationError("truncation window must be at least 1");
    std::vector<double> cumulative(curve.size());
    double total = 0.0;
    for (std::size_t t = 0; t < curve.size(); ++t)
        cumulative[t] = total += curve[t];
    const auto w = static_cast<std::size_t>(window);
    const auto start = std::max<std::size_t>(w, static_cast<std::size_t>(std::max(warmup, 0)));
    for (std::size_t t = std::max<std::size_t>(start, 1); t < curve.size(); ++t) {
        const double before = cumulative[t - w];
        if (cumulative[t] - before < growth * before)
            return t + 1;
    }
    return curve.size();
}

Cascade downsample(const Cascade& cascade, std::size_t events, std::uint64_t seed) {
    if (cascade.events.size() <= events)
        return cascade;
    Cascade out;
    out.seeds = cascade.seeds;
    out.steps = cascade.steps;
    out.events.reserve(events);
    Rng rng(seed);
    std::sample(cascade.events.begin(), cascade.events.end(), std::back_inserter(out.events),
                events, rng);
    return out;
}

namespace {

std::vector<NodeId> effective_seeds(const MetricContext& ctx, const Cascade& emp) {
    return ctx.seeds.empty() ? emp.seeds : ctx.seeds;
}

std::uint32_t majority_community(std::span<const NodePositionFeatures> pos,
                                 std::span<const NodeId> seeds) {
    std::map<std::uint32_t, std::size_t> votes;
    for (NodeId s : seeds)
        ++votes[pos[s].community];
    std::uint32_t best = 0;
    std::size_t best_votes = 0;
    for (auto [c, v] : votes)
        if (v > best_votes) {
            best = c;
            best_votes = v;
        }
    return best;
}

template <class F>
void record(MetricVector& m, std::size_t k, F&& compute) {
    try {
        std::optional<double> v = compute();
        if (v && std::isfinite(*v)) {
            m.value[k] = *v;
            m.valid[k] = true;
        }
    } catch (const ValidationError&) {
        // Left invalid.
    }
}

} // namespace

MetricVector compute_metrics(const Cascade& sim, const Cascade& emp, const MetricContext& ctx) {
    if (ctx.net == nullptr)
        throw ValidationError("metric context has no network");
    const Network& net = *ctx.net;
    MetricVector m;
    if (sim.events.empty() || emp.events.empty())
        return m;

    record(m, 0, [&] {
        return log_ratio_error(static_cast<double>(sim.uses()), static_cast<double>(emp.uses()),
                               ctx.sample_rate);
    });

    const std::size_t target = std::min(sim.uses(), emp.uses());
    const Cascade sim_ds = downsample(sim, target, derive_seed(ctx.rng_seed, "downsample-sim"));
    const Cascade emp_ds = downsample(emp, target, derive_seed(ctx.rng_seed, "downsample-emp"));
    const auto sim_adopters = sim_ds.adopters();
    const auto emp_adopters = emp_ds.adopters();
    const auto seeds = effective_seeds(ctx, emp);

    record(m, 1, [&] {
        return log_ratio_error(static_cast<double>(sim_adopters.size()),
                               static_cast<double>(emp_adopters.size()), 1.0);
    });

    record(m, 2, [&]() -> std::optional<double> {
        if (seeds.empty())
            return std::nullopt;
        const auto ds = nearest_seed_distances(net, sim_adopters, seeds);
        const auto de = nearest_seed_distances(net, emp_adopters, seeds);
        m.unreachable_sim = ds.unreachable;
        m.unreachable_emp = de.unreachable;
        if (!ds.mean || !de.mean)
            return std::nullopt;
        return relative_error(*ds.mean, *de.mean);
    });

    record(m, 3, [&]() -> std::optional<double> {
        const auto sim_curve = sim_ds.usage_curve();
        auto emp_curve = emp_ds.usage_curve();
        emp_curve.resize(truncated_length(emp_curve, ctx.stop_window, ctx.stop_growth, ctx.warmup));
        const std::size_t bins = std::min(sim_curve.size(), emp_curve.size());
        const auto a = rebin(sim_curve, bins);
        const auto b = rebin(emp_curve, bins);
        return dtw_distance(a, b);
    });

    record(m, 4, [&]() -> std::optional<double> {
        if (sim_adopters.empty() || emp_adopters.empty())
            return std::nullopt;
        return relative_error(
            static_cast<double>(sim_ds.uses()) / static_cast<double>(sim_adopters.size()),
            static_cast<double>(emp_ds.uses()) / static_cast<double>(emp_adopters.size()));
    });

    record(m, 5, [&] {
        return log_ratio_error(adopter_edge_density(net, sim_adopters),
                               adopter_edge_density(net, emp_adopters), 1.0);
    });

    record(m, 6, [&]() -> std::optional<double> {
        if (ctx.regressor == nullptr || ctx.ids == nullptr)
            return std::nullopt;
        const auto x = growth_features(net, *ctx.ids, sim_ds, ctx.growth_width);
        return relative_error(ctx.regressor->predict(x), static_cast<double>(emp.uses()));
    });

    record(m, 7, [&]() -> std::optional<double> {
        if (ctx.ids == nullptr)
            return std::nullopt;
        auto rows = [&](const std::vector<NodeId>& adopters) {
            FeatureRows out;
            out.reserve(adopters.size());
            for (NodeId a : adopters) {
                auto r = ctx.ids->row(a);
                out.emplace_back(r.begin(), r.end());
            }
            return out;
        };
        return propensity_kl(rows(emp_adopters), rows(sim_adopters), ctx.kl_bins);
    });

    record(m, 8, [&]() -> std::optional<double> {
        if (ctx.regions == nullptr)
            return std::nullopt;
        if (ctx.regions->region_of.size() != net.node_count())
            throw ValidationError("region map does not cover the network");
        const auto w = ctx.regions->adjacency.row_standardized();
        const auto x = region_adoption(*ctx.regions, sim_adopters, ctx.region_alpha);
        const auto y = region_adoption(*ctx.regions, emp_adopters, ctx.region_alpha);
        return lee_l_correlation(x, y, w);
    });

    record(m, 9, [&]() -> std::optional<double> {
        if (seeds.empty())
            return std::nullopt;
        std::vector<NodePositionFeatures> owned;
        const std::vector<NodePositionFeatures>* pos = ctx.positions;
        if (pos == nullptr) {
            owned = node_position_features(net, 0.85, 1e-10, ctx.rng_seed);
            pos = &owned;
        }
        const std::uint32_t home = majority_community(*pos, seeds);
        auto rows = [&](const std::vector<NodeId>& adopters) {
            FeatureRows out;
            out.reserve(adopters.size());
            for (NodeId a : adopters) {
                const auto& f = (*pos)[a];
                out.push_back({f.pagerank, f.eigencentrality, f.transitivity,
                               f.community == home ? 1.0 : 0.0});
            }
            return out;
        };
        return propensity_kl(rows(emp_adopters), rows(sim_adopters), ctx.kl_bins);
    });
    return m;
}

void write_metric_header(std::ostream& out) {
    out << "hashtag,model,run";
    for (std::size_t k = 1; k <= kMetricCount; ++k)
        out << ",m" << k;
    out << ",flags\n";
}

void write_metric_row(std::ostream& out, const std::string& hashtag, const std::string& model,
                      std::size_t run, const MetricVector& m) {
    out << hashtag << ',' << model << ',' << run;
    for (std::size_t k = 0; k < kMetricCount; ++k)
        out << ',' << (m.valid[k] ? format_double(m.value[k]) : std::string("NA"));
    out << ',';
    for (std::size_t k = 0; k < kMetricCount; ++k)
        out << (m.valid[k] ? '1' : '0');
    out << '\n';
}

} // namespace cascadelab
