#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cascadelab/common.hpp"
#include "cascadelab/engine.hpp"
#include "cascadelab/graph.hpp"
#include "cascadelab/identity.hpp"

namespace cascadelab {

using FeatureRows = std::vector<std::vector<double>>;

// ---------------------------------------------------------------------------
// Comparison primitives

/// |log10(sim * sample_rate / emp)|; nullopt when either value is not positive.
std::optional<double> log_ratio_error(double sim, double emp, double sample_rate = 1.0);

/// |sim - emp| / |emp|; nullopt when emp is zero.
std::optional<double> relative_error(double sim, double emp);

/// Classic dynamic time warping with |a_i - b_j| local cost and no window.
double dtw_distance(std::span<const double> a, std::span<const double> b);

/// Redistributes a series onto `bins` equal-width intervals, splitting mass
/// of cells that straddle a boundary. Total mass is preserved.
std::vector<double> rebin(std::span<const double> series, std::size_t bins);

/// Length of a usage curve after cutting its tail at the first step where
/// cumulative usage grew by less than `growth` over `window` steps (checked
/// only from `warmup` on). Returns the full length if it never fires.
std::size_t truncated_length(std::span<const double> curve, int window, double growth, int warmup);

// ---------------------------------------------------------------------------
// Propensity scores and KL divergence

struct PropensityScores {
    std::vector<double> empirical;
    std::vector<double> simulated;
};

/// Ridge-penalised logistic regression of the source label (1 = simulated) on
/// pooled, standardised features; returns every row's fitted probability.
/// Throws ValidationError with fewer than 2 rows on either side.
PropensityScores propensity_scores(const FeatureRows& empirical, const FeatureRows& simulated,
                                   double ridge = 1.0);

/// KL(p || q) between histograms of scores on `bins` equal-width bins of
/// [0,1], each bin count incremented by `smoothing` before normalising.
double histogram_kl(std::span<const double> p_scores, std::span<const double> q_scores,
                    std::size_t bins, double smoothing = 1e-6);

/// KL(empirical || simulated) of propensity-score histograms.
double propensity_kl(const FeatureRows& empirical, const FeatureRows& simulated,
                     std::size_t bins = 20);

// ---------------------------------------------------------------------------
// Spatial correlation

/// Sparse spatial weights; rows[i] lists (j, w_ij).
struct SpatialWeights {
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;

    std::size_t size() const { return rows.size(); }
    static SpatialWeights identity(std::size_t n);
    // Each non-empty row scaled to sum to one.
    SpatialWeights row_standardized() const;
};

/// Lee's L bivariate spatial association.
double lee_l(std::span<const double> x, std::span<const double> y, const SpatialWeights& w);

/// L_xy / sqrt(L_xx * L_yy): the correlation of the spatially smoothed
/// series, equal to 1 when x == y for any weights.
double lee_l_correlation(std::span<const double> x, std::span<const double> y,
                         const SpatialWeights& w);

/// Region of every node plus region adjacency.
struct RegionMap {
    std::vector<std::string> region_names;
    std::vector<std::uint32_t> region_of;
    // Symmetric adjacency weights between regions (not standardised).
    SpatialWeights adjacency;

    std::size_t region_count() const { return region_names.size(); }
};

// `node_id,region` and `region_a,region_b,weight` files (optional headers).
RegionMap read_region_map(std::istream& regions, std::istream& adjacency, const Network& net);
void write_region_map(std::ostream& regions, std::ostream& adjacency, const RegionMap& map,
                      const Network& net);

/// Smoothed adoption fraction per region: (adopters + alpha) / (agents + 2 alpha).
std::vector<double> region_adoption(const RegionMap& map, std::span<const NodeId> adopters,
                                    double alpha = 0.5);

// ---------------------------------------------------------------------------
// Cascade size regression (growth predictivity)

class SizeRegressor {
public:
    virtual ~SizeRegressor() = default;
    virtual void fit(const FeatureRows& x, std::span<const double> y) = 0;
    virtual double predict(std::span<const double> x) const = 0;
};

struct MlpOptions {
    std::size_t hidden = 100;
    std::size_t epochs = 400;
    double learning_rate = 1e-3;
    double l2 = 1e-4;
    std::size_t batch = 32;
    std::uint64_t seed = 1;
};

/// One hidden layer of rectified units trained with Adam on standardised
/// inputs and target.
class MlpRegressor final : public SizeRegressor {
public:
    explicit MlpRegressor(MlpOptions options = {});
    ~MlpRegressor() override;
    MlpRegressor(MlpRegressor&&) noexcept;
    MlpRegressor& operator=(MlpRegressor&&) noexcept;

    void fit(const FeatureRows& x, std::span<const double> y) override;
    double predict(std::span<const double> x) const override;

private:
    struct Model;
    MlpOptions options_;
    std::unique_ptr<Model> model_;
};

/// Closed-form ridge regression on standardised inputs; deterministic fallback.
class RidgeRegressor final : public SizeRegressor {
public:
    explicit RidgeRegressor(double lambda = 1e-3) : lambda_(lambda) {}
    void fit(const FeatureRows& x, std::span<const double> y) override;
    double predict(std::span<const double> x) const override;

private:
    double lambda_;
    std::vector<double> mean_, scale_, coef_;
    double intercept_ = 0.0;
};

/// Features of the first `width` adopters: first-use timestep, network
/// degree, degree inside the early-adopter subgraph (zero padded), followed by
/// the early adopters' mean identity per register.
std::vector<double> growth_features(const Network& net, const IdentityMatrix& ids,
                                    const Cascade& cascade, std::size_t width = 100);

// ---------------------------------------------------------------------------
// The ten cascade comparisons

inline constexpr std::size_t kMetricCount = 10;

struct MetricVector {
    std::array<double, kMetricCount> value{};
    std::array<bool, kMetricCount> valid{};
    // Unreachable adopters dropped from the structural-virality means.
    std::size_t unreachable_sim = 0;
    std::size_t unreachable_emp = 0;
};

struct MetricContext {
    const Network* net = nullptr;
    const IdentityMatrix* ids = nullptr;
    const RegionMap* regions = nullptr;
    // Per-node positions on `net`; computed on demand when null.
    const std::vector<NodePositionFeatures>* positions = nullptr;
    // Null leaves M7 flagged invalid.
    const SizeRegressor* regressor = nullptr;
    std::vector<NodeId> seeds;
    double sample_rate = 1.0;
    std::uint64_t rng_seed = 0;
    std::size_t growth_width = 100;
    std::size_t kl_bins = 20;
    double region_alpha = 0.5;
    // Stopping rule reused to truncate the empirical usage curve.
    int stop_window = 10;
    double stop_growth = 0.01;
    int warmup = 100;
};

/// Uniform sample of `events` usage events without replacement, kept in
/// time order. Returns the cascade unchanged when it is not larger.
Cascade downsample(const Cascade& cascade, std::size_t events, std::uint64_t seed);

/// M1..M10 for a simulated against an empirical cascade. The larger cascade
/// is downsampled to the smaller's event count for M2..M10. A metric that
/// cannot be computed is flagged invalid; the vector is always returned.
MetricVector compute_metrics(const Cascade& sim, const Cascade& emp, const MetricContext& ctx);

// `hashtag,model,run,m1..m10,flags` where flags is a 10-character 0/1 string.
void write_metric_header(std::ostream& out);
void write_metric_row(std::ostream& out, const std::string& hashtag, const std::string& model,
                      std::size_t run, const MetricVector& m);

} // namespace cascadelab
