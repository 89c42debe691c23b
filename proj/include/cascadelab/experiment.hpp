#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascadelab/calibrate.hpp"
#include "cascadelab/cmi.hpp"
#include "cascadelab/engine.hpp"
#include "cascadelab/metrics.hpp"
#include "cascadelab/worldio.hpp"

namespace cascadelab {

// ---------------------------------------------------------------------------
// Statistics helpers

// Ranks starting at 1, ties receive their average rank.
std::vector<double> average_ranks(std::span<const double> v);
// nullopt when either side is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct PairedTTest {
    double mean_difference = 0.0;
    double t = 0.0;
    double df = 0.0;
    // P(T >= t) under H0, i.e. the alternative mean(a - b) > 0.
    double p_greater = 1.0;
};
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Initial adopters

struct TimedUse {
    NodeId agent;
    double time;
};

struct InitialAdopters {
    double start_time = 0.0;
    std::vector<NodeId> seeds;
};

/// Splits usage into periods whose consecutive gaps are below `max_gap`;
/// the cascade starts at the first period with at least `min_burst` events,
/// and the seeds are its first `seed_count` distinct users.
InitialAdopters detect_initial_adopters(std::span<const TimedUse> usage, std::size_t min_burst,
                                        double max_gap, std::size_t seed_count = 10);

// ---------------------------------------------------------------------------
// Covariates

struct SemanticCovariates {
    std::size_t sparsity = 0;
    // nullopt when the similar-token frequency series is constant or empty.
    std::optional<double> growth;
};

using Embeddings = std::map<std::string, std::vector<double>>;
using FrequencySeries = std::map<std::string, std::vector<double>>;

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Tokens whose embedding has cosine >= threshold with the tag's embedding
/// and which were in use by `coinage_month` (all tokens when not given).
/// Growth is the Spearman correlation between month index and the summed
/// frequency of those tokens.
SemanticCovariates semantic_covariates(const Embeddings& embeddings, const FrequencySeries& series,
                                       const std::string& tag, double threshold = 0.3,
                                       std::optional<std::size_t> coinage_month = std::nullopt);

struct CovariateRow {
    std::string hashtag;
    std::string topic;
    double semantic_sparsity = 0.0;
    double semantic_growth = 0.0;
    // One entry per identity category, in schema order.
    std::vector<double> seed_similarity;
    double seed_proximity = 0.0;
    double median_seed_eigencentrality = 0.0;
};

/// Mean hop distance over seed pairs in the region adjacency graph; pairs in
/// disconnected regions are skipped.
double seed_proximity(const RegionMap& regions, std::span<const NodeId> seeds);

CovariateRow compute_covariates(const World& world, const HashtagSpec& spec,
                                std::span<const double> eigencentrality,
                                const std::string& topic = "",
                                const std::optional<SemanticCovariates>& semantic = std::nullopt);

/// Numeric design columns from covariate rows: topic one-hot with the first
/// level (in sorted order) as reference, every column standardised.
struct CovariateMatrix {
    std::vector<std::string> names;
    FeatureRows rows;
};
// `categories` names the identity categories in seed_similarity order.
CovariateMatrix covariate_matrix(std::span<const CovariateRow> rows,
                                 const std::vector<std::string>& categories, bool standardize = true);

// `hashtag,topic,empirical_size,semantic_sparsity,...` with one seed-similarity
// column per category.
void write_covariates_csv(std::ostream& out, std::span<const CovariateRow> rows,
                          std::span<const std::size_t> empirical_sizes,
                          const std::vector<std::string>& categories);
struct CovariateTable {
    std::vector<CovariateRow> rows;
    std::vector<std::size_t> empirical_sizes;
    std::vector<std::string> categories;
};
CovariateTable read_covariates_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Trials

struct EmpiricalHashtag {
    HashtagSpec spec;
    Cascade cascade;
    std::string topic;
};

struct TrialConfig {
    SimulationConfig sim;
    std::vector<Variant> models{std::begin(kAllVariants), std::end(kAllVariants)};
    std::size_t runs = 5;
    std::uint64_t master_seed = 0;
    unsigned jobs = 1;
    std::size_t growth_width = 100;
    std::size_t kl_bins = 20;
    double region_alpha = 0.5;
};

struct ModelOutcome {
    Variant variant = Variant::network_identity;
    CalibrationResult calibration;
    std::vector<Cascade> runs;
    std::vector<MetricVector> metrics;
    // Set when the model failed; runs and metrics are then empty.
    std::optional<std::string> error;
};

struct TrialResult {
    std::string hashtag;
    std::vector<ModelOutcome> models;
};

/// Everything a trial reads; shared read-only by concurrent trials.
struct TrialInputs {
    const World* world = nullptr;
    const std::vector<NodePositionFeatures>* positions = nullptr;
    const SizeRegressor* regressor = nullptr;
};

/// Calibrate each model once, run it `runs` times with derived seeds and
/// score every run against the empirical cascade.
TrialResult run_trial(const TrialInputs& inputs, const EmpiricalHashtag& hashtag,
                      const TrialConfig& cfg);

/// Trials for every hashtag, scheduled over cfg.jobs workers; results follow
/// the input order.
std::vector<TrialResult> run_experiment(const TrialInputs& inputs,
                                        std::span<const EmpiricalHashtag> hashtags,
                                        const TrialConfig& cfg);

std::vector<MetricRecord> metric_records(std::span<const TrialResult> trials);

/// Trains the growth regressor on the empirical cascades (target: their
/// size) plus `augment` engine cascades from random seeds and stickiness.
std::unique_ptr<SizeRegressor> train_size_regressor(const World& world,
                                                    std::span<const EmpiricalHashtag> hashtags,
                                                    const TrialConfig& cfg, std::size_t augment = 16,
                                                    MlpOptions options = {});

// ---------------------------------------------------------------------------
// Interaction regression

struct RegressionRow {
    std::vector<double> covariates;
    Variant model = Variant::network_identity;
    double cmi = 0.0;
};

struct RegressionResult {
    // intercept, then c_i, then c_i x identity-only, then c_i x network-only.
    std::vector<std::string> names;
    std::vector<double> coef;
    std::vector<double> se;
    // Design columns left out because they were linearly dependent on earlier ones.
    std::vector<std::string> dropped;
    std::size_t observations = 0;
    double residual_sd = 0.0;

    std::optional<double> coefficient(const std::string& name) const;
};

RegressionResult fit_interaction_regression(std::span<const RegressionRow> rows,
                                            const std::vector<std::string>& covariate_names);

void write_regression_csv(std::ostream& out, const RegressionResult& result);

// ---------------------------------------------------------------------------
// Combined models

struct ForestOptions {
    std::size_t trees = 200;
    std::size_t min_leaf = 1;
    std::size_t max_depth = 32;
    // Features tried per split; 0 means round(sqrt(features)).
    std::size_t mtry = 0;
    std::uint64_t seed = 1;
};

/// Bootstrap ensemble of Gini-split decision trees.
class RandomForest {
public:
    explicit RandomForest(ForestOptions options = {}) : options_(options) {}
    void fit(const FeatureRows& x, std::span<const int> labels);
    int predict(std::span<const double> x) const;

private:
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1, right = -1;
        int label = 0;
    };
    using Tree = std::vector<Node>;
    ForestOptions options_;
    std::vector<Tree> trees_;
    int classes_ = 0;
};

struct SelectionTrial {
    std::string hashtag;
    std::size_t run = 0;
    // This run's cmi per model.
    std::map<std::string, double> cmi;
    std::string optimal;
    std::string predicted;
};

struct CombinedModels {
    std::vector<SelectionTrial> trials;
    std::map<std::string, double> model_mean_cmi;
    double optimal_mean_cmi = 0.0;
    double predicted_mean_cmi = 0.0;
    // Mean over repeats of held-out accuracy.
    double accuracy = 0.0;
    // Share of the most common optimal label.
    double majority_baseline = 0.0;
    std::string majority_label;
    std::vector<std::string> notes;
};

/// Trials are (hashtag, run) pairs. Optimal picks each trial's best cmi;
/// predicted comes from a forest on the hashtag's features, cross-validated
/// with folds grouped by hashtag and repeated `repeats` times.
CombinedModels combined_models(const CmiReport& report,
                               const std::map<std::string, std::vector<double>>& features,
                               std::size_t folds = 5, std::size_t repeats = 10,
                               ForestOptions forest = {});

void write_selection_json(std::ostream& out, const CombinedModels& result);

} // namespace cascadelab
