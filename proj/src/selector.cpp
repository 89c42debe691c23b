#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <limits>
#include <set>

#include <json.hpp>

#include "cascadelab/experiment.hpp"

namespace cascadelab {

namespace {

int majority(std::span<const int> counts) {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

} // namespace

void RandomForest::fit(const FeatureRows& x, std::span<const int> labels) {
    if (x.empty() || x.size() != labels.size())
        throw ValidationError("forest needs one label per non-empty feature row");
    const std::size_t p = x.front().size();
    for (const auto& row : x)
        if (row.size() != p)
            throw ValidationError("forest features have inconsistent widths");
    classes_ = *std::max_element(labels.begin(), labels.end()) + 1;
    if (*std::min_element(labels.begin(), labels.end()) < 0)
        throw ValidationError("forest labels must be non-negative");
    const std::size_t mtry = options_.mtry > 0
                                 ? std::min(options_.mtry, p)
                                 : std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(p))));
    trees_.clear();
    Rng rng(options_.seed);
    std::vector<std::size_t> features(p);
    std::iota(features.begin(), features.end(), std::size_t{0});

    for (std::size_t t = 0; t < options_.trees; ++t) {
        std::vector<std::size_t> sample(x.size());
        std::uniform_int_distribution<std::size_t> draw(0, x.size() - 1);
        for (auto& s : sample)
            s = draw(rng);
        Tree tree;
        // Explicit stack of (node, sample range, depth).
        struct Task {
            int node;
            std::size_t lo, hi, depth;
        };
        tree.push_back({});
        std::vector<Task> stack{{0, 0, sample.size(), 0}};
        while (!stack.empty()) {
            const Task task = stack.back();
            stack.pop_back();
            std::vector<int> counts(static_cast<std::size_t>(classes_), 0);
            for (std::size_t k = task.lo; k < task.hi; ++k)
                ++counts[static_cast<std::size_t>(labels[sample[k]])];
            const int label = majority(counts);
            tree[static_cast<std::size_t>(task.node)].label = label;
            const std::size_t size = task.hi - task.lo;
            if (counts[static_cast<std::size_t>(label)] == static_cast<int>(size) ||
                size < 2 * options_.min_leaf || task.depth >= options_.max_depth)
                continue;

            auto gini = [](const std::vector<int>& c, double total) {
                double g = 1.0;
                for (int v : c)
                    g -= (v / total) * (v / total);
                return g;
            };
            const double parent = gini(counts, static_cast<double>(size));
            double best_score = parent - 1e-12;
            int best_feature = -1;
            double best_threshold = 0.0;
            std::shuffle(features.begin(), features.end(), rng);
            std::vector<std::size_t> idx(sample.begin() + static_cast<std::ptrdiff_t>(task.lo),
                                         sample.begin() + static_cast<std::ptrdiff_t>(task.hi));
            for (std::size_t f = 0; f < mtry; ++f) {
                const std::size_t feat = features[f];
                std::sort(idx.begin(), idx.end(),
                          [&](auto a, auto b) { return x[a][feat] < x[b][feat]; });
                std::vector<int> left(counts.size(), 0), right = counts;
                for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
                    const auto lab = static_cast<std::size_t>(labels[idx[k]]);
                    ++left[lab];
                    --right[lab];
                    const double a = x[idx[k]][feat], b = x[idx[k + 1]][feat];
                    if (a == b || k + 1 < options_.min_leaf || idx.size() - k - 1 < options_.min_leaf)
                        continue;
                    const double nl = static_cast<double>(k + 1);
                    const double nr = static_cast<double>(idx.size() - k - 1);
                    const double score =
                        (nl * gini(left, nl) + nr * gini(right, nr)) / static_cast<double>(size);
                    if (score < best_score) {
                        best_score = score;
                        best_feature = static_cast<int>(feat);
                        best_threshold = a + (b - a) / 2.0;
                    }
                }
            }
            if (best_feature < 0)
                continue;
            const auto mid = std::partition(
                sample.begin() + static_cast<std::ptrdiff_t>(task.lo),
                sample.begin() + static_cast<std::ptrdiff_t>(task.hi), [&](std::size_t s) {
                    return x[s][static_cast<std::size_t>(best_feature)] <= best_threshold;
                });
            const auto split = static_cast<std::size_t>(mid - sample.begin());
            const int left_id = static_cast<int>(tree.size());
            tree.push_back({});
            tree.push_back({});
            auto& node = tree[static_cast<std::size_t>(task.node)];
            node.feature = best_feature;
            node.threshold = best_threshold;
            node.left = left_id;
            node.right = left_id + 1;
            stack.push_back({left_id, task.lo, split, task.depth + 1});
            stack.push_back({left_id + 1, split, task.hi, task.depth + 1});
        }
        trees_.push_back(std::move(tree));
    }
}

int RandomForest::predict(std::span<const double> x) const {
    if (trees_.empty())
        throw ValidationError("forest has not been fitted");
    std::vector<int> votes(static_cast<std::size_t>(classes_), 0);
    for (const auto& tree : trees_) {
        int n = 0;
        while (tree[static_cast<std::size_t>(n)].feature >= 0) {
            const auto& node = tree[static_cast<std::size_t>(n)];
            n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
        }
        ++votes[static_cast<std::size_t>(tree[static_cast<std::size_t>(n)].label)];
    }
    return majority(votes);
}

CombinedModels combined_models(const CmiReport& report,
                               const std::map<std::string, std::vector<double>>& features,
                               std::size_t folds, std::size_t repeats, ForestOptions forest) {
    if (folds < 2)
        throw ValidationError("cross-validation needs at least 2 folds");
    if (repeats < 1)
        throw ValidationError("cross-validation needs at least 1 repeat");
    CombinedModels out;
    std::set<std::string> model_set;
    std::map<std::pair<std::string, std::size_t>, std::map<std::string, double>> grouped;
    for (const auto& row : report.rows) {
        model_set.insert(row.model);
        if (row.cmi)
            grouped[{row.hashtag, row.run}][row.model] = *row.cmi;
    }
    const std::vector<std::string> models(model_set.begin(), model_set.end());
    std::size_t incomplete = 0;
    for (auto& [key, cmi] : grouped) {
        if (cmi.size() != models.size()) {
            ++incomplete;
            continue;
        }
        SelectionTrial t;
        t.hashtag = key.first;
        t.run = key.second;
        t.cmi = cmi;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& m : models)
            if (cmi[m] > best) {
                best = cmi[m];
                t.optimal = m;
            }
        out.trials.push_back(std::move(t));
    }
    if (incomplete > 0)
        out.notes.push_back(std::to_string(incomplete) +
                            " trials without a cmi for every model were left out");
    if (out.trials.empty())
        throw ValidationError("no trial has a cmi for every model");

    const double nt = static_cast<double>(out.trials.size());
    for (const auto& m : models) {
        double s = 0.0;
        for (const auto& t : out.trials)
            s += t.cmi.at(m);
        out.model_mean_cmi[m] = s / nt;
    }
    std::map<std::string, std::size_t> label_counts;
    for (const auto& t : out.trials) {
        out.optimal_mean_cmi += t.cmi.at(t.optimal);
        ++label_counts[t.optimal];
    }
    out.optimal_mean_cmi /= nt;
    for (const auto& [m, c] : label_counts)
        if (static_cast<double>(c) / nt > out.majority_baseline) {
            out.majority_baseline = static_cast<double>(c) / nt;
            out.majority_label = m;
        }

    std::vector<std::string> hashtags;
    for (const auto& t : out.trials)
        if (hashtags.empty() || hashtags.back() != t.hashtag)
            hashtags.push_back(t.hashtag);
    if (hashtags.size() < folds)
        throw ValidationError("fewer hashtags (" + std::to_string(hashtags.size()) + ") than folds (" +
                              std::to_string(folds) + ")");
    for (const auto& h : hashtags)
        if (!features.count(h))
            throw ValidationError("no selector features for hashtag '" + h + "'");

    auto label_of = [&](const std::string& m) {
        return static_cast<int>(std::find(models.begin(), models.end(), m) - models.begin());
    };
    std::vector<std::vector<int>> votes(out.trials.size(), std::vector<int>(models.size(), 0));
    double accuracy = 0.0, predicted_cmi = 0.0;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        std::vector<std::string> order = hashtags;
        Rng rng(derive_seed(forest.seed, "folds", rep));
        std::shuffle(order.begin(), order.end(), rng);
        std::map<std::string, std::size_t> fold_of;
        for (std::size_t k = 0; k < order.size(); ++k)
            fold_of[order[k]] = k % folds;
        std::size_t correct = 0;
        double cmi_sum = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            FeatureRows x;
            std::vector<int> y;
            for (const auto& t : out.trials)
                if (fold_of[t.hashtag] != f) {
                    x.push_back(features.at(t.hashtag));
                    y.push_back(label_of(t.optimal));
                }
            ForestOptions opts = forest;
            opts.seed = derive_seed(forest.seed, "forest", rep, f);
            RandomForest model(opts);
            model.fit(x, y);
            for (std::size_t i = 0; i < out.trials.size(); ++i) {
                const auto& t = out.trials[i];
                if (fold_of[t.hashtag] != f)
                    continue;
                const int guess = model.predict(features.at(t.hashtag));
                ++votes[i][static_cast<std::size_t>(guess)];
                const auto& name = models[static_cast<std::size_t>(guess)];
                correct += name == t.optimal;
                cmi_sum += t.cmi.at(name);
            }
        }
        accuracy += static_cast<double>(correct) / nt;
        predicted_cmi += cmi_sum / nt;
    }
    out.accuracy = accuracy / static_cast<double>(repeats);
    out.predicted_mean_cmi = predicted_cmi / static_cast<double>(repeats);
    for (std::size_t i = 0; i < out.trials.size(); ++i)
        out.trials[i].predicted = models[static_cast<std::size_t>(majority(votes[i]))];
    return out;
}

void write_selection_json(std::ostream& out, const CombinedModels& result) {
    nlohmann::json j;
    j["accuracy"] = result.accuracy;
    j["majority_baseline"] = result.majority_baseline;
    j["majority_label"] = result.majority_label;
    j["optimal_mean_cmi"] = result.optimal_mean_cmi;
    j["predicted_mean_cmi"] = result.predicted_mean_cmi;
    j["model_mean_cmi"] = result.model_mean_cmi;
    j["notes"] = result.notes;
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : result.trials)
        trials.push_back({{"hashtag", t.hashtag},
                          {"run", t.run},
                          {"optimal", t.optimal},
                          {"predicted", t.predicted},
                          {"cmi", t.cmi}});
    j["trials"] = trials;
    out << j.dump(2) << '\n';
}

} // namespace cascadelab
