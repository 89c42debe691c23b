#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <set>

#include "cascadelab/experiment.hpp"
#include "cascadelab/textio.hpp"

namespace cascadelab {

InitialAdopters detect_initial_adopters(std::span<const TimedUse> usage, std::size_t min_burst,
                                        double max_gap, std::size_t seed_count) {
    if (seed_count == 0)
        throw ValidationError("seed_count must be at least 1");
    for (std::size_t k = 1; k < usage.size(); ++k)
        if (usage[k].time < usage[k - 1].time)
            throw ValidationError("usage events must be sorted by time");
    std::size_t begin = 0;
    while (begin < usage.size()) {
        std::size_t end = begin + 1;
        while (end < usage.size() && usage[end].time - usage[end - 1].time < max_gap)
            ++end;
        if (end - begin >= min_burst) {
            InitialAdopters out;
            out.start_time = usage[begin].time;
            std::set<NodeId> seen;
            for (std::size_t k = begin; k < usage.size() && out.seeds.size() < seed_count; ++k)
                if (seen.insert(usage[k].agent).second)
                    out.seeds.push_back(usage[k].agent);
            return out;
        }
        begin = end;
    }
    throw ValidationError("no usage period reaches " + std::to_string(min_burst) +
                          " events; the hashtag has no cascade start");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ValidationError("embeddings have different dimensions");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    if (aa == 0.0 || bb == 0.0)
        return 0.0;
    return ab / std::sqrt(aa * bb);
}

SemanticCovariates semantic_covariates(const Embeddings& embeddings, const FrequencySeries& series,
                                       const std::string& tag, double threshold,
                                       std::optional<std::size_t> coinage_month) {
    auto self = embeddings.find(tag);
    if (self == embeddings.end())
        throw ValidationError("hashtag '" + tag + "' has no embedding");
    SemanticCovariates out;
    std::vector<double> total;
    for (const auto& [token, vec] : embeddings) {
        if (token == tag || cosine_similarity(self->second, vec) < threshold)
            continue;
        auto s = series.find(token);
        if (coinage_month) {
            if (s == series.end())
                continue;
            double used = 0.0;
            for (std::size_t m = 0; m <= *coinage_month && m < s->second.size(); ++m)
                used += s->second[m];
            if (used <= 0.0)
                continue;
        }
        ++out.sparsity;
        if (s != series.end()) {
            if (total.size() < s->second.size())
                total.resize(s->second.size(), 0.0);
            for (std::size_t m = 0; m < s->second.size(); ++m)
                total[m] += s->second[m];
        }
    }
    std::vector<double> month(total.size());
    for (std::size_t m = 0; m < month.size(); ++m)
        month[m] = static_cast<double>(m);
    out.growth = spearman(month, total);
    return out;
}

double seed_proximity(const RegionMap& regions, std::span<const NodeId> seeds) {
    const std::size_t nr = regions.region_count();
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < seeds.size(); ++a) {
        const auto from = regions.region_of.at(seeds[a]);
        std::vector<int> dist(nr, -1);
        std::deque<std::size_t> queue{from};
        dist[from] = 0;
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (auto [v, w] : regions.adjacency.rows[u])
                if (w > 0.0 && dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
        }
        for (std::size_t b = a + 1; b < seeds.size(); ++b) {
            const int d = dist[regions.region_of.at(seeds[b])];
            if (d >= 0) {
                sum += d;
                ++pairs;
            }
        }
    }
    return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

CovariateRow compute_covariates(const World& world, const HashtagSpec& spec,
                                std::span<const double> eigencentrality, const std::string& topic,
                                const std::optional<SemanticCovariates>& semantic) {
    if (spec.seeds.empty())
        throw ValidationError("hashtag '" + spec.tag + "' has no seeds");
    CovariateRow row;
    row.hashtag = spec.tag;
    row.topic = topic;
    if (semantic) {
        row.semantic_sparsity = static_cast<double>(semantic->sparsity);
        row.semantic_growth = semantic->growth.value_or(0.0);
    }
    for (const auto& cat : world.ids.schema().categories)
        row.seed_similarity.push_back(spec.seeds.size() >= 2
                                          ? seed_similarity(world.ids, spec.seeds, cat.name)
                                          : 1.0);
    row.seed_proximity = seed_proximity(world.regions, spec.seeds);
    std::vector<double> eig;
    for (NodeId s : spec.seeds)
        eig.push_back(eigencentrality[s]);
    row.median_seed_eigencentrality = median(eig);
    return row;
}

CovariateMatrix covariate_matrix(std::span<const CovariateRow> rows,
                                 const std::vector<std::string>& categories, bool standardize) {
    CovariateMatrix out;
    out.names = {"semantic_sparsity", "semantic_growth"};
    for (const auto& cat : categories)
        out.names.push_back("seed_similarity_" + cat);
    out.names.push_back("seed_proximity");
    out.names.push_back("median_seed_eigencentrality");
    std::set<std::string> levels;
    for (const auto& r : rows)
        levels.insert(r.topic);
    std::vector<std::string> topic_levels(levels.begin(), levels.end());
    // The first level is the reference category.
    for (std::size_t k = 1; k < topic_levels.size(); ++k)
        out.names.push_back("topic_" + topic_levels[k]);

    for (const auto& r : rows) {
        if (r.seed_similarity.size() != categories.size())
            throw ValidationError("covariate row for '" + r.hashtag +
                                  "' does not match the identity schema");
        std::vector<double> x{r.semantic_sparsity, r.semantic_growth};
        x.insert(x.end(), r.seed_similarity.begin(), r.seed_similarity.end());
        x.push_back(r.seed_proximity);
        x.push_back(r.median_seed_eigencentrality);
        for (std::size_t k = 1; k < topic_levels.size(); ++k)
            x.push_back(r.topic == topic_levels[k] ? 1.0 : 0.0);
        out.rows.push_back(std::move(x));
    }
    if (standardize && !out.rows.empty()) {
        const double n = static_cast<double>(out.rows.size());
        for (std::size_t c = 0; c < out.names.size(); ++c) {
            double mean = 0.0, ss = 0.0;
            for (const auto& x : out.rows)
                mean += x[c];
            mean /= n;
            for (const auto& x : out.rows)
                ss += (x[c] - mean) * (x[c] - mean);
            const double sd = std::sqrt(ss / n);
            for (auto& x : out.rows)
                x[c] = sd > 0.0 ? (x[c] - mean) / sd : 0.0;
        }
    }
    return out;
}

void write_covariates_csv(std::ostream& out, std::span<const CovariateRow> rows,
                          std::span<const std::size_t> empirical_sizes,
                          const std::vector<std::string>& categories) {
    if (empirical_sizes.size() != rows.size())
        throw ValidationError("one empirical size per covariate row is required");
    out << "hashtag,topic,empirical_size,semantic_sparsity,semantic_growth";
    for (const auto& c : categories)
        out << ",seed_similarity_" << c;
    out << ",seed_proximity,median_seed_eigencentrality\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.topic.find(',') != std::string::npos || r.hashtag.find(',') != std::string::npos)
            throw ValidationError("hashtag and topic labels may not contain commas");
        out << r.hashtag << ',' << r.topic << ',' << empirical_sizes[i] << ','
            << format_double(r.semantic_sparsity) << ',' << format_double(r.semantic_growth);
        for (double s : r.seed_similarity)
            out << ',' << format_double(s);
        out << ',' << format_double(r.seed_proximity) << ','
            << format_double(r.median_seed_eigencentrality) << '\n';
    }
}

CovariateTable read_covariates_csv(std::istream& in) {
    CovariateTable table;
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("covariate table is empty");
    const auto header = split_csv(line);
    const std::string prefix = "seed_similarity_";
    if (header.size() < 7 || header[0] != "hashtag" || header[1] != "topic" ||
        header[2] != "empirical_size")
        throw ValidationError("covariate table header must start with hashtag,topic,empirical_size");
    for (std::size_t k = 5; k + 2 < header.size(); ++k) {
        if (header[k].substr(0, prefix.size()) != prefix)
            throw ValidationError("unexpected covariate column '" + std::string(header[k]) + "'");
        table.categories.emplace_back(header[k].substr(prefix.size()));
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto f = split_csv(line);
        if (f.size() != header.size())
            throw ValidationError("covariate table line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields");
        auto number = [&](std::size_t k) {
            double v = 0.0;
            if (!parse_double(f[k], v))
                throw ValidationError("covariate table line " + std::to_string(line_no) +
                                      ": column '" + std::string(header[k]) + "' is not a number");
            return v;
        };
        CovariateRow r;
        r.hashtag = std::string(f[0]);
        r.topic = std::string(f[1]);
        std::size_t size = 0;
        if (!parse_size(f[2], size))
            throw ValidationError("covariate table line " + std::to_string(line_no) +
                                  ": empirical_size is not a count");
        r.semantic_sparsity = number(3);
        r.semantic_growth = number(4);
        for (std::size_t k = 5; k + 2 < f.size(); ++k)
            r.seed_similarity.push_back(number(k));
        r.seed_proximity = number(f.size() - 2);
        r.median_seed_eigencentrality = number(f.size() - 1);
        table.rows.push_back(std::move(r));
        table.empirical_sizes.push_back(size);
    }
    return table;
}

} // namespace cascadelab
