#include "cascadelab/identity.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "cascadelab/graph.hpp"
#include "cascadelab/textio.hpp"

namespace cascadelab {

CategorySchema CategorySchema::make(std::vector<Category> categories) {
    CategorySchema schema{std::move(categories)};
    std::unordered_set<std::string> seen;
    for (const auto& cat : schema.categories) {
        if (cat.registers.empty())
            throw ValidationError("category '" + cat.name + "' has no registers");
        for (const auto& reg : cat.registers)
            if (!seen.insert(reg).second)
                throw ValidationError("duplicate register name '" + reg + "'");
    }
    if (seen.empty())
        throw ValidationError("identity schema needs at least one register");
    return schema;
}

std::size_t CategorySchema::dimension() const {
    std::size_t k = 0;
    for (const auto& cat : categories)
        k += cat.registers.size();
    return k;
}

std::vector<std::string> CategorySchema::register_names() const {
    std::vector<std::string> out;
    for (const auto& cat : categories)
        out.insert(out.end(), cat.registers.begin(), cat.registers.end());
    return out;
}

std::pair<std::size_t, std::size_t> CategorySchema::columns(std::string_view category) const {
    std::size_t begin = 0;
    for (const auto& cat : categories) {
        if (cat.name == category)
            return {begin, begin + cat.registers.size()};
        begin += cat.registers.size();
    }
    throw ValidationError("unknown identity category '" + std::string(category) + "'");
}

IdentityMatrix::IdentityMatrix(CategorySchema schema, std::size_t agents, std::vector<double> values)
    : schema_(std::move(schema)), agents_(agents), dim_(schema_.dimension()),
      values_(std::move(values)) {
    if (values_.size() != agents_ * dim_)
        throw ValidationError("identity matrix has " + std::to_string(values_.size()) +
                              " entries, expected " + std::to_string(agents_ * dim_));
    for (double v : values_)
        if (!(v >= 0.0 && v <= 1.0))
            throw ValidationError("identity entries must lie in [0,1]");
}

double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw ValidationError("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

HashtagIdentity infer_hashtag_identity(const IdentityMatrix& ids, std::span<const NodeId> seeds,
                                       double percentile) {
    if (seeds.empty())
        throw ValidationError("cannot infer hashtag identity from an empty seed list");
    if (!(percentile > 0.0 && percentile < 1.0))
        throw ValidationError("identity percentile must lie in (0,1)");
    for (NodeId s : seeds)
        if (s >= ids.agents())
            throw ValidationError("seed outside the identity matrix");

    HashtagIdentity out;
    std::vector<double> column(ids.agents());
    std::vector<double> seed_values(seeds.size());
    for (std::size_t k = 0; k < ids.dimension(); ++k) {
        for (std::size_t a = 0; a < ids.agents(); ++a)
            column[a] = ids.at(a, k);
        for (std::size_t s = 0; s < seeds.size(); ++s)
            seed_values[s] = ids.at(seeds[s], k);
        const double med = median(seed_values);
        if (med >= quantile(column, percentile)) {
            out.relevant_dims.push_back(k);
            out.identity.push_back(med);
        }
    }
    return out;
}

double log_similarity(std::span<const double> a, std::span<const double> b,
                      std::span<const std::size_t> dims) {
    double s = 0.0;
    for (std::size_t k : dims)
        s += std::log(std::max(1.0 - std::abs(a[k] - b[k]), kSimilarityFloor));
    return s;
}

namespace {

double hashtag_log_similarity(const IdentityMatrix& ids, NodeId agent, const HashtagSpec& spec) {
    double s = 0.0;
    for (std::size_t d = 0; d < spec.relevant_dims.size(); ++d) {
        const double diff = std::abs(spec.identity[d] - ids.at(agent, spec.relevant_dims[d]));
        s += std::log(std::max(1.0 - diff, kSimilarityFloor));
    }
    return s;
}

void check_spec(const IdentityMatrix& ids, const HashtagSpec& spec) {
    if (spec.identity.size() != spec.relevant_dims.size())
        throw ValidationError("hashtag identity must have one value per relevant dimension");
    for (std::size_t k : spec.relevant_dims)
        if (k >= ids.dimension())
            throw ValidationError("relevant dimension outside the identity schema");
    for (double v : spec.identity)
        if (!(v >= 0.0 && v <= 1.0))
            throw ValidationError("hashtag identity values must lie in [0,1]");
}

double literal_ratio(double numerator, double denominator) {
    if (denominator == 0.0)
        return numerator == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return numerator / denominator;
}

} // namespace

std::vector<double> delta_agent_hashtag_all(const IdentityMatrix& ids, const HashtagSpec& spec,
                                            SimilarityMode mode) {
    check_spec(ids, spec);
    const std::size_t n = ids.agents();
    std::vector<double> out(n, 1.0);
    if (spec.relevant_dims.empty())
        return out;

    if (mode == SimilarityMode::literal_ratio) {
        // Denominator: per-register best match over the population, summed.
        double denom = 0.0;
        for (std::size_t d = 0; d < spec.relevant_dims.size(); ++d) {
            double best = -std::numeric_limits<double>::infinity();
            for (NodeId a = 0; a < n; ++a) {
                const double diff = std::abs(spec.identity[d] - ids.at(a, spec.relevant_dims[d]));
                best = std::max(best, std::log(std::max(1.0 - diff, kSimilarityFloor)));
            }
            denom += best;
        }
        for (NodeId a = 0; a < n; ++a)
            out[a] = literal_ratio(hashtag_log_similarity(ids, a, spec), denom);
        return out;
    }

    double best = -std::numeric_limits<double>::infinity();
    for (NodeId a = 0; a < n; ++a) {
        out[a] = hashtag_log_similarity(ids, a, spec);
        best = std::max(best, out[a]);
    }
    for (auto& v : out)
        v = std::exp(v - best);
    return out;
}

double delta_agent_hashtag(const IdentityMatrix& ids, NodeId agent, const HashtagSpec& spec,
                           SimilarityMode mode) {
    if (agent >= ids.agents())
        throw ValidationError("agent outside the identity matrix");
    return delta_agent_hashtag_all(ids, spec, mode)[agent];
}

namespace {

// Fills out[pos] for all in-edges of i.
void edge_deltas_for(const Network& net, const IdentityMatrix& ids, NodeId i,
                     std::span<const std::size_t> dims, SimilarityMode mode, double* out) {
    auto srcs = net.in_neighbors(i);
    if (srcs.empty())
        return;
    if (dims.empty()) {
        std::fill(out, out + srcs.size(), 1.0);
        return;
    }
    if (mode == SimilarityMode::literal_ratio) {
        for (std::size_t e = 0; e < srcs.size(); ++e) {
            const NodeId j = srcs[e];
            double denom = 0.0;
            for (std::size_t k : dims) {
                double best = -std::numeric_limits<double>::infinity();
                for (NodeId p : srcs)
                    best = std::max(best, std::log(std::max(
                                              1.0 - std::abs(ids.at(p, k) - ids.at(j, k)),
                                              kSimilarityFloor)));
                denom += best;
            }
            out[e] = literal_ratio(log_similarity(ids.row(i), ids.row(j), dims), denom);
        }
        return;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < srcs.size(); ++e) {
        out[e] = log_similarity(ids.row(i), ids.row(srcs[e]), dims);
        best = std::max(best, out[e]);
    }
    for (std::size_t e = 0; e < srcs.size(); ++e)
        out[e] = std::exp(out[e] - best);
}

void check_dims(const IdentityMatrix& ids, std::span<const std::size_t> dims) {
    for (std::size_t k : dims)
        if (k >= ids.dimension())
            throw ValidationError("relevant dimension outside the identity schema");
}

} // namespace

double delta_edge(const Network& net, const IdentityMatrix& ids, NodeId i, NodeId j,
                  std::span<const std::size_t> dims, SimilarityMode mode) {
    check_dims(ids, dims);
    if (i >= net.node_count() || j >= net.node_count())
        throw ValidationError("delta_edge: node outside the network");
    auto srcs = net.in_neighbors(i);
    auto it = std::lower_bound(srcs.begin(), srcs.end(), j);
    if (it == srcs.end() || *it != j)
        throw ValidationError("delta_edge: '" + net.name(j) + "' is not a neighbour of '" +
                              net.name(i) + "'");
    std::vector<double> buf(srcs.size());
    edge_deltas_for(net, ids, i, dims, mode, buf.data());
    return buf[static_cast<std::size_t>(it - srcs.begin())];
}

std::vector<double> delta_edge_all(const Network& net, const IdentityMatrix& ids,
                                   std::span<const std::size_t> dims, SimilarityMode mode) {
    check_dims(ids, dims);
    if (ids.agents() != net.node_count())
        throw ValidationError("identity matrix rows do not match network size");
    std::vector<double> out(net.edge_count(), 1.0);
    for (NodeId i = 0; i < net.node_count(); ++i)
        edge_deltas_for(net, ids, i, dims, mode, out.data() + net.in_edge_begin(i));
    return out;
}

double seed_similarity(const IdentityMatrix& ids, std::span<const NodeId> seeds,
                       std::string_view category) {
    if (seeds.size() < 2)
        throw ValidationError("seed similarity needs at least 2 seeds");
    const auto [begin, end] = ids.schema().columns(category);
    const double width = static_cast<double>(end - begin);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < seeds.size(); ++a) {
        for (std::size_t b = a + 1; b < seeds.size(); ++b) {
            double diff = 0.0;
            for (std::size_t k = begin; k < end; ++k)
                diff += std::abs(ids.at(seeds[a], k) - ids.at(seeds[b], k));
            total += 1.0 - diff / width;
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

CategorySchema read_schema(std::istream& in) {
    std::vector<CategorySchema::Category> cats;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        auto fields = split_csv(t);
        if (fields.size() != 2)
            throw ValidationError("schema line " + std::to_string(line_no) +
                                  ": expected 'category,register'");
        if (line_no == 1 && fields[0] == "category" && fields[1] == "register")
            continue;
        if (cats.empty() || cats.back().name != fields[0]) {
            for (const auto& c : cats)
                if (c.name == fields[0])
                    throw ValidationError("schema: registers of category '" +
                                          std::string(fields[0]) + "' must be contiguous");
            cats.push_back({std::string(fields[0]), {}});
        }
        cats.back().registers.emplace_back(fields[1]);
    }
    return CategorySchema::make(std::move(cats));
}

void write_schema(std::ostream& out, const CategorySchema& schema) {
    out << "category,register\n";
    for (const auto& cat : schema.categories)
        for (const auto& reg : cat.registers)
            out << cat.name << ',' << reg << '\n';
}

IdentityMatrix read_identity_csv(std::istream& in, const CategorySchema& schema,
                                 const Network& net) {
    const auto registers = schema.register_names();
    const std::size_t k = registers.size();
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("identity file is empty");
    auto header = split_csv(trim(line));
    if (header.size() != k + 1 || header[0] != "node_id")
        throw ValidationError("identity header must be 'node_id' followed by the " +
                              std::to_string(k) + " schema registers");
    for (std::size_t c = 0; c < k; ++c)
        if (header[c + 1] != registers[c])
            throw ValidationError("identity column '" + std::string(header[c + 1]) +
                                  "' does not match schema register '" + registers[c] + "'");

    const std::size_t n = net.node_count();
    std::vector<double> values(n * k, 0.0);
    std::vector<char> seen(n, 0);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty())
            continue;
        auto fields = split_csv(t);
        if (fields.size() != k + 1)
            throw ValidationError("identity line " + std::to_string(line_no) +
                                  ": wrong number of columns");
        const auto id = net.find(fields[0]);
        if (!id)
            throw ValidationError("identity line " + std::to_string(line_no) + ": node '" +
                                  std::string(fields[0]) + "' not in network");
        if (seen[*id])
            throw ValidationError("identity: duplicate row for '" + std::string(fields[0]) + "'");
        seen[*id] = 1;
        for (std::size_t c = 0; c < k; ++c) {
            double v = 0.0;
            if (!parse_double(fields[c + 1], v) || v < 0.0 || v > 1.0)
                throw ValidationError("identity line " + std::to_string(line_no) +
                                      ": value must be a number in [0,1]");
            values[*id * k + c] = v;
        }
    }
    for (NodeId i = 0; i < n; ++i)
        if (!seen[i])
            throw ValidationError("identity: no row for node '" + net.name(i) + "'");
    return IdentityMatrix(schema, n, std::move(values));
}

void write_identity_csv(std::ostream& out, const IdentityMatrix& ids, const Network& net) {
    out << "node_id";
    for (const auto& r : ids.schema().register_names())
        out << ',' << r;
    out << '\n';
    for (NodeId i = 0; i < ids.agents(); ++i) {
        out << net.name(i);
        for (double v : ids.row(i))
            out << ',' << format_double(v);
        out << '\n';
    }
}

} // namespace cascadelab
