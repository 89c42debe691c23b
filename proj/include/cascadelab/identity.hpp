#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadelab/common.hpp"

namespace cascadelab {

class Network;

/// Identity categories (race, language, ...) and their registers, in the
/// column order of the identity matrix.
struct CategorySchema {
    struct Category {
        std::string name;
        std::vector<std::string> registers;
    };
    std::vector<Category> categories;

    // Validates K >= 1 and unique register names.
    static CategorySchema make(std::vector<Category> categories);

    std::size_t dimension() const;
    std::vector<std::string> register_names() const;
    // Half-open column range of a category; throws ValidationError if unknown.
    std::pair<std::size_t, std::size_t> columns(std::string_view category) const;
};

/// Agents x K matrix of register affiliations in [0,1], row-major.
class IdentityMatrix {
public:
    IdentityMatrix() = default;
    IdentityMatrix(CategorySchema schema, std::size_t agents, std::vector<double> values);

    const CategorySchema& schema() const { return schema_; }
    std::size_t agents() const { return agents_; }
    std::size_t dimension() const { return dim_; }
    double at(std::size_t agent, std::size_t k) const { return values_[agent * dim_ + k]; }
    std::span<const double> row(std::size_t agent) const {
        return {values_.data() + agent * dim_, dim_};
    }
    const std::vector<double>& values() const { return values_; }

private:
    CategorySchema schema_;
    std::size_t agents_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

/// What a hashtag is seeded with and what it signals.
struct HashtagSpec {
    std::string tag;
    std::vector<NodeId> seeds;
    // D_rel and the hashtag's position on each of those registers.
    std::vector<std::size_t> relevant_dims;
    std::vector<double> identity;
    std::size_t empirical_size = 0;
    double sample_rate = 1.0;
};

struct HashtagIdentity {
    std::vector<std::size_t> relevant_dims;
    std::vector<double> identity;
};

/// A register is signalled when the median seed sits at or above the given
/// population quantile of that register; the signalled value is that median.
HashtagIdentity infer_hashtag_identity(const IdentityMatrix& ids, std::span<const NodeId> seeds,
                                       double percentile = 0.75);

// Lower bound on 1 - |distance| before taking logs.
inline constexpr double kSimilarityFloor = 1e-6;

enum class SimilarityMode {
    // exp(score - max score): bounded in (0,1], the normaliser maps to 1.
    normalized,
    // Plain ratio of log-sums. Not a
    // probability (it is >= 1 and undefined at exact matches); diagnostic only.
    literal_ratio,
};

// Sum over dims of log(max(1 - |a_k - b_k|, floor)).
double log_similarity(std::span<const double> a, std::span<const double> b,
                      std::span<const std::size_t> dims);

/// delta_ih for every agent (one pass to find the normaliser).
std::vector<double> delta_agent_hashtag_all(const IdentityMatrix& ids, const HashtagSpec& spec,
                                            SimilarityMode mode = SimilarityMode::normalized);
double delta_agent_hashtag(const IdentityMatrix& ids, NodeId agent, const HashtagSpec& spec,
                           SimilarityMode mode = SimilarityMode::normalized);

/// delta between agent i and its in-neighbour j, normalised over i's
/// in-neighbours. Throws ValidationError if j is not an in-neighbour of i.
double delta_edge(const Network& net, const IdentityMatrix& ids, NodeId i, NodeId j,
                  std::span<const std::size_t> dims,
                  SimilarityMode mode = SimilarityMode::normalized);

/// delta_edge for every in-edge, indexed by the network's in-edge position.
std::vector<double> delta_edge_all(const Network& net, const IdentityMatrix& ids,
                                   std::span<const std::size_t> dims,
                                   SimilarityMode mode = SimilarityMode::normalized);

/// Mean over unordered seed pairs of 1 - mean |difference| across the
/// category's registers.
double seed_similarity(const IdentityMatrix& ids, std::span<const NodeId> seeds,
                       std::string_view category);

// Linear-interpolation quantile (q in [0,1]) of a copy of the values.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

// `category,register` lines; an optional header line is accepted.
CategorySchema read_schema(std::istream& in);
void write_schema(std::ostream& out, const CategorySchema& schema);
// Header `node_id,<register names...>`; rows are reordered to network
// indices and every network node must be present.
IdentityMatrix read_identity_csv(std::istream& in, const CategorySchema& schema,
                                 const Network& net);
void write_identity_csv(std::ostream& out, const IdentityMatrix& ids, const Network& net);

} // namespace cascadelab
