#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascadelab/metrics.hpp"

namespace cascadelab {

/// One simulated run's metric vector and its labels.
struct MetricRecord {
    std::string hashtag;
    std::string model;
    std::size_t run = 0;
    MetricVector metrics;
};

struct CmiRow {
    std::string hashtag;
    std::string model;
    std::size_t run = 0;
    std::array<double, kMetricCount> z{};
    std::array<bool, kMetricCount> valid{};
    std::optional<double> cmi;
    // Popularity (M1-M3), growth (M4-M7) and adopter (M8-M10) means.
    std::optional<double> popularity;
    std::optional<double> growth;
    std::optional<double> adopters;
};

struct CmiReport {
    std::vector<CmiRow> rows;
    std::vector<std::string> notes;
};

enum class CmiPooling { corpus, per_hashtag };

// +1 where larger raw values mean a better fit (M9), -1 for errors and divergences.
int metric_direction(std::size_t metric);

// Half-open metric index range of each group.
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 3> kMetricGroups{
    {{0, 3}, {3, 7}, {7, 10}}};

/// Direction-aligned z-scores pooled over every model and run (population SD),
/// plus their row means. Zero-variance columns give z = 0; invalid entries
/// are left out of the pooling and of the row means.
CmiReport compose_cmi(std::span<const MetricRecord> batch, CmiPooling pooling = CmiPooling::corpus);

// `hashtag,model,run,z1..z10,cmi,pop,growth,adopters`.
void write_cmi_csv(std::ostream& out, const CmiReport& report);
CmiReport read_cmi_csv(std::istream& in);

} // namespace cascadelab
