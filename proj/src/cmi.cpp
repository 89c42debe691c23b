#include "cascadelab/cmi.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "cascadelab/textio.hpp"

namespace cascadelab {

int metric_direction(std::size_t metric) {
    if (metric >= kMetricCount)
        throw ValidationError("metric index out of range");
    return metric == 8 ? 1 : -1;
}

namespace {

void standardize(std::span<const MetricRecord> batch, const std::vector<std::size_t>& members,
                 std::vector<CmiRow>& rows, std::vector<std::string>& notes,
                 const std::string& scope) {
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        const double sign = metric_direction(k);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t r : members)
            if (batch[r].metrics.valid[k]) {
                sum += sign * batch[r].metrics.value[k];
                ++count;
            }
        if (count == 0) {
            notes.push_back("m" + std::to_string(k + 1) + " invalid for every row" + scope +
                            "; dropped from the composite");
            continue;
        }
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t r : members)
            if (batch[r].metrics.valid[k]) {
                const double d = sign * batch[r].metrics.value[k] - mean;
                ss += d * d;
            }
        const double sd = std::sqrt(ss / static_cast<double>(count));
        for (std::size_t r : members) {
            if (!batch[r].metrics.valid[k])
                continue;
            const double d = sign * batch[r].metrics.value[k] - mean;
            // Columns that are constant up to rounding carry no information.
            rows[r].z[k] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? d / sd : 0.0;
            rows[r].valid[k] = true;
        }
    }
}

std::optional<double> mean_valid(const CmiRow& row, std::size_t lo, std::size_t hi) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t k = lo; k < hi; ++k)
        if (row.valid[k]) {
            s += row.z[k];
            ++n;
        }
    if (n == 0)
        return std::nullopt;
    return s / static_cast<double>(n);
}

} // namespace

CmiReport compose_cmi(std::span<const MetricRecord> batch, CmiPooling pooling) {
    CmiReport report;
    report.rows.resize(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        report.rows[r].hashtag = batch[r].hashtag;
        report.rows[r].model = batch[r].model;
        report.rows[r].run = batch[r].run;
    }
    if (pooling == CmiPooling::corpus) {
        std::vector<std::size_t> all(batch.size());
        for (std::size_t r = 0; r < batch.size(); ++r)
            all[r] = r;
        standardize(batch, all, report.rows, report.notes, "");
    } else {
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t r = 0; r < batch.size(); ++r)
            groups[batch[r].hashtag].push_back(r);
        for (const auto& [tag, members] : groups)
            standardize(batch, members, report.rows, report.notes, " of hashtag " + tag);
    }
    for (auto& row : report.rows) {
        row.cmi = mean_valid(row, 0, kMetricCount);
        row.popularity = mean_valid(row, kMetricGroups[0].first, kMetricGroups[0].second);
        row.growth = mean_valid(row, kMetricGroups[1].first, kMetricGroups[1].second);
        row.adopters = mean_valid(row, kMetricGroups[2].first, kMetricGroups[2].second);
    }
    return report;
}

void write_cmi_csv(std::ostream& out, const CmiReport& report) {
    out << "hashtag,model,run";
    for (std::size_t k = 1; k <= kMetricCount; ++k)
        out << ",z" << k;
    out << ",cmi,pop,growth,adopters\n";
    auto cell = [&](const std::optional<double>& v) {
        out << ',' << (v ? format_double(*v) : std::string("NA"));
    };
    for (const auto& row : report.rows) {
        out << row.hashtag << ',' << row.model << ',' << row.run;
        for (std::size_t k = 0; k < kMetricCount; ++k)
            cell(row.valid[k] ? std::optional<double>(row.z[k]) : std::nullopt);
        cell(row.cmi);
        cell(row.popularity);
        cell(row.growth);
        cell(row.adopters);
        out << '\n';
    }
}

CmiReport read_cmi_csv(std::istream& in) {
    CmiReport report;
    std::string line;
    if (!std::getline(in, line) || split_csv(line).size() != 3 + kMetricCount + 4 ||
        split_csv(line)[0] != "hashtag")
        throw ValidationError("cmi table needs the header hashtag,model,run,z1..z10,cmi,pop,growth,adopters");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto f = split_csv(line);
        if (f.size() != 3 + kMetricCount + 4)
            throw ValidationError("cmi table line " + std::to_string(line_no) + ": wrong field count");
        auto cell = [&](std::size_t k) -> std::optional<double> {
            if (f[k] == "NA")
                return std::nullopt;
            double v = 0.0;
            if (!parse_double(f[k], v))
                throw ValidationError("cmi table line " + std::to_string(line_no) + ": bad number '" +
                                      std::string(f[k]) + "'");
            return v;
        };
        CmiRow row;
        row.hashtag = std::string(f[0]);
        row.model = std::string(f[1]);
        if (!parse_size(f[2], row.run))
            throw ValidationError("cmi table line " + std::to_string(line_no) + ": bad run index");
        for (std::size_t k = 0; k < kMetricCount; ++k)
            if (auto v = cell(3 + k)) {
                row.z[k] = *v;
                row.valid[k] = true;
            }
        row.cmi = cell(3 + kMetricCount);
        row.popularity = cell(4 + kMetricCount);
        row.growth = cell(5 + kMetricCount);
        row.adopters = cell(6 + kMetricCount);
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace cascadelab
