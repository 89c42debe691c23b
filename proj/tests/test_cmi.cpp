#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cascadelab/cmi.hpp"

using namespace cascadelab;

namespace {

MetricRecord record(std::string tag, std::string model, std::size_t run, double error, double m9) {
    MetricRecord r{std::move(tag), std::move(model), run, {}};
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        r.metrics.value[k] = k == 8 ? m9 : error;
        r.metrics.valid[k] = true;
    }
    return r;
}

std::vector<MetricRecord> random_batch(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 3.0), c(-1.0, 1.0);
    std::vector<MetricRecord> batch;
    for (std::size_t r = 0; r < n; ++r) {
        MetricRecord m{"h" + std::to_string(r % 4), r % 2 ? "network-only" : "identity-only", r, {}};
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            m.metrics.value[k] = k == 8 ? c(rng) : u(rng);
            m.metrics.valid[k] = true;
        }
        batch.push_back(m);
    }
    return batch;
}

} // namespace

TEST_CASE("metric directions") {
    for (std::size_t k = 0; k < kMetricCount; ++k)
        CHECK(metric_direction(k) == (k == 8 ? 1 : -1));
    CHECK_THROWS_AS(metric_direction(kMetricCount), ValidationError);
}

TEST_CASE("a perfect and a poor run score plus and minus one") {
    const std::vector<MetricRecord> batch{record("h", "a", 0, 0.0, 1.0), record("h", "b", 0, 1.0, 0.0)};
    const auto rep = compose_cmi(batch);
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        CHECK(rep.rows[0].z[k] == doctest::Approx(1.0));
        CHECK(rep.rows[1].z[k] == doctest::Approx(-1.0));
    }
    CHECK(*rep.rows[0].cmi == doctest::Approx(1.0));
    CHECK(*rep.rows[1].cmi == doctest::Approx(-1.0));
    CHECK(*rep.rows[0].popularity == doctest::Approx(1.0));
    CHECK(*rep.rows[1].adopters == doctest::Approx(-1.0));
    CHECK(rep.notes.empty());
}

TEST_CASE("identical rows score zero") {
    const std::vector<MetricRecord> batch(5, record("h", "a", 0, 0.3, 0.2));
    const auto rep = compose_cmi(batch);
    for (const auto& row : rep.rows) {
        CHECK(*row.cmi == 0.0);
        for (std::size_t k = 0; k < kMetricCount; ++k) {
            CHECK(row.valid[k]);
            CHECK(row.z[k] == 0.0);
        }
    }
}

TEST_CASE("pooled z-scores have mean 0 and population variance 1") {
    std::mt19937_64 rng(1);
    const auto batch = random_batch(rng, 60);
    const auto rep = compose_cmi(batch);
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        double s = 0.0, ss = 0.0;
        for (const auto& row : rep.rows) {
            s += row.z[k];
            ss += row.z[k] * row.z[k];
        }
        CHECK(s / 60.0 == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(ss / 60.0 == doctest::Approx(1.0));
    }
    for (const auto& row : rep.rows) {
        double mean = 0.0;
        for (double z : row.z)
            mean += z / kMetricCount;
        CHECK(*row.cmi == doctest::Approx(mean));
        CHECK(*row.growth == doctest::Approx((row.z[3] + row.z[4] + row.z[5] + row.z[6]) / 4.0));
    }
}

TEST_CASE("z-scores ignore positive affine rescaling of a metric") {
    std::mt19937_64 rng(2);
    auto batch = random_batch(rng, 30);
    const auto before = compose_cmi(batch);
    for (auto& r : batch) {
        r.metrics.value[3] = 250.0 * r.metrics.value[3] + 7.0;
        r.metrics.value[8] = 0.5 * r.metrics.value[8] - 0.2;
    }
    const auto after = compose_cmi(batch);
    for (std::size_t r = 0; r < batch.size(); ++r)
        for (std::size_t k = 0; k < kMetricCount; ++k)
            CHECK(after.rows[r].z[k] == doctest::Approx(before.rows[r].z[k]));
}

TEST_CASE("a smaller error or a larger M9 raises the composite") {
    std::mt19937_64 rng(3);
    auto batch = random_batch(rng, 20);
    const double base = *compose_cmi(batch).rows[4].cmi;
    auto better = batch;
    better[4].metrics.value[0] *= 0.5;
    CHECK(*compose_cmi(better).rows[4].cmi > base);
    better = batch;
    better[4].metrics.value[8] += 0.5;
    CHECK(*compose_cmi(better).rows[4].cmi > base);
}

TEST_CASE("invalid entries are left out") {
    auto a = record("h", "a", 0, 0.0, 1.0);
    auto b = record("h", "b", 0, 1.0, 0.0);
    auto c = record("h", "c", 0, 2.0, -1.0);
    for (auto* r : {&a, &b, &c})
        r->metrics.valid[6] = false;
    c.metrics.valid[0] = false;
    const std::vector<MetricRecord> batch{a, b, c};
    const auto rep = compose_cmi(batch);
    CHECK(!rep.rows[2].valid[0]);
    // Column 0 pools only a and b.
    CHECK(rep.rows[0].z[0] == doctest::Approx(1.0));
    for (const auto& row : rep.rows)
        CHECK(!row.valid[6]);
    REQUIRE(rep.notes.size() == 1);
    CHECK(rep.notes[0].rfind("m7 invalid for every row", 0) == 0);
    // The growth mean uses the three remaining growth metrics.
    CHECK(*rep.rows[0].growth == doctest::Approx((rep.rows[0].z[3] + rep.rows[0].z[4] + rep.rows[0].z[5]) / 3.0));

    MetricRecord none{"h", "d", 0, {}};
    const auto empty = compose_cmi(std::vector<MetricRecord>{none});
    CHECK(!empty.rows[0].cmi);
}

TEST_CASE("per-hashtag pooling standardises each hashtag separately") {
    std::vector<MetricRecord> batch{record("x", "a", 0, 0.0, 1.0), record("x", "b", 0, 1.0, 0.0),
                                    record("y", "a", 0, 10.0, 0.5), record("y", "b", 0, 30.0, 0.1)};
    const auto corpus = compose_cmi(batch, CmiPooling::corpus);
    const auto local = compose_cmi(batch, CmiPooling::per_hashtag);
    CHECK(*local.rows[0].cmi == doctest::Approx(1.0));
    CHECK(*local.rows[2].cmi == doctest::Approx(1.0));
    CHECK(*local.rows[3].cmi == doctest::Approx(-1.0));
    CHECK(*corpus.rows[2].cmi < *corpus.rows[0].cmi);
}

TEST_CASE("cmi csv round trip") {
    std::mt19937_64 rng(4);
    auto batch = random_batch(rng, 8);
    batch[2].metrics.valid[5] = false;
    const auto rep = compose_cmi(batch);
    std::ostringstream out;
    write_cmi_csv(out, rep);
    std::istringstream in(out.str());
    const auto back = read_cmi_csv(in);
    REQUIRE(back.rows.size() == rep.rows.size());
    for (std::size_t r = 0; r < rep.rows.size(); ++r) {
        CHECK(back.rows[r].hashtag == rep.rows[r].hashtag);
        CHECK(back.rows[r].model == rep.rows[r].model);
        CHECK(back.rows[r].run == rep.rows[r].run);
        CHECK(back.rows[r].valid == rep.rows[r].valid);
        CHECK(*back.rows[r].cmi == doctest::Approx(*rep.rows[r].cmi));
        for (std::size_t k = 0; k < kMetricCount; ++k)
            if (rep.rows[r].valid[k])
                CHECK(back.rows[r].z[k] == doctest::Approx(rep.rows[r].z[k]));
    }
    std::istringstream bad("hashtag,model\n");
    CHECK_THROWS_AS(read_cmi_csv(bad), ValidationError);
}

TEST_CASE("two models with M1 errors 0.2 and 0.4") {
    // Negated values -0.2 and -0.4: mean -0.3, population SD 0.1.
    MetricRecord a{"h", "a", 0, {}}, b{"h", "b", 0, {}};
    a.metrics.value[0] = 0.2;
    b.metrics.value[0] = 0.4;
    a.metrics.valid[0] = b.metrics.valid[0] = true;
    const auto rep = compose_cmi(std::vector<MetricRecord>{a, b});
    CHECK(rep.rows[0].z[0] == doctest::Approx(1.0));
    CHECK(rep.rows[1].z[0] == doctest::Approx(-1.0));
    CHECK(rep.notes.size() == kMetricCount - 1);
}
