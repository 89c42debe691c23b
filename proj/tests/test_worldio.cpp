#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "cascadelab/worldio.hpp"

using namespace cascadelab;
namespace fs = std::filesystem;

namespace {

SynthWorldParams small_params() {
    SynthWorldParams p;
    p.blocks = 10;
    p.nodes_per_block = 60;
    p.intra_p = 0.1;
    p.inter_p = 0.005;
    p.region_rows = 2;
    p.region_cols = 5;
    return p;
}

struct EdgeCounts {
    double intra = 0.0, inter = 0.0;
};

EdgeCounts count_pairs(const World& w) {
    EdgeCounts c;
    for (const auto& e : w.net.edges())
        if (e.src < e.dst)
            (w.block_of[e.src] == w.block_of[e.dst] ? c.intra : c.inter) += 1.0;
    return c;
}

// Fresh scratch directory under the system temp path.
fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("cascadelab_test_" + name);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("synthetic world: edge densities follow the block model") {
    const auto p = small_params();
    const auto w = generate_world(p);
    CHECK(w.net.node_count() == 600);
    const double intra_pairs = 10 * 60.0 * 59 / 2, inter_pairs = 45 * 3600.0;
    const double p_bar = (p.intra_p * intra_pairs + p.inter_p * inter_pairs) / (intra_pairs + inter_pairs);
    const double h = p.homophily;
    const double p_in = (1 - h) * p_bar + h * p.intra_p, p_out = (1 - h) * p_bar + h * p.inter_p;
    const auto c = count_pairs(w);
    CHECK(std::abs(c.intra - intra_pairs * p_in) < 4 * std::sqrt(intra_pairs * p_in * (1 - p_in)));
    CHECK(std::abs(c.inter - inter_pairs * p_out) < 4 * std::sqrt(inter_pairs * p_out * (1 - p_out)));
}

TEST_CASE("synthetic world: zero homophily draws every pair alike") {
    auto p = small_params();
    p.homophily = 0.0;
    const double intra_pairs = 10 * 60.0 * 59 / 2, inter_pairs = 45 * 3600.0;
    const double p_bar = (p.intra_p * intra_pairs + p.inter_p * inter_pairs) / (intra_pairs + inter_pairs);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        p.rng_seed = seed;
        const auto c = count_pairs(generate_world(p));
        CHECK(std::abs(c.intra - intra_pairs * p_bar) < 3 * std::sqrt(intra_pairs * p_bar * (1 - p_bar)));
        CHECK(std::abs(c.inter - inter_pairs * p_bar) < 3 * std::sqrt(inter_pairs * p_bar * (1 - p_bar)));
    }
}

TEST_CASE("synthetic world: reciprocal integer weights") {
    auto p = small_params();
    p.max_weight = 3;
    const auto w = generate_world(p);
    std::set<double> seen;
    for (const auto& e : w.net.edges()) {
        CHECK(w.net.has_edge(e.dst, e.src));
        CHECK(e.weight == std::floor(e.weight));
        CHECK(e.weight >= 1.0);
        CHECK(e.weight <= 3.0);
        seen.insert(e.weight);
    }
    CHECK(seen.size() == 3);
}

TEST_CASE("synthetic world: identities") {
    auto p = small_params();
    const auto w = generate_world(p);
    CHECK(w.ids.dimension() == 7);
    CHECK(w.ids.schema().categories[1].registers[2] == "cat1_r2");
    // Each category of each agent is a point on the simplex.
    for (std::size_t i = 0; i < w.ids.agents(); ++i) {
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < 4; ++k)
            a += w.ids.at(i, k);
        for (std::size_t k = 4; k < 7; ++k)
            b += w.ids.at(i, k);
        CHECK(a == doctest::Approx(1.0));
        CHECK(b == doctest::Approx(1.0));
    }
    p.identity_concentration = std::numeric_limits<double>::infinity();
    const auto exact = generate_world(p);
    for (std::size_t i = 1; i < exact.ids.agents(); ++i)
        if (exact.block_of[i] == exact.block_of[i - 1])
            for (std::size_t k = 0; k < 7; ++k)
                CHECK(exact.ids.at(i, k) == exact.ids.at(i - 1, k));
}

TEST_CASE("synthetic world: blocks map onto contiguous regions") {
    const auto w = generate_world(small_params());
    CHECK(w.regions.region_count() == 10);
    for (std::size_t i = 0; i < w.net.node_count(); ++i)
        CHECK(w.regions.region_of[i] == w.block_of[i]);
    // Rook neighbours on a 2x5 grid: corner 2, edge 3.
    CHECK(w.regions.adjacency.rows[0].size() == 2);
    CHECK(w.regions.adjacency.rows[1].size() == 3);
    CHECK(w.regions.region_names[6] == "r1_1");
}

TEST_CASE("synthetic world: deterministic in its seed") {
    const auto a = generate_world(small_params());
    const auto b = generate_world(small_params());
    CHECK(a.net.edges() == b.net.edges());
    CHECK(a.ids.values() == b.ids.values());
    auto p = small_params();
    p.rng_seed = 2;
    CHECK(!(generate_world(p).net.edges() == a.net.edges()));
}

TEST_CASE("synthetic world: fragmented graph is flagged") {
    auto p = small_params();
    p.inter_p = 0.0;
    p.homophily = 1.0;
    CHECK(!generate_world(p).warnings.empty());
    CHECK(generate_world(small_params()).warnings.empty());
}

TEST_CASE("synthetic world: parameter validation") {
    auto p = small_params();
    p.homophily = 1.2;
    CHECK_THROWS_AS(generate_world(p), ValidationError);
    p = small_params();
    p.category_sizes = {};
    CHECK_THROWS_AS(generate_world(p), ValidationError);
    p = small_params();
    p.max_weight = 0;
    CHECK_THROWS_AS(generate_world(p), ValidationError);
}

TEST_CASE("breadth-first seeds") {
    const auto w = generate_world(small_params());
    const auto seeds = bfs_seeds(w.net, 5, 10);
    CHECK(seeds.size() == 10);
    CHECK(seeds[0] == 5);
    CHECK(std::set<NodeId>(seeds.begin(), seeds.end()).size() == 10);
    for (std::size_t k = 1; k < seeds.size(); ++k) {
        bool linked = false;
        for (std::size_t j = 0; j < k; ++j)
            linked = linked || w.net.has_edge(seeds[j], seeds[k]);
        CHECK(linked);
    }
    CHECK_THROWS_AS(bfs_seeds(w.net, 10000, 3), ValidationError);
}

TEST_CASE("planted cascades") {
    const auto w = generate_world(small_params());
    SimulationConfig cfg;
    cfg.rng_seed = 3;
    for (auto v : kAllVariants) {
        const auto planted = plant_cascade(w, bfs_seeds(w.net, 0, 10), v, 0.6, cfg, "tag");
        CHECK(planted.variant == v);
        CHECK(planted.spec.tag == "tag");
        CHECK(planted.spec.empirical_size == planted.cascade.uses());
        CHECK(planted.cascade.seeds.size() == 10);
        CHECK_NOTHROW(planted.cascade.validate());
        CHECK(planted.spec.identity.size() == planted.spec.relevant_dims.size());
    }
    const auto a = plant_cascade(w, bfs_seeds(w.net, 0, 10), Variant::identity_only, 0.6, cfg);
    const auto b = plant_cascade(w, bfs_seeds(w.net, 0, 10), Variant::identity_only, 0.6, cfg);
    CHECK(a.cascade == b.cascade);
}

TEST_CASE("cascade jsonl round trip") {
    const auto w = generate_world(small_params());
    SimulationConfig cfg;
    const auto planted = plant_cascade(w, bfs_seeds(w.net, 0, 10), Variant::network_only, 0.5, cfg);
    std::ostringstream out;
    write_cascade_jsonl(out, planted.cascade, w.net, {{"tag", "\"h1\""}, {"sample_rate", "0.5"}});
    std::istringstream in(out.str());
    const auto back = read_cascade_jsonl(in, w.net);
    CHECK(back.cascade == planted.cascade);
    CHECK(back.labels.at("tag") == "\"h1\"");
    CHECK(back.labels.at("sample_rate") == "0.5");
    CHECK(out.str().rfind("{", 0) == 0);
}

TEST_CASE("cascade jsonl rejects bad input") {
    const auto w = generate_world(small_params());
    auto read = [&](const std::string& text) {
        std::istringstream in(text);
        return read_cascade_jsonl(in, w.net);
    };
    CHECK_THROWS_WITH_AS(read(""), "cascade file is empty", ValidationError);
    CHECK_THROWS_WITH_AS(read("{\"seeds\":[\"n0\"],\"steps\":3}\n"), "cascade has no usage events",
                         ValidationError);
    CHECK_THROWS_AS(read("{\"steps\":3}\n{\"agent\":\"n0\",\"t\":0}\n"), ValidationError);
    CHECK_THROWS_AS(read("{\"seeds\":[\"n0\"],\"steps\":3}\nnot json\n"), ValidationError);
    CHECK_THROWS_AS(read("{\"seeds\":[\"n0\"],\"steps\":3}\n{\"agent\":\"zz\",\"t\":0}\n"), ValidationError);
    CHECK_THROWS_AS(read("{\"seeds\":[\"n0\"],\"steps\":3}\n{\"agent\":\"n0\",\"t\":9}\n"), ValidationError);
    CHECK_THROWS_AS(read("{\"seeds\":[\"n0\"],\"steps\":3}\n{\"agent\":\"n1\",\"t\":1}\n"), ValidationError);
}

TEST_CASE("sha-256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("world directory round trip and tamper detection") {
    const auto w = generate_world(small_params());
    const auto dir = scratch("world");
    save_world(dir, w, "unit test");
    for (const char* name : kWorldFiles)
        CHECK(fs::exists(dir / name));
    const auto back = load_world(dir);
    CHECK(back.net.edges() == w.net.edges());
    CHECK(back.net.names() == w.net.names());
    for (std::size_t k = 0; k < w.ids.values().size(); ++k)
        CHECK(back.ids.values()[k] == doctest::Approx(w.ids.values()[k]).epsilon(1e-12));
    CHECK(back.regions.region_of == w.regions.region_of);

    write_file(dir / "edges.tsv", read_file(dir / "edges.tsv") + "n0\tn1\t1\n");
    CHECK_THROWS_AS(load_world(dir), ValidationError);
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_world(dir), ValidationError);
}

TEST_CASE("ini configuration") {
    std::istringstream in("[world]\nblocks = 4\nnodes_per_block=25\nidentity_concentration = inf\n"
                          "categories = 2,2,3\nseed = 9\n[simulation]\nstickiness = 0.3\n"
                          "variant = identity-only\nexposure = per_neighbor\n");
    const auto ini = IniConfig::parse(in);
    CHECK(ini.has("world.blocks"));
    CHECK(ini.get_int("world.blocks", 0) == 4);
    CHECK(ini.get_string("missing.key", "x") == "x");
    const auto p = world_params_from_ini(ini);
    CHECK(p.blocks == 4);
    CHECK(p.nodes_per_block == 25);
    CHECK(std::isinf(p.identity_concentration));
    CHECK(p.category_sizes == std::vector<std::size_t>{2, 2, 3});
    CHECK(p.rng_seed == 9);
    CHECK(p.intra_p == SynthWorldParams{}.intra_p);
    const auto cfg = simulation_config_from_ini(ini);
    CHECK(cfg.stickiness == 0.3);
    CHECK(cfg.variant == Variant::identity_only);
    CHECK(cfg.exposure == ExposureCounting::per_neighbor);
    CHECK(cfg.decay == SimulationConfig{}.decay);

    std::istringstream bad("[simulation]\nstickiness = lots\n");
    CHECK_THROWS_AS(simulation_config_from_ini(IniConfig::parse(bad)), ValidationError);
    std::istringstream bad_mode("[simulation]\nexposure = sometimes\n");
    CHECK_THROWS_AS(simulation_config_from_ini(IniConfig::parse(bad_mode)), ValidationError);
    std::istringstream bad_world("[world]\nblocks = -3\n");
    CHECK_THROWS_AS(world_params_from_ini(IniConfig::parse(bad_world)), ValidationError);
    CHECK_THROWS_AS(IniConfig::load("/nonexistent/config.ini"), ValidationError);
}

TEST_CASE("planted cascades: zero stickiness and identity targeting") {
    auto p = small_params();
    p.homophily = 0.8;
    const auto w = generate_world(p);
    SimulationConfig cfg;
    cfg.rng_seed = 2;
    const auto none = plant_cascade(w, bfs_seeds(w.net, 0, 10), Variant::network_identity, 0.0, cfg);
    CHECK(none.cascade.uses() == 10);

    // Adopters of an identity-aware cascade resemble the hashtag more than
    // the population does.
    const auto planted = plant_cascade(w, bfs_seeds(w.net, 0, 10), Variant::network_identity, 0.8, cfg);
    REQUIRE(!planted.spec.relevant_dims.empty());
    const auto delta = delta_agent_hashtag_all(w.ids, planted.spec);
    double pop = 0.0;
    for (double d : delta)
        pop += d / static_cast<double>(delta.size());
    const auto adopters = planted.cascade.adopters();
    double adopted = 0.0;
    for (NodeId a : adopters)
        adopted += delta[a] / static_cast<double>(adopters.size());
    CHECK(adopters.size() > 20);
    CHECK(adopted > pop);
}

TEST_CASE("serializers are byte-stable under re-serialization") {
    const auto w = generate_world(small_params());
    const auto a = scratch("stable_a"), b = scratch("stable_b");
    save_world(a, w);
    save_world(b, load_world(a));
    for (const char* name : kWorldFiles)
        CHECK(read_file(a / name) == read_file(b / name));
    SimulationConfig cfg;
    const auto planted = plant_cascade(w, bfs_seeds(w.net, 3, 10), Variant::network_only, 0.5, cfg);
    std::ostringstream first;
    write_cascade_jsonl(first, planted.cascade, w.net, {{"tag", "\"x\""}});
    std::istringstream in(first.str());
    const auto back = read_cascade_jsonl(in, w.net);
    std::ostringstream second;
    write_cascade_jsonl(second, back.cascade, w.net, back.labels);
    CHECK(first.str() == second.str());
    fs::remove_all(a);
    fs::remove_all(b);
}
