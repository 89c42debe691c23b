#include "cascadelab/worldio.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "cascadelab/textio.hpp"

namespace cascadelab {

using json = nlohmann::json;

void SynthWorldParams::validate() const {
    if (blocks < 1 || nodes_per_block < 1)
        throw ValidationError("world needs at least one block of at least one node");
    if (!(intra_p >= 0.0 && intra_p <= 1.0) || !(inter_p >= 0.0 && inter_p <= 1.0))
        throw ValidationError("edge probabilities must lie in [0,1]");
    if (!(homophily >= 0.0 && homophily <= 1.0))
        throw ValidationError("homophily must lie in [0,1]");
    if (!(identity_concentration > 0.0))
        throw ValidationError("identity_concentration must be positive");
    if (region_rows < 1 || region_cols < 1)
        throw ValidationError("region grid needs at least one row and column");
    if (category_sizes.empty() ||
        std::any_of(category_sizes.begin(), category_sizes.end(), [](auto d) { return d < 1; }))
        throw ValidationError("every identity category needs at least one register");
    if (max_weight < 1)
        throw ValidationError("max_weight must be at least 1");
    if (blocks * nodes_per_block > std::numeric_limits<NodeId>::max())
        throw ValidationError("world too large for 32-bit node ids");
}

namespace {

std::vector<double> dirichlet(std::span<const double> alpha, Rng& rng) {
    std::vector<double> out(alpha.size());
    double total = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        std::gamma_distribution<double> g(alpha[k], 1.0);
        out[k] = g(rng);
        total += out[k];
    }
    if (!(total > 0.0))
        return {alpha.begin(), alpha.end()};
    for (auto& v : out)
        v /= total;
    return out;
}

// Calls emit(k) for each index in [0, count) kept with probability p, using
// geometric skips so the cost is proportional to the number kept.
template <class Emit>
void bernoulli_indices(std::uint64_t count, double p, Rng& rng, Emit&& emit) {
    if (p <= 0.0 || count == 0)
        return;
    if (p >= 1.0) {
        for (std::uint64_t k = 0; k < count; ++k)
            emit(k);
        return;
    }
    const double log_q = std::log1p(-p);
    std::uint64_t k = 0;
    while (true) {
        const double u = 1.0 - uniform01(rng); // (0, 1]
        const double skip = std::floor(std::log(u) / log_q);
        if (skip >= static_cast<double>(count - k))
            return;
        k += static_cast<std::uint64_t>(skip);
        emit(k);
        if (++k >= count)
            return;
    }
}

std::size_t largest_component(const Network& net) {
    std::vector<char> seen(net.node_count(), 0);
    std::size_t best = 0;
    std::vector<NodeId> stack;
    for (NodeId s = 0; s < net.node_count(); ++s) {
        if (seen[s])
            continue;
        std::size_t size = 0;
        seen[s] = 1;
        stack.push_back(s);
        while (!stack.empty()) {
            const NodeId u = stack.back();
            stack.pop_back();
            ++size;
            for (NodeId v : net.out_neighbors(u))
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
        }
        best = std::max(best, size);
    }
    return best;
}

} // namespace

World generate_world(const SynthWorldParams& params) {
    params.validate();
    Rng rng(params.rng_seed);
    const std::size_t nb = params.blocks, m = params.nodes_per_block;
    const std::size_t n = nb * m;

    World world;
    world.block_of.resize(n);
    std::vector<std::string> names(n);
    for (std::size_t i = 0; i < n; ++i) {
        names[i] = "n" + std::to_string(i);
        world.block_of[i] = static_cast<std::uint32_t>(i / m);
    }

    // Pair-count weighted mean probability: what every pair gets at homophily 0.
    const double intra_pairs = static_cast<double>(nb) * static_cast<double>(m) * (m - 1) / 2.0;
    const double inter_pairs = static_cast<double>(nb) * (nb - 1) / 2.0 * m * m;
    const double pooled = intra_pairs + inter_pairs > 0.0
                              ? (params.intra_p * intra_pairs + params.inter_p * inter_pairs) /
                                    (intra_pairs + inter_pairs)
                              : 0.0;
    const double h = params.homophily;
    const double p_in = (1.0 - h) * pooled + h * params.intra_p;
    const double p_out = (1.0 - h) * pooled + h * params.inter_p;

    std::uniform_int_distribution<int> weight(1, params.max_weight);
    std::vector<Edge> edges;
    auto link = [&](std::size_t a, std::size_t b) {
        edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b),
                         static_cast<double>(weight(rng))});
        edges.push_back({static_cast<NodeId>(b), static_cast<NodeId>(a),
                         static_cast<double>(weight(rng))});
    };
    for (std::size_t a = 0; a < nb; ++a) {
        // Unordered pairs inside block a, enumerated row by row.
        const std::size_t base = a * m;
        std::size_t row = 0, col = 1;
        std::uint64_t pos = 0;
        bernoulli_indices(static_cast<std::uint64_t>(m) * (m - 1) / 2, p_in, rng,
                          [&](std::uint64_t k) {
                              std::uint64_t advance = k - pos;
                              while (col + advance >= m) {
                                  advance -= m - col;
                                  ++row;
                                  col = row + 1;
                              }
                              col += advance;
                              pos = k;
                              link(base + row, base + col);
                          });
        for (std::size_t b = a + 1; b < nb; ++b)
            bernoulli_indices(static_cast<std::uint64_t>(m) * m, p_out, rng, [&](std::uint64_t k) {
                link(a * m + k / m, b * m + k % m);
            });
    }
    world.net = Network::from_edges(std::move(names), std::move(edges));

    std::vector<CategorySchema::Category> categories;
    for (std::size_t c = 0; c < params.category_sizes.size(); ++c) {
        CategorySchema::Category cat;
        cat.name = "cat" + std::to_string(c);
        for (std::size_t r = 0; r < params.category_sizes[c]; ++r)
            cat.registers.push_back(cat.name + "_r" + std::to_string(r));
        categories.push_back(std::move(cat));
    }
    auto schema = CategorySchema::make(std::move(categories));
    const std::size_t dim = schema.dimension();
    std::vector<std::vector<double>> block_base(nb, std::vector<double>(dim));
    for (std::size_t b = 0; b < nb; ++b) {
        std::size_t col = 0;
        for (std::size_t size : params.category_sizes) {
            const std::vector<double> flat(size, 0.5);
            const auto draw = dirichlet(flat, rng);
            std::copy(draw.begin(), draw.end(), block_base[b].begin() + static_cast<std::ptrdiff_t>(col));
            col += size;
        }
    }
    std::vector<double> values(n * dim);
    const bool exact = std::isinf(params.identity_concentration);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& base = block_base[world.block_of[i]];
        std::size_t col = 0;
        for (std::size_t size : params.category_sizes) {
            std::vector<double> alpha(base.begin() + static_cast<std::ptrdiff_t>(col),
                                      base.begin() + static_cast<std::ptrdiff_t>(col + size));
            std::vector<double> draw = alpha;
            if (!exact) {
                for (auto& a : alpha)
                    a = std::max(a * params.identity_concentration, 1e-3);
                draw = dirichlet(alpha, rng);
            }
            for (std::size_t k = 0; k < size; ++k)
                values[i * dim + col + k] = std::clamp(draw[k], 0.0, 1.0);
            col += size;
        }
    }
    world.ids = IdentityMatrix(std::move(schema), n, std::move(values));

    const std::size_t rows = params.region_rows, cols = params.region_cols;
    const std::size_t nr = rows * cols;
    auto& regions = world.regions;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            regions.region_names.push_back("r" + std::to_string(r) + "_" + std::to_string(c));
    regions.region_of.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        regions.region_of[i] = static_cast<std::uint32_t>(world.block_of[i] * nr / nb);
    regions.adjacency.rows.resize(nr);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t a = r * cols + c;
            if (c + 1 < cols) {
                regions.adjacency.rows[a].emplace_back(a + 1, 1.0);
                regions.adjacency.rows[a + 1].emplace_back(a, 1.0);
            }
            if (r + 1 < rows) {
                regions.adjacency.rows[a].emplace_back(a + cols, 1.0);
                regions.adjacency.rows[a + cols].emplace_back(a, 1.0);
            }
        }

    const std::size_t giant = largest_component(world.net);
    if (2 * giant < n)
        world.warnings.push_back("largest connected component holds only " +
                                 std::to_string(giant) + " of " + std::to_string(n) + " nodes");
    return world;
}

std::vector<NodeId> bfs_seeds(const Network& net, NodeId start, std::size_t count) {
    if (start >= net.node_count())
        throw ValidationError("seed start outside the network");
    std::vector<NodeId> out{start};
    std::vector<char> seen(net.node_count(), 0);
    seen[start] = 1;
    for (std::size_t head = 0; head < out.size() && out.size() < count; ++head)
        for (NodeId v : net.out_neighbors(out[head])) {
            if (out.size() >= count)
                break;
            if (!seen[v]) {
                seen[v] = 1;
                out.push_back(v);
            }
        }
    return out;
}

PlantedCascade plant_cascade(const World& world, std::vector<NodeId> seeds, Variant variant,
                             double stickiness, SimulationConfig cfg, const std::string& tag) {
    PlantedCascade out;
    out.variant = variant;
    out.stickiness = stickiness;
    out.spec.tag = tag;
    out.spec.seeds = std::move(seeds);
    const auto inferred = infer_hashtag_identity(world.ids, out.spec.seeds);
    out.spec.relevant_dims = inferred.relevant_dims;
    out.spec.identity = inferred.identity;
    cfg.variant = variant;
    cfg.stickiness = stickiness;
    if (variant == Variant::identity_only) {
        const auto rewired = rewire_configuration_model(world.net, derive_seed(cfg.rng_seed, "plant-rewire"));
        out.cascade = run_simulation(rewired, world.ids, out.spec, cfg);
    } else {
        out.cascade = run_simulation(world.net, world.ids, out.spec, cfg);
    }
    out.spec.empirical_size = out.cascade.uses();
    return out;
}

void write_cascade_jsonl(std::ostream& out, const Cascade& cascade, const Network& net,
                         const std::map<std::string, std::string>& labels) {
    json header = json::object();
    for (const auto& [k, v] : labels)
        header[k] = json::parse(v);
    json seeds = json::array();
    for (NodeId s : cascade.seeds)
        seeds.push_back(net.name(s));
    header["seeds"] = seeds;
    header["steps"] = cascade.steps;
    out << header.dump() << '\n';
    for (const auto& e : cascade.events)
        out << json{{"agent", net.name(e.agent)}, {"t", e.t}}.dump() << '\n';
}

CascadeFile read_cascade_jsonl(std::istream& in, const Network& net) {
    CascadeFile file;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("cascade line " + std::to_string(line_no) + ": not JSON (" +
                                  e.what() + ")");
        }
        if (!j.is_object())
            throw ValidationError("cascade line " + std::to_string(line_no) + ": expected an object");
        try {
            if (!have_header) {
                have_header = true;
                if (!j.contains("seeds") || !j.contains("steps"))
                    throw ValidationError("cascade header needs 'seeds' and 'steps'");
                for (const auto& s : j.at("seeds"))
                    file.cascade.seeds.push_back(net.require(s.get<std::string>()));
                file.cascade.steps = j.at("steps").get<std::uint32_t>();
                for (const auto& [k, v] : j.items())
                    if (k != "seeds" && k != "steps")
                        file.labels[k] = v.dump();
                continue;
            }
            const NodeId agent = net.require(j.at("agent").get<std::string>());
            file.cascade.events.push_back({agent, j.at("t").get<std::uint32_t>()});
        } catch (const json::exception& e) {
            throw ValidationError("cascade line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header)
        throw ValidationError("cascade file is empty");
    if (file.cascade.events.empty())
        throw ValidationError("cascade has no usage events");
    file.cascade.validate();
    return file;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw RuntimeFailure("SHA-256 digest failed");
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
    return hex.str();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_file(path));
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw RuntimeFailure("cannot write '" + path.string() + "'");
    out << bytes;
    if (!out)
        throw RuntimeFailure("write to '" + path.string() + "' failed");
}

void save_world(const std::filesystem::path& dir, const World& world,
                const std::string& generator_note) {
    std::filesystem::create_directories(dir);
    std::map<std::string, std::string> content;
    {
        std::ostringstream s;
        write_edge_list(s, world.net);
        content["edges.tsv"] = s.str();
    }
    {
        std::ostringstream s;
        write_node_map(s, world.net);
        content["node_map.tsv"] = s.str();
    }
    {
        std::ostringstream s;
        write_schema(s, world.ids.schema());
        content["schema.csv"] = s.str();
    }
    {
        std::ostringstream s;
        write_identity_csv(s, world.ids, world.net);
        content["identity.csv"] = s.str();
    }
    {
        std::ostringstream r, a;
        write_region_map(r, a, world.regions, world.net);
        content["regions.csv"] = r.str();
        content["region_adjacency.csv"] = a.str();
    }
    json manifest;
    manifest["nodes"] = world.net.node_count();
    manifest["edges"] = world.net.edge_count();
    manifest["files"] = json::object();
    for (const auto& [name, bytes] : content) {
        write_file(dir / name, bytes);
        manifest["files"][name] = sha256_hex(bytes);
    }
    if (!generator_note.empty())
        manifest["generator"] = generator_note;
    manifest["warnings"] = world.warnings;
    write_file(dir / "world_manifest.json", manifest.dump(2) + "\n");
}

World load_world(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "world_manifest.json";
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ValidationError("world manifest '" + manifest_path.string() + "' is not JSON: " + e.what());
    }
    std::map<std::string, std::string> content;
    for (const char* name : kWorldFiles) {
        const std::string bytes = read_file(dir / name);
        if (!manifest.contains("files") || !manifest["files"].contains(name))
            throw ValidationError("world manifest does not list '" + std::string(name) + "'");
        if (manifest["files"][name].get<std::string>() != sha256_hex(bytes))
            throw ValidationError("'" + (dir / name).string() +
                                  "' does not match the hash in world_manifest.json");
        content[name] = bytes;
    }
    World world;
    std::istringstream node_map(content["node_map.tsv"]);
    const auto names = read_node_map(node_map);
    std::istringstream edges(content["edges.tsv"]);
    world.net = load_edge_list(edges, {}, &names);
    std::istringstream schema(content["schema.csv"]);
    const auto parsed_schema = read_schema(schema);
    std::istringstream identity(content["identity.csv"]);
    world.ids = read_identity_csv(identity, parsed_schema, world.net);
    std::istringstream regions(content["regions.csv"]), adjacency(content["region_adjacency.csv"]);
    world.regions = read_region_map(regions, adjacency, world.net);
    return world;
}

IniConfig IniConfig::parse(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    IniConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            cfg.values_[section] = body.data();
            continue;
        }
        for (const auto& [key, value] : body)
            cfg.values_[section + "." + key] = value.data();
    }
    return cfg;
}

IniConfig IniConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open config '" + path.string() + "'");
    return parse(in);
}

std::string IniConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::string(trim(it->second));
}

double IniConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    const auto text = trim(it->second);
    if (text == "inf" || text == "infinity")
        return std::numeric_limits<double>::infinity();
    double v = 0.0;
    if (!parse_double(text, v))
        throw ValidationError("config key '" + key + "': expected a number, got '" +
                              std::string(text) + "'");
    return v;
}

std::int64_t IniConfig::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    long long v = 0;
    if (!parse_int64(trim(it->second), v))
        throw ValidationError("config key '" + key + "': expected an integer, got '" +
                              it->second + "'");
    return v;
}

namespace {

std::size_t get_count(const IniConfig& ini, const std::string& key, std::size_t fallback) {
    const auto v = ini.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0)
        throw ValidationError("config key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

} // namespace

SynthWorldParams world_params_from_ini(const IniConfig& ini) {
    SynthWorldParams p;
    p.blocks = get_count(ini, "world.blocks", p.blocks);
    p.nodes_per_block = get_count(ini, "world.nodes_per_block", p.nodes_per_block);
    p.intra_p = ini.get_double("world.intra_p", p.intra_p);
    p.inter_p = ini.get_double("world.inter_p", p.inter_p);
    p.homophily = ini.get_double("world.homophily", p.homophily);
    p.identity_concentration = ini.get_double("world.identity_concentration", p.identity_concentration);
    p.region_rows = get_count(ini, "world.region_rows", p.region_rows);
    p.region_cols = get_count(ini, "world.region_cols", p.region_cols);
    p.max_weight = static_cast<int>(ini.get_int("world.max_weight", p.max_weight));
    p.rng_seed = static_cast<std::uint64_t>(ini.get_int("world.seed", static_cast<std::int64_t>(p.rng_seed)));
    if (ini.has("world.categories")) {
        p.category_sizes.clear();
        for (auto f : split_csv(ini.get_string("world.categories", ""))) {
            std::size_t d = 0;
            if (!parse_size(f, d))
                throw ValidationError("config key 'world.categories': expected comma-separated counts");
            p.category_sizes.push_back(d);
        }
    }
    p.validate();
    return p;
}

SimulationConfig simulation_config_from_ini(const IniConfig& ini, SimulationConfig base) {
    base.stickiness = ini.get_double("simulation.stickiness", base.stickiness);
    base.decay = ini.get_double("simulation.decay", base.decay);
    base.novelty_cap = static_cast<int>(ini.get_int("simulation.novelty_cap", base.novelty_cap));
    if (ini.has("simulation.variant"))
        base.variant = parse_variant(ini.get_string("simulation.variant", ""));
    base.max_steps = static_cast<int>(ini.get_int("simulation.max_steps", base.max_steps));
    base.stop_window = static_cast<int>(ini.get_int("simulation.stop_window", base.stop_window));
    base.stop_growth = ini.get_double("simulation.stop_growth", base.stop_growth);
    base.warmup = static_cast<int>(ini.get_int("simulation.warmup", base.warmup));
    base.rng_seed = static_cast<std::uint64_t>(
        ini.get_int("simulation.seed", static_cast<std::int64_t>(base.rng_seed)));
    if (ini.has("simulation.exposure")) {
        const auto mode = ini.get_string("simulation.exposure", "");
        if (mode == "per_step")
            base.exposure = ExposureCounting::per_step;
        else if (mode == "per_neighbor")
            base.exposure = ExposureCounting::per_neighbor;
        else
            throw ValidationError("config key 'simulation.exposure': expected per_step or per_neighbor");
    }
    base.validate();
    return base;
}

} // namespace cascadelab
