#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cascadelab/calibrate.hpp"
#include "cascadelab/cmi.hpp"
#include "cascadelab/experiment.hpp"
#include "cascadelab/textio.hpp"
#include "cascadelab/worldio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cascadelab;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Common {
    int jobs = 0;
    std::vector<std::string> argv;
};

unsigned resolve_jobs(int flag) {
    if (flag > 0)
        return static_cast<unsigned>(flag);
    if (flag < 0)
        throw ValidationError("--jobs must be at least 1");
    if (const char* env = std::getenv("CASCADELAB_JOBS"); env != nullptr && *env != '\0') {
        std::size_t v = 0;
        if (!parse_size(env, v) || v == 0)
            throw ValidationError("CASCADELAB_JOBS must be a positive integer, got '" +
                                  std::string(env) + "'");
        return static_cast<unsigned>(v);
    }
    return 1;
}

struct Manifest {
    std::string command;
    std::string config;
    std::uint64_t seed = 0;
    std::vector<fs::path> inputs;
    std::vector<std::string> outputs;
};

void write_manifest(const fs::path& dir, const Manifest& m, const Common& common) {
    json j;
    j["command"] = m.command;
    j["argv"] = common.argv;
    j["config"] = m.config;
    j["master_seed"] = m.seed;
    j["artifact_version"] = kVersion;
    json inputs = json::object();
    for (const auto& p : m.inputs)
        inputs[p.string()] = sha256_file(p);
    j["input_hashes"] = inputs;
    j["outputs"] = m.outputs;
    write_file(dir / "run_manifest.json", j.dump(2) + "\n");
}

template <class Fn>
std::string render(Fn&& fn) {
    std::ostringstream s;
    fn(s);
    return s.str();
}

IniConfig maybe_config(const std::string& path) {
    return path.empty() ? IniConfig{} : IniConfig::load(path);
}

CascadeFile load_cascade(const fs::path& path, const Network& net) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open cascade '" + path.string() + "'");
    try {
        return read_cascade_jsonl(in, net);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

HashtagSpec spec_for(const World& world, const std::string& tag, std::vector<NodeId> seeds,
                     std::size_t empirical_size, double sample_rate) {
    HashtagSpec spec;
    spec.tag = tag;
    spec.seeds = std::move(seeds);
    const auto inferred = infer_hashtag_identity(world.ids, spec.seeds);
    spec.relevant_dims = inferred.relevant_dims;
    spec.identity = inferred.identity;
    spec.empirical_size = empirical_size;
    spec.sample_rate = sample_rate;
    return spec;
}

std::vector<Variant> parse_models(const std::string& text) {
    if (text == "all")
        return {std::begin(kAllVariants), std::end(kAllVariants)};
    std::vector<Variant> out;
    for (auto f : split_csv(text))
        out.push_back(parse_variant(f));
    if (out.empty())
        throw ValidationError("--models names no model");
    return out;
}

std::vector<std::string> category_names(const CategorySchema& schema) {
    std::vector<std::string> out;
    for (const auto& c : schema.categories)
        out.push_back(c.name);
    return out;
}

std::map<std::string, std::vector<double>> read_vector_table(const fs::path& path) {
    std::map<std::string, std::vector<double>> out;
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open '" + path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = split_fields(line);
        if (f.empty())
            continue;
        std::vector<double> v;
        for (std::size_t k = 1; k < f.size(); ++k) {
            double x = 0.0;
            if (!parse_double(f[k], x))
                throw ValidationError(path.string() + " line " + std::to_string(line_no) +
                                      ": not a number");
            v.push_back(x);
        }
        out[std::string(f[0])] = std::move(v);
    }
    return out;
}

struct HashtagEntry {
    EmpiricalHashtag hashtag;
    std::optional<std::size_t> coinage_month;
    fs::path cascade_path;
};

std::vector<HashtagEntry> load_hashtags(const fs::path& path, const World& world) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open hashtag list '" + path.string() + "'");
    std::vector<HashtagEntry> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const std::string where = path.string() + " line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw ValidationError(where + ": not JSON");
        }
        if (!j.contains("tag") || !j.contains("cascade"))
            throw ValidationError(where + ": needs 'tag' and 'cascade'");
        HashtagEntry e;
        const auto tag = j["tag"].get<std::string>();
        if (tag.empty() || tag.find(',') != std::string::npos || !seen.insert(tag).second)
            throw ValidationError(where + ": tag must be non-empty, unique and comma-free");
        e.cascade_path = path.parent_path() / j["cascade"].get<std::string>();
        auto file = load_cascade(e.cascade_path, world.net);
        const double rate = j.value("sample_rate", 1.0);
        if (!(rate > 0.0 && rate <= 1.0))
            throw ValidationError(where + ": sample_rate must lie in (0,1]");
        e.hashtag.spec = spec_for(world, tag, file.cascade.seeds, file.cascade.uses(), rate);
        e.hashtag.cascade = std::move(file.cascade);
        e.hashtag.topic = j.value("topic", std::string());
        if (e.hashtag.topic.find(',') != std::string::npos)
            throw ValidationError(where + ": topic may not contain commas");
        if (j.contains("coinage_month"))
            e.coinage_month = j["coinage_month"].get<std::size_t>();
        out.push_back(std::move(e));
    }
    if (out.empty())
        throw ValidationError("hashtag list '" + path.string() + "' is empty");
    return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string config, out;
};

void cmd_synth(const SynthArgs& a, const Common& common) {
    const auto ini = maybe_config(a.config);
    const auto params = world_params_from_ini(ini);
    const auto world = generate_world(params);
    for (const auto& w : world.warnings)
        std::cerr << "warning: " << w << '\n';
    const fs::path dir(a.out);
    save_world(dir, world, "synth");
    Manifest m{"synth", a.config, params.rng_seed, {}, {}};
    if (!a.config.empty())
        m.inputs.push_back(a.config);
    for (const char* f : kWorldFiles)
        m.outputs.emplace_back(f);
    m.outputs.emplace_back("world_manifest.json");

    const auto count = static_cast<std::size_t>(ini.get_int("plant.count", 0));
    if (count > 0) {
        const auto variant = parse_variant(ini.get_string("plant.variant", "network+identity"));
        const double s_h = ini.get_double("plant.stickiness", 0.5);
        const auto seed_count = static_cast<std::size_t>(ini.get_int("plant.seed_count", 10));
        std::vector<std::string> topics;
        for (auto t : split_csv(ini.get_string("plant.topics", "")))
            topics.emplace_back(t);
        const auto sim = simulation_config_from_ini(ini);
        fs::create_directories(dir / "cascades");
        std::ostringstream list;
        for (std::size_t k = 0; k < count; ++k) {
            const std::string tag = "h" + std::to_string(k);
            Rng rng(derive_seed(params.rng_seed, "plant", k));
            std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(world.net.node_count() - 1));
            auto seeds = bfs_seeds(world.net, pick(rng), seed_count);
            SimulationConfig cfg = sim;
            cfg.rng_seed = rng();
            const auto planted = plant_cascade(world, std::move(seeds), variant, s_h, cfg, tag);
            const std::string rel = "cascades/" + tag + ".jsonl";
            write_file(dir / rel, render([&](std::ostream& o) {
                           write_cascade_jsonl(o, planted.cascade, world.net,
                                               {{"tag", json(tag).dump()},
                                                {"variant", json(std::string(to_string(variant))).dump()},
                                                {"stickiness", json(s_h).dump()}});
                       }));
            json entry{{"tag", tag}, {"cascade", rel}, {"sample_rate", 1.0}};
            if (!topics.empty())
                entry["topic"] = topics[k % topics.size()];
            list << entry.dump() << '\n';
            m.outputs.push_back(rel);
        }
        write_file(dir / "hashtags.jsonl", list.str());
        m.outputs.emplace_back("hashtags.jsonl");
    }
    write_manifest(dir, m, common);
    std::cout << "world: " << world.net.node_count() << " nodes, " << world.net.edge_count()
              << " directed edges -> " << dir.string() << '\n';
}

struct SimulateArgs {
    std::string world, emp, seeds, variant = "network+identity", config, out;
    double stickiness = 0.5;
    std::uint64_t seed = 0;
};

void cmd_simulate(const SimulateArgs& a, const Common& common) {
    const auto world = load_world(a.world);
    const auto ini = maybe_config(a.config);
    auto cfg = simulation_config_from_ini(ini);
    cfg.variant = parse_variant(a.variant);
    cfg.stickiness = a.stickiness;
    cfg.rng_seed = a.seed;
    cfg.validate();
    std::vector<NodeId> seeds;
    Manifest m{"simulate", a.config, a.seed, {fs::path(a.world) / "world_manifest.json"}, {"cascade.jsonl"}};
    if (!a.emp.empty()) {
        seeds = load_cascade(a.emp, world.net).cascade.seeds;
        m.inputs.push_back(a.emp);
    }
    if (!a.seeds.empty())
        for (auto id : split_csv(a.seeds))
            seeds.push_back(world.net.require(trim(id)));
    if (seeds.empty())
        throw ValidationError("simulate needs --seeds or --emp");
    const auto spec = spec_for(world, "sim", seeds, 0, 1.0);
    Cascade c;
    if (cfg.variant == Variant::identity_only) {
        const auto rewired = rewire_configuration_model(world.net, derive_seed(a.seed, "rewire"));
        c = run_simulation(rewired, world.ids, spec, cfg);
    } else {
        c = run_simulation(world.net, world.ids, spec, cfg);
    }
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file(dir / "cascade.jsonl", render([&](std::ostream& o) {
                   write_cascade_jsonl(o, c, world.net,
                                       {{"variant", json(std::string(to_string(cfg.variant))).dump()},
                                        {"stickiness", json(cfg.stickiness).dump()},
                                        {"seed", json(a.seed).dump()}});
               }));
    write_manifest(dir, m, common);
    std::cout << "cascade: " << c.uses() << " uses over " << c.steps << " steps\n";
}

struct CalibrateArgs {
    std::string world, emp, variant = "network+identity", config, out;
    double sample_rate = 1.0;
    std::uint64_t seed = 0;
};

void cmd_calibrate(const CalibrateArgs& a, const Common& common) {
    const auto world = load_world(a.world);
    auto cfg = simulation_config_from_ini(maybe_config(a.config));
    cfg.variant = parse_variant(a.variant);
    const auto emp = load_cascade(a.emp, world.net).cascade;
    const auto spec = spec_for(world, "h", emp.seeds, emp.uses(), a.sample_rate);
    Network rewired;
    const Network* graph = &world.net;
    if (cfg.variant == Variant::identity_only) {
        rewired = rewire_configuration_model(world.net, derive_seed(a.seed, "rewire"));
        graph = &rewired;
    }
    const auto cache = HashtagCache::build(*graph, world.ids, spec, cfg.variant);
    const auto result = fit_stickiness(*graph, cache, spec, cfg, a.seed, resolve_jobs(common.jobs));
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file(dir / "calibration.csv",
               render([&](std::ostream& o) { write_calibration_trace(o, result); }));
    json j{{"stickiness", result.stickiness},
           {"objective", result.objective},
           {"coarse_interval", {result.coarse_interval.first, result.coarse_interval.second}},
           {"evaluations", result.evaluations},
           {"degenerate", result.degenerate},
           {"boundary", result.boundary}};
    write_file(dir / "calibration.json", j.dump(2) + "\n");
    write_manifest(dir, {"calibrate", a.config, a.seed,
                         {fs::path(a.world) / "world_manifest.json", a.emp},
                         {"calibration.csv", "calibration.json"}},
                   common);
    std::cout << "S_h = " << format_double(result.stickiness) << " (objective "
              << format_double(result.objective) << ")\n";
}

struct EvaluateArgs {
    std::string world, sim, emp, tag, out;
    double sample_rate = 1.0;
    std::uint64_t seed = 0;
};

void cmd_evaluate(const EvaluateArgs& a, const Common& common) {
    const auto world = load_world(a.world);
    const auto emp = load_cascade(a.emp, world.net);
    const auto sim = load_cascade(a.sim, world.net);
    MetricContext ctx;
    ctx.net = &world.net;
    ctx.ids = &world.ids;
    ctx.regions = &world.regions;
    ctx.seeds = emp.cascade.seeds;
    ctx.sample_rate = a.sample_rate;
    ctx.rng_seed = a.seed;
    const auto m = compute_metrics(sim.cascade, emp.cascade, ctx);
    std::string model = "sim";
    if (auto it = sim.labels.find("variant"); it != sim.labels.end())
        model = json::parse(it->second).get<std::string>();
    const std::string tag = a.tag.empty() ? fs::path(a.emp).stem().string() : a.tag;
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file(dir / "metrics.csv", render([&](std::ostream& o) {
                   write_metric_header(o);
                   write_metric_row(o, tag, model, 0, m);
               }));
    write_manifest(dir, {"evaluate", "", a.seed,
                         {fs::path(a.world) / "world_manifest.json", a.sim, a.emp}, {"metrics.csv"}},
                   common);
    std::cout << render([&](std::ostream& o) { write_metric_row(o, tag, model, 0, m); });
}

struct TrialArgs {
    std::string world, hashtags, models = "all", config, out = "results", pooling = "corpus";
    std::string embeddings, frequencies;
    double threshold = 0.3;
    std::size_t runs = 5, augment = 16;
    std::uint64_t seed = 0;
};

void cmd_trial(const TrialArgs& a, const Common& common) {
    const auto world = load_world(a.world);
    const auto ini = maybe_config(a.config);
    TrialConfig cfg;
    cfg.sim = simulation_config_from_ini(ini);
    cfg.models = parse_models(a.models);
    cfg.runs = a.runs;
    cfg.master_seed = a.seed;
    cfg.jobs = resolve_jobs(common.jobs);
    cfg.growth_width = static_cast<std::size_t>(ini.get_int("trial.growth_width", 100));
    cfg.kl_bins = static_cast<std::size_t>(ini.get_int("trial.kl_bins", 20));
    cfg.region_alpha = ini.get_double("trial.region_alpha", 0.5);
    if (cfg.runs < 1)
        throw ValidationError("--runs must be at least 1");
    CmiPooling pooling;
    if (a.pooling == "corpus")
        pooling = CmiPooling::corpus;
    else if (a.pooling == "per-hashtag")
        pooling = CmiPooling::per_hashtag;
    else
        throw ValidationError("--pooling must be corpus or per-hashtag");

    const auto entries = load_hashtags(a.hashtags, world);
    std::vector<EmpiricalHashtag> hashtags;
    for (const auto& e : entries)
        hashtags.push_back(e.hashtag);

    const auto positions = node_position_features(world.net, 0.85, 1e-10, a.seed);
    const auto regressor = train_size_regressor(world, hashtags, cfg, a.augment);
    TrialInputs inputs{&world, &positions, regressor.get()};
    const auto trials = run_experiment(inputs, hashtags, cfg);
    const auto records = metric_records(trials);
    const auto report = compose_cmi(records, pooling);

    Embeddings emb;
    FrequencySeries freq;
    if (!a.embeddings.empty())
        emb = read_vector_table(a.embeddings);
    if (!a.frequencies.empty())
        freq = read_vector_table(a.frequencies);
    std::vector<double> eig(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i)
        eig[i] = positions[i].eigencentrality;
    std::vector<CovariateRow> covariates;
    std::vector<std::size_t> sizes;
    for (const auto& e : entries) {
        std::optional<SemanticCovariates> sem;
        if (!emb.empty())
            sem = semantic_covariates(emb, freq, e.hashtag.spec.tag, a.threshold, e.coinage_month);
        covariates.push_back(compute_covariates(world, e.hashtag.spec, eig, e.hashtag.topic, sem));
        sizes.push_back(e.hashtag.cascade.uses());
    }

    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file(dir / "trials.csv", render([&](std::ostream& o) {
                   write_metric_header(o);
                   for (const auto& r : records)
                       write_metric_row(o, r.hashtag, r.model, r.run, r.metrics);
               }));
    write_file(dir / "calibration.csv", render([&](std::ostream& o) {
                   o << "hashtag,model,s_h,objective,evaluations,degenerate,boundary,error\n";
                   for (const auto& t : trials)
                       for (const auto& m : t.models) {
                           o << t.hashtag << ',' << to_string(m.variant) << ',';
                           if (m.error) {
                               std::string msg = *m.error;
                               std::replace(msg.begin(), msg.end(), ',', ';');
                               o << "NA,NA,0,0,0," << msg << '\n';
                               continue;
                           }
                           const auto& c = m.calibration;
                           o << format_double(c.stickiness) << ',' << format_double(c.objective) << ','
                             << c.evaluations << ',' << c.degenerate << ',' << c.boundary << ",\n";
                       }
               }));
    write_file(dir / "cmi.csv", render([&](std::ostream& o) { write_cmi_csv(o, report); }));
    write_file(dir / "covariates.csv", render([&](std::ostream& o) {
                   write_covariates_csv(o, covariates, sizes, category_names(world.ids.schema()));
               }));
    Manifest m{"trial", a.config, a.seed,
               {fs::path(a.world) / "world_manifest.json", a.hashtags},
               {"trials.csv", "calibration.csv", "cmi.csv", "covariates.csv"}};
    if (!a.config.empty())
        m.inputs.push_back(a.config);
    for (const auto& e : entries)
        m.inputs.push_back(e.cascade_path);
    write_manifest(dir, m, common);
    for (const auto& note : report.notes)
        std::cerr << "note: " << note << '\n';
    for (const auto& t : trials)
        for (const auto& mo : t.models)
            if (mo.error)
                std::cerr << "warning: " << t.hashtag << '/' << to_string(mo.variant)
                          << " failed: " << *mo.error << '\n';
    std::cout << records.size() << " metric rows for " << trials.size() << " hashtags -> "
              << dir.string() << '\n';
}

struct TableArgs {
    std::string cmi, covariates, out;
    std::size_t folds = 5, repeats = 10, trees = 200;
    std::uint64_t seed = 1;
};

CmiReport load_cmi(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open cmi table '" + path + "'");
    return read_cmi_csv(in);
}

CovariateTable load_covariates(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open covariate table '" + path + "'");
    return read_covariates_csv(in);
}

std::map<std::string, std::vector<double>> feature_map(const CovariateTable& table,
                                                       std::vector<std::string>* names = nullptr) {
    const auto matrix = covariate_matrix(table.rows, table.categories);
    if (names != nullptr)
        *names = matrix.names;
    std::map<std::string, std::vector<double>> out;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        out[table.rows[i].hashtag] = matrix.rows[i];
    return out;
}

void cmd_regress(const TableArgs& a, const Common& common) {
    const auto report = load_cmi(a.cmi);
    const auto table = load_covariates(a.covariates);
    std::vector<std::string> names;
    const auto features = feature_map(table, &names);
    std::vector<RegressionRow> rows;
    for (const auto& r : report.rows) {
        if (!r.cmi)
            continue;
        auto it = features.find(r.hashtag);
        if (it == features.end())
            throw ValidationError("no covariates for hashtag '" + r.hashtag + "'");
        rows.push_back({it->second, parse_variant(r.model), *r.cmi});
    }
    const auto result = fit_interaction_regression(rows, names);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file(dir / "regression.csv",
               render([&](std::ostream& o) { write_regression_csv(o, result); }));
    write_manifest(dir, {"regress", "", 0, {a.cmi, a.covariates}, {"regression.csv"}}, common);
    if (!result.dropped.empty())
        std::cerr << "note: " << result.dropped.size()
                  << " rank-deficient design columns dropped (see regression.csv)\n";
    std::cout << result.names.size() << " coefficients from " << result.observations << " rows\n";
}

void cmd_select(const TableArgs& a, const Common& common) {
    const auto report = load_cmi(a.cmi);
    const auto features = feature_map(load_covariates(a.covariates));
    ForestOptions forest;
    forest.trees = a.trees;
    forest.seed = a.seed;
    const auto result = combined_models(report, features, a.folds, a.repeats, forest);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_file(dir / "selection.json",
               render([&](std::ostream& o) { write_selection_json(o, result); }));
    write_manifest(dir, {"select", "", a.seed, {a.cmi, a.covariates}, {"selection.json"}}, common);
    std::cout << "selector accuracy " << format_double(result.accuracy) << " (majority baseline "
              << format_double(result.majority_baseline) << ")\n";
}

struct Summary {
    std::size_t n = 0;
    double sum = 0.0, sum_sq = 0.0;
    void add(double v) {
        ++n;
        sum += v;
        sum_sq += v * v;
    }
    double mean() const { return sum / static_cast<double>(n); }
    double sd() const {
        const double m = mean();
        return n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * m * m) / (n - 1.0))) : 0.0;
    }
};

// Rank-based bins of per-hashtag values, ties ordered by hashtag.
std::map<std::string, std::string> rank_levels(std::vector<std::pair<double, std::string>> values,
                                               const std::vector<std::string>& labels) {
    std::sort(values.begin(), values.end());
    std::map<std::string, std::string> out;
    const std::size_t n = values.size();
    for (std::size_t i = 0; i < n; ++i)
        out[values[i].second] = labels[std::min(labels.size() - 1, i * labels.size() / n)];
    return out;
}

void cmd_report(const TableArgs& a, const Common& common) {
    const auto report = load_cmi(a.cmi);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    Manifest m{"report", "", 0, {a.cmi}, {"cmi_by_model.csv"}};

    std::map<std::string, std::array<Summary, 4>> by_model;
    for (const auto& r : report.rows) {
        auto& s = by_model[r.model];
        if (r.cmi)
            s[0].add(*r.cmi);
        if (r.popularity)
            s[1].add(*r.popularity);
        if (r.growth)
            s[2].add(*r.growth);
        if (r.adopters)
            s[3].add(*r.adopters);
    }
    auto mean_or_na = [](const Summary& s) { return s.n ? format_double(s.mean()) : std::string("NA"); };
    write_file(dir / "cmi_by_model.csv", render([&](std::ostream& o) {
                   o << "model,n,mean_cmi,sd_cmi,se_cmi,mean_pop,mean_growth,mean_adopters\n";
                   for (const auto& [model, s] : by_model) {
                       o << model << ',' << s[0].n << ',' << mean_or_na(s[0]) << ','
                         << format_double(s[0].sd()) << ','
                         << format_double(s[0].n ? s[0].sd() / std::sqrt(double(s[0].n)) : 0.0) << ','
                         << mean_or_na(s[1]) << ',' << mean_or_na(s[2]) << ',' << mean_or_na(s[3])
                         << '\n';
                   }
               }));

    if (!a.covariates.empty()) {
        const auto table = load_covariates(a.covariates);
        m.inputs.push_back(a.covariates);
        std::map<std::string, std::map<std::string, std::string>> levels;
        std::map<std::string, std::string> topic;
        for (const auto& r : table.rows)
            topic[r.hashtag] = r.topic.empty() ? "none" : r.topic;
        levels["topic"] = topic;
        const std::vector<std::string> tertiles{"low", "mid", "high"};
        auto numeric = [&](const std::string& name, auto get) {
            std::vector<std::pair<double, std::string>> v;
            for (const auto& r : table.rows)
                v.emplace_back(get(r), r.hashtag);
            levels[name] = rank_levels(v, tertiles);
        };
        numeric("semantic_sparsity", [](const CovariateRow& r) { return r.semantic_sparsity; });
        numeric("semantic_growth", [](const CovariateRow& r) { return r.semantic_growth; });
        for (std::size_t c = 0; c < table.categories.size(); ++c)
            numeric("seed_similarity_" + table.categories[c],
                    [c](const CovariateRow& r) { return r.seed_similarity[c]; });
        numeric("seed_proximity", [](const CovariateRow& r) { return r.seed_proximity; });
        numeric("median_seed_eigencentrality",
                [](const CovariateRow& r) { return r.median_seed_eigencentrality; });

        write_file(dir / "cmi_by_covariate_level.csv", render([&](std::ostream& o) {
                       o << "covariate,level,model,n,mean_cmi\n";
                       for (const auto& [cov, lv] : levels) {
                           std::map<std::pair<std::string, std::string>, Summary> cells;
                           for (const auto& r : report.rows)
                               if (r.cmi && lv.count(r.hashtag))
                                   cells[{lv.at(r.hashtag), r.model}].add(*r.cmi);
                           for (const auto& [key, s] : cells)
                               o << cov << ',' << key.first << ',' << key.second << ',' << s.n << ','
                                 << format_double(s.mean()) << '\n';
                       }
                   }));
        std::vector<std::pair<double, std::string>> sizes;
        for (std::size_t i = 0; i < table.rows.size(); ++i)
            sizes.emplace_back(static_cast<double>(table.empirical_sizes[i]), table.rows[i].hashtag);
        const auto quintile = rank_levels(sizes, {"q1", "q2", "q3", "q4", "q5"});
        write_file(dir / "cmi_by_size_quintile.csv", render([&](std::ostream& o) {
                       o << "quintile,model,n,mean_cmi\n";
                       std::map<std::pair<std::string, std::string>, Summary> cells;
                       for (const auto& r : report.rows)
                           if (r.cmi && quintile.count(r.hashtag))
                               cells[{quintile.at(r.hashtag), r.model}].add(*r.cmi);
                       for (const auto& [key, s] : cells)
                           o << key.first << ',' << key.second << ',' << s.n << ','
                             << format_double(s.mean()) << '\n';
                   }));
        m.outputs.emplace_back("cmi_by_covariate_level.csv");
        m.outputs.emplace_back("cmi_by_size_quintile.csv");
    }
    write_manifest(dir, m, common);
    std::cout << "report tables -> " << dir.string() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hashtag cascade simulation and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    for (int i = 0; i < argc; ++i)
        common.argv.emplace_back(argv[i]);
    app.add_option("--jobs,-j", common.jobs, "Worker threads (default: $CASCADELAB_JOBS or 1)");
    app.set_version_flag("--version", kVersion);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic world (and planted cascades)");
    s->add_option("--config", synth.config, "INI file with [world], [simulation], [plant]")
        ->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output world directory")->required();

    SimulateArgs sim;
    auto* si = app.add_subcommand("simulate", "Run one cascade");
    si->add_option("--world", sim.world, "World directory")->required();
    si->add_option("--seeds", sim.seeds, "Comma-separated seed node ids");
    si->add_option("--emp", sim.emp, "Take the seeds from this cascade file");
    si->add_option("--variant", sim.variant, "network+identity, network-only or identity-only");
    si->add_option("--stickiness", sim.stickiness, "Stickiness S_h in [0,1]");
    si->add_option("--seed", sim.seed, "Simulation RNG seed");
    si->add_option("--config", sim.config, "INI file with a [simulation] section")->check(CLI::ExistingFile);
    si->add_option("--out", sim.out, "Output directory")->required();

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Fit stickiness to an empirical cascade");
    c->add_option("--world", cal.world, "World directory")->required();
    c->add_option("--emp", cal.emp, "Empirical cascade file")->required();
    c->add_option("--variant", cal.variant, "Model to calibrate");
    c->add_option("--sample-rate", cal.sample_rate, "Share of real usage the empirical cascade holds");
    c->add_option("--seed", cal.seed, "Master seed");
    c->add_option("--config", cal.config, "INI file with a [simulation] section")->check(CLI::ExistingFile);
    c->add_option("--out", cal.out, "Output directory")->required();

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Score a simulated against an empirical cascade");
    e->add_option("--world", ev.world, "World directory")->required();
    e->add_option("--sim", ev.sim, "Simulated cascade file")->required();
    e->add_option("--emp", ev.emp, "Empirical cascade file")->required();
    e->add_option("--tag", ev.tag, "Hashtag label for the output row");
    e->add_option("--sample-rate", ev.sample_rate, "Share of real usage the empirical cascade holds");
    e->add_option("--seed", ev.seed, "Downsampling seed");
    e->add_option("--out", ev.out, "Output directory")->required();

    TrialArgs tr;
    auto* t = app.add_subcommand("trial", "Calibrate, simulate and score every model per hashtag");
    t->add_option("--world", tr.world, "World directory")->required();
    t->add_option("--hashtags", tr.hashtags, "JSONL list of {tag, cascade, sample_rate, topic}")->required();
    t->add_option("--models", tr.models, "all, or a comma-separated list");
    t->add_option("--runs", tr.runs, "Runs per model");
    t->add_option("--seed", tr.seed, "Master seed");
    t->add_option("--config", tr.config, "INI file with a [simulation] section")->check(CLI::ExistingFile);
    t->add_option("--augment", tr.augment, "Extra engine cascades for the growth regressor");
    t->add_option("--pooling", tr.pooling, "corpus or per-hashtag");
    t->add_option("--embeddings", tr.embeddings, "token<TAB>vector file");
    t->add_option("--frequencies", tr.frequencies, "token<TAB>monthly counts file");
    t->add_option("--threshold", tr.threshold, "Cosine threshold for similar tokens");
    t->add_option("--out", tr.out, "Output directory");

    TableArgs reg, sel, rep;
    auto* r = app.add_subcommand("regress", "Interaction regression of cmi on covariates");
    r->add_option("--cmi", reg.cmi, "cmi.csv from a trial")->required();
    r->add_option("--covariates", reg.covariates, "covariates.csv from a trial")->required();
    r->add_option("--out", reg.out, "Output directory")->required();

    auto* se = app.add_subcommand("select", "Optimal and predicted combined models");
    se->add_option("--cmi", sel.cmi, "cmi.csv from a trial")->required();
    se->add_option("--covariates", sel.covariates, "covariates.csv from a trial")->required();
    se->add_option("--folds", sel.folds, "Cross-validation folds (grouped by hashtag)");
    se->add_option("--repeats", sel.repeats, "Cross-validation repeats");
    se->add_option("--trees", sel.trees, "Trees per forest");
    se->add_option("--seed", sel.seed, "Fold and forest seed");
    se->add_option("--out", sel.out, "Output directory")->required();

    auto* rp = app.add_subcommand("report", "Plot-ready cmi tables");
    rp->add_option("--cmi", rep.cmi, "cmi.csv from a trial")->required();
    rp->add_option("--covariates", rep.covariates, "covariates.csv, for the covariate and size tables");
    rp->add_option("--out", rep.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::CallForVersion& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }

    try {
        common.jobs = static_cast<int>(resolve_jobs(common.jobs));
        if (*s)
            cmd_synth(synth, common);
        else if (*si)
            cmd_simulate(sim, common);
        else if (*c)
            cmd_calibrate(cal, common);
        else if (*e)
            cmd_evaluate(ev, common);
        else if (*t)
            cmd_trial(tr, common);
        else if (*r)
            cmd_regress(reg, common);
        else if (*se)
            cmd_select(sel, common);
        else if (*rp)
            cmd_report(rep, common);
    } catch (const ValidationError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "failure: " << err.what() << '\n';
        return 2;
    }
    return 0;
}
