#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpmal/data_io.hpp"
#include "gpmal/error.hpp"
#include "gpmal/eval_harness.hpp"
#include "gpmal/gp.hpp"
#include "gpmal/moead.hpp"
#include "gpmal/neighbors.hpp"

namespace gpmal::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
    std::string data;
    std::string label = "last";
    std::vector<std::uint64_t> seeds{1};
    std::size_t generations = 1000;
    std::size_t population = 100;
    std::size_t neighbors_k = 10;
    std::size_t tmax = 0;  // 0 selects max(2, ceil(m/2))
    std::size_t snapshot_every = 100;
    std::string out;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    double p_crossover = 0.70;
    double p_mutation = 0.15;
    double p_arity = 0.15;
    std::size_t neighborhood_size = 20;
    std::size_t replace_limit = 2;
    double mating_prob = 0.9;
    std::string neighbor_cache;

    void validate() const {
        if (population < 1) throw ConfigError("--population must be at least 1");
        if (neighbors_k < 1) throw ConfigError("--neighbors-k must be at least 1");
        if (tmax == 1) throw ConfigError("--tmax must be at least 2");
        if (threads < 1) throw ConfigError("--threads must be at least 1");
        if (seeds.empty()) throw ConfigError("at least one --seed is required");
    }

    ordered_json to_json() const {
        return {{"data", data},
                {"label", label},
                {"seeds", seeds},
                {"generations", generations},
                {"population", population},
                {"neighbors_k", neighbors_k},
                {"tmax", tmax},
                {"snapshot_every", snapshot_every},
                {"out", out},
                {"threads", threads},
                {"p_crossover", p_crossover},
                {"p_standard_mutation", p_mutation},
                {"p_arity_mutation", p_arity},
                {"neighborhood_size", neighborhood_size},
                {"replace_limit", replace_limit},
                {"mating_neighborhood_prob", mating_prob},
                {"min_tree_depth", kMinTreeDepth},
                {"max_tree_depth", kMaxTreeDepth},
                {"neighbor_cache", neighbor_cache}};
    }
};

namespace detail {

inline std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::string trees_file_text(const ArchiveEntry& e) {
    return "# t=" + std::to_string(e.objectives.raw_t) + " cost=" + format_double(e.objectives.f_cost) +
           " generation=" + std::to_string(e.generation) + " seed=" + std::to_string(e.seed) + "\n" +
           serialize_individual(e.individual);
}

inline std::string archive_csv_text(const std::vector<ArchiveEntry>& front) {
    std::string out = "t,cost,generation,seed\n";
    for (const auto& e : front)
        out += std::to_string(e.objectives.raw_t) + "," + format_double(e.objectives.f_cost) + "," +
               std::to_string(e.generation) + "," + std::to_string(e.seed) + "\n";
    return out;
}

}  // namespace detail

/// Writes one seed's outputs: archive.csv, t<N>.trees, population.csv, manifest.json.
inline void write_run_outputs(const fs::path& dir, const RunResult& result, const RunConfig& cfg,
                              std::uint64_t seed, std::size_t t_max, const Dataset& d, ordered_json timings,
                              const std::vector<std::string>& argv) {
    fs::create_directories(dir);
    const auto front = result.archive.front();
    detail::write_text(dir / "archive.csv", detail::archive_csv_text(front));
    ordered_json front_json = ordered_json::array();
    for (const auto& e : front) {
        const std::string name = "t" + std::to_string(e.objectives.raw_t) + ".trees";
        detail::write_text(dir / name, detail::trees_file_text(e));
        front_json.push_back(
            {{"t", e.objectives.raw_t}, {"cost", e.objectives.f_cost}, {"generation", e.generation}, {"file", name}});
    }

    std::string pop = "subproblem,t,cost\n";
    for (std::size_t i = 0; i < result.population_objectives.size(); ++i)
        pop += std::to_string(i) + "," + std::to_string(result.population_objectives[i].raw_t) + "," +
               detail::format_double(result.population_objectives[i].f_cost) + "\n";
    detail::write_text(dir / "population.csv", pop);

    ordered_json snaps = ordered_json::array();
    for (const auto& s : result.snapshots) {
        ordered_json pts = ordered_json::array();
        for (const auto& [t, c] : s.front) pts.push_back({{"t", t}, {"cost", c}});
        snaps.push_back({{"generation", s.generation}, {"front", pts}});
    }

    timings["evolution_s"] = result.seconds;
    ordered_json manifest = {
        {"command", "evolve"},
        {"argv", argv},
        {"config", cfg.to_json()},
        {"seed", seed},
        {"dataset",
         {{"n", d.num_instances()},
          {"m", d.num_features()},
          {"hash", dataset_hash(d)},
          {"feature_names", d.feature_names()}}},
        {"t_max", t_max},
        {"evaluations",
         {{"initial", result.initial_evaluations},
          {"offspring", result.offspring_evaluations},
          {"expected_offspring", cfg.population * cfg.generations}}},
        {"max_replacements_per_offspring", result.max_replacements},
        {"archive_size", result.archive.size()},
        {"ideal", {result.ideal[0], result.ideal[1]}},
        {"front", front_json},
        {"snapshots", snaps},
        {"timings", timings}};
    detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline NeighborModel neighbor_model_for(const Dataset& d, const RunConfig& cfg) {
    if (!cfg.neighbor_cache.empty()) {
        if (auto cached = load_neighbor_cache(cfg.neighbor_cache, dataset_hash(d), cfg.neighbors_k))
            return std::move(*cached);
    }
    NeighborModel nm = build_neighbor_model(d, cfg.neighbors_k, cfg.threads);
    if (!cfg.neighbor_cache.empty()) save_neighbor_cache(cfg.neighbor_cache, nm, dataset_hash(d));
    return nm;
}

inline void evolve(const RunConfig& cfg, const std::vector<std::string>& argv, std::ostream& log) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const LabeledDataset raw = load_dataset(cfg.data, LabelSpec::parse(cfg.label));
    const Dataset d = scale_features(raw.data);
    const std::size_t t_max = cfg.tmax ? cfg.tmax : default_t_max(d.num_features());
    const NeighborModel nm = neighbor_model_for(d, cfg);
    const double nm_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (std::uint64_t seed : cfg.seeds) {
        MoeadConfig mc;
        mc.population = cfg.population;
        mc.generations = cfg.generations;
        mc.neighborhood_size = cfg.neighborhood_size;
        mc.replace_limit = cfg.replace_limit;
        mc.mating_neighborhood_prob = cfg.mating_prob;
        mc.snapshot_every = cfg.snapshot_every;
        mc.threads = cfg.threads;
        mc.seed = seed;
        mc.variation = {cfg.p_crossover, cfg.p_mutation, cfg.p_arity, kMaxTreeDepth, t_max};
        const RunResult result = run(d, nm, mc);
        const fs::path dir = cfg.seeds.size() == 1 ? fs::path(cfg.out) : fs::path(cfg.out) / ("seed_" + std::to_string(seed));
        ordered_json timings = {{"neighbor_model_s", nm_seconds}};
        timings["total_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_run_outputs(dir, result, cfg, seed, t_max, d, timings, argv);
        log << "seed " << seed << ": front";
        for (const auto& e : result.archive.front())
            log << " t" << e.objectives.raw_t << "=" << std::setprecision(4) << e.objectives.f_cost;
        log << " (" << std::setprecision(3) << result.seconds << " s) -> " << dir.string() << "\n";
    }
}

/// Loads the front written by `evolve` from a run directory.
inline std::vector<FrontMember> read_front(const fs::path& dir, std::size_t num_features) {
    std::istringstream csv(detail::read_text(dir / "archive.csv"));
    std::string line;
    std::getline(csv, line);
    std::vector<FrontMember> out;
    while (std::getline(csv, line)) {
        if (gpmal::detail::trim(line).empty()) continue;
        const auto cells = gpmal::detail::split_csv(line);
        if (cells.size() < 2) throw Error("malformed archive.csv line: " + line);
        FrontMember fm{std::stoul(std::string(cells[0])), std::stod(std::string(cells[1])),
                       parse_individual(detail::read_text(dir / ("t" + std::string(cells[0]) + ".trees")),
                                        num_features)};
        if (fm.individual.size() != fm.t) throw Error("tree file for t=" + std::to_string(fm.t) + " has " +
                                                      std::to_string(fm.individual.size()) + " trees");
        out.push_back(std::move(fm));
    }
    return out;
}

struct EvaluateOptions {
    std::string archive;
    std::string data;
    std::string label = "last";
    std::uint64_t seed = 1;
    std::size_t folds = 10;
    std::size_t knn_k = 3;
    std::string out;
    bool export_embeddings = false;
};

inline FrontReport evaluate(const EvaluateOptions& opt, std::ostream& log) {
    const LabeledDataset d = scale_features(load_dataset(opt.data, LabelSpec::parse(opt.label)));
    if (!d.labels) throw ConfigError("evaluate needs a labelled dataset (--label last|<name>)");
    const auto front = read_front(opt.archive, d.data.num_features());
    const FrontReport rep =
        build_front_report(d, front, opt.seed, opt.knn_k, opt.folds, fs::path(opt.data).stem().string());
    const fs::path out = opt.out.empty() ? fs::path(opt.archive) : fs::path(opt.out);
    fs::create_directories(out);

    std::string csv = "t,cost,knn_train,knn_test,pca_knn_test\n";
    for (const auto& r : rep.rows)
        csv += std::to_string(r.t) + "," + detail::format_double(r.cost) + "," + detail::format_double(r.knn_train) +
               "," + detail::format_double(r.knn_test) + "," +
               (r.pca_knn_test ? detail::format_double(*r.pca_knn_test) : std::string()) + "\n";
    detail::write_text(out / "front_report.csv", csv);

    std::string usage = "t,feature,name,count\n";
    for (const auto& fm : front)
        for (const auto& [j, count] : feature_usage(fm.individual))
            usage += std::to_string(fm.t) + "," + std::to_string(j) + "," + d.data.feature_names()[j] + "," +
                     std::to_string(count) + "\n";
    detail::write_text(out / "feature_usage.csv", usage);

    ordered_json summary = {{"dataset", rep.dataset},
                            {"fold_seed", rep.seed},
                            {"folds", opt.folds},
                            {"knn_k", opt.knn_k},
                            {"hypervolume", {{"gp", rep.gp_hypervolume}, {"pca", rep.pca_hypervolume}}},
                            {"hypervolume_component_scale", kHypervolumeComponentScale},
                            {"clamped_points", rep.clamped_points},
                            {"all_features_knn_test", rep.all_features_knn_test},
                            {"warnings", rep.warnings}};
    detail::write_text(out / "front_summary.json", summary.dump(2) + "\n");

    if (opt.export_embeddings)
        for (const auto& fm : front) {
            std::ostringstream s;
            std::vector<std::string> header;
            for (std::size_t j = 0; j < fm.t; ++j) header.push_back("c" + std::to_string(j));
            write_matrix_csv(s, apply_individual(fm.individual, d.data), header);
            detail::write_text(out / ("embedding_t" + std::to_string(fm.t) + ".csv"), s.str());
        }

    for (const auto& w : rep.warnings) log << "warning: " << w << "\n";
    for (const auto& r : rep.rows)
        log << "t=" << r.t << " cost=" << std::setprecision(4) << r.cost << " knn_test=" << r.knn_test << "\n";
    log << "hypervolume gp=" << rep.gp_hypervolume << " pca=" << rep.pca_hypervolume << "\n";
    return rep;
}

struct ApplyOptions {
    std::string model;
    std::string data;
    std::string label = "last";
    std::string out;
    std::string dot;
};

inline void apply(const ApplyOptions& opt, std::ostream& stdout_stream) {
    const LabeledDataset raw = load_dataset(opt.data, LabelSpec::parse(opt.label));
    const Dataset d = scale_features(raw.data);
    const Individual ind = parse_individual(detail::read_text(opt.model), d.num_features());
    const Matrix e = apply_individual(ind, d);
    std::vector<std::string> header;
    for (std::size_t j = 0; j < ind.size(); ++j) header.push_back("c" + std::to_string(j));
    if (opt.out.empty()) {
        write_matrix_csv(stdout_stream, e, header);
    } else {
        std::ostringstream s;
        write_matrix_csv(s, e, header);
        detail::write_text(opt.out, s.str());
    }
    if (!opt.dot.empty()) {
        std::string dot;
        for (std::size_t j = 0; j < ind.size(); ++j)
            dot += tree_to_dot(ind.tree(j), "tree" + std::to_string(j), d.feature_names());
        detail::write_text(opt.dot, dot);
    }
}

/// Entry point shared by the executable and the tests.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    CLI::App app{"Multi-objective GP manifold learning", "gpmal"};
    app.require_subcommand(1);
    // config keys live under an [evolve] section; option values given on the command line win
    app.set_config("--config", "", "INI/TOML file of defaults, e.g. [evolve] generations=500");
    app.fallthrough();

    RunConfig cfg;
    auto* evolve_cmd = app.add_subcommand("evolve", "evolve a front of mappings for each seed");
    evolve_cmd->add_option("--data", cfg.data, "CSV file with header row")->required();
    evolve_cmd->add_option("--label", cfg.label, "label column: last, none or a column name");
    evolve_cmd->add_option("--seed", cfg.seeds, "seed(s); comma separated or repeated")->delimiter(',');
    evolve_cmd->add_option("--generations", cfg.generations);
    evolve_cmd->add_option("--population", cfg.population);
    evolve_cmd->add_option("--neighbors-k", cfg.neighbors_k, "base neighbour sample size");
    evolve_cmd->add_option("--tmax", cfg.tmax, "maximum trees (0 = max(2, ceil(m/2)))");
    evolve_cmd->add_option("--snapshot-every", cfg.snapshot_every, "front snapshot interval (0 = off)");
    evolve_cmd->add_option("--out", cfg.out, "output directory")->required();
    evolve_cmd->add_option("--threads", cfg.threads);
    evolve_cmd->add_option("--p-crossover", cfg.p_crossover);
    evolve_cmd->add_option("--p-mutation", cfg.p_mutation, "standard mutation rate");
    evolve_cmd->add_option("--p-arity", cfg.p_arity, "add/remove mutation rate");
    evolve_cmd->add_option("--neighborhood-size", cfg.neighborhood_size, "MOEA/D weight neighbourhood size");
    evolve_cmd->add_option("--replace-limit", cfg.replace_limit, "max replacements per offspring");
    evolve_cmd->add_option("--mating-prob", cfg.mating_prob, "probability of mating within the neighbourhood");
    evolve_cmd->add_option("--neighbor-cache", cfg.neighbor_cache, "binary neighbour-model cache file");

    ApplyOptions apply_opt;
    auto* apply_cmd = app.add_subcommand("apply", "map a dataset through a serialized individual");
    apply_cmd->add_option("--model", apply_opt.model, "t<N>.trees file")->required();
    apply_cmd->add_option("--data", apply_opt.data)->required();
    apply_cmd->add_option("--label", apply_opt.label);
    apply_cmd->add_option("--out", apply_opt.out, "embedding CSV (default stdout)");
    apply_cmd->add_option("--dot", apply_opt.dot, "also write Graphviz digraphs, one per tree");

    EvaluateOptions eval_opt;
    auto* eval_cmd = app.add_subcommand("evaluate", "score an archive with kNN, PCA and hypervolume");
    eval_cmd->add_option("--archive", eval_opt.archive, "directory written by evolve")->required();
    eval_cmd->add_option("--data", eval_opt.data)->required();
    eval_cmd->add_option("--label", eval_opt.label);
    eval_cmd->add_option("--seed", eval_opt.seed, "fold assignment seed");
    eval_cmd->add_option("--folds", eval_opt.folds);
    eval_cmd->add_option("--knn-k", eval_opt.knn_k);
    eval_cmd->add_option("--out", eval_opt.out, "report directory (default: the archive directory)");
    eval_cmd->add_flag("--export-embeddings", eval_opt.export_embeddings);

    std::size_t sched_n = 0, sched_k = 10;
    auto* sched_cmd = app.add_subcommand("schedule", "print the sampled neighbour rank positions");
    sched_cmd->add_option("--n", sched_n, "instance count")->required();
    sched_cmd->add_option("--neighbors-k,--k", sched_k, "base sample size");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "gpmal: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (evolve_cmd->parsed()) {
            std::vector<std::string> argv{"gpmal"};
            argv.insert(argv.end(), args.begin(), args.end());
            cli::evolve(cfg, argv, err);
        } else if (apply_cmd->parsed()) {
            cli::apply(apply_opt, out);
        } else if (eval_cmd->parsed()) {
            cli::evaluate(eval_opt, err);
        } else if (sched_cmd->parsed()) {
            if (sched_n < 2 || sched_k < 1) throw ConfigError("schedule requires --n >= 2 and --k >= 1");
            const auto s = sample_schedule(sched_n, sched_k);
            for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
            out << "\n";
        }
    } catch (const ConfigError& e) {
        err << "gpmal: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "gpmal: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace gpmal::cli
