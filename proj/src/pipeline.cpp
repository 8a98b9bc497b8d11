#include "dpsynth/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include "json.hpp"

namespace dpsynth {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& doc, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& item : doc.items())
        if (!known.count(item.key()))
            throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
}

json config_to_json(const PipelineConfig& c) {
    json doc;
    doc["data_csv"] = c.data_csv;
    doc["domain_json"] = c.domain_json;
    doc["output_dir"] = c.output_dir;
    doc["epsilon"] = c.epsilon;
    doc["delta"] = c.delta;
    doc["shares"] = {{"preprocess", c.shares.preprocess},
                     {"row_count", c.shares.row_count},
                     {"selection", c.shares.selection},
                     {"measurement", c.shares.measurement}};
    doc["bin_method"] = bin_method_name(c.bin_method);
    doc["bins"] = c.bins;
    doc["merge_theta"] = c.merge_theta;
    doc["gate"] = c.gate;
    doc["selection"] = strategy_name(c.strategy);
    doc["adaptive"] = {{"rounds", c.adaptive.rounds},
                       {"init_share", c.adaptive.init_share},
                       {"em_share", c.adaptive.em_share},
                       {"include_3way", c.adaptive.include_3way}};
    doc["synthesizer"] = synth_method_name(c.synthesizer);
    doc["gum"] = {{"max_iterations", c.gum.max_iterations},
                  {"alpha_step", c.gum.alpha_step},
                  {"tolerance", c.gum.tolerance}};
    doc["ga"] = {{"generations", c.ga.generations},
                 {"mutations", c.ga.mutations},
                 {"crossovers", c.ga.crossovers},
                 {"elite", c.ga.elite}};
    doc["synthetic_n"] = c.synthetic_n;
    doc["workload_per_clique"] = c.workload_per_clique;
    doc["seed"] = c.seed;
    return doc;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    if (!out) throw DataError("failed while writing '" + path.string() + "'");
}

}  // namespace

void BudgetShares::validate() const {
    if (!(preprocess > 0.0) || !(row_count > 0.0) || !(selection > 0.0) ||
        !(measurement > 0.0))
        throw ConfigError("config: budget shares must all be positive");
    const double sum = preprocess + row_count + selection + measurement;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("config: budget shares must sum to 1");
}

void PipelineConfig::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("config: epsilon must be positive");
    if (!(delta > 0.0) || !(delta < 1.0))
        throw ConfigError("config: delta must lie in (0, 1)");
    shares.validate();
    if (bins < 1) throw ConfigError("config: bins must be >= 1");
    if (!(merge_theta >= 0.0) || merge_theta >= 1.0)
        throw ConfigError("config: merge_theta must lie in [0, 1)");
    if (gate < 1) throw ConfigError("config: gate must be >= 1");
    adaptive.validate();
    gum.validate();
    ga.validate();
    if (workload_per_clique < 1)
        throw ConfigError("config: workload_per_clique must be >= 1");
}

std::string bin_method_name(BinMethod m) {
    return m == BinMethod::Uniform ? "uniform" : "privtree";
}

BinMethod parse_bin_method(const std::string& name) {
    if (name == "uniform") return BinMethod::Uniform;
    if (name == "privtree") return BinMethod::PrivTree;
    throw ConfigError("config: unknown bin method '" + name + "'");
}

std::string strategy_name(SelectionStrategy s) {
    return s == SelectionStrategy::Adaptive ? "adaptive" : "privsyn";
}

SelectionStrategy parse_strategy(const std::string& name) {
    if (name == "privsyn") return SelectionStrategy::NonAdaptive;
    if (name == "adaptive") return SelectionStrategy::Adaptive;
    throw ConfigError("config: unknown selection strategy '" + name + "'");
}

std::string synth_method_name(SynthMethod m) {
    switch (m) {
        case SynthMethod::Gum: return "gum";
        case SynthMethod::Junction: return "junction";
        case SynthMethod::Ga: return "ga";
    }
    throw ConfigError("config: invalid synthesizer value");
}

SynthMethod parse_synth_method(const std::string& name) {
    if (name == "gum") return SynthMethod::Gum;
    if (name == "junction") return SynthMethod::Junction;
    if (name == "ga") return SynthMethod::Ga;
    throw ConfigError("config: unknown synthesizer '" + name + "'");
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: document must be an object");

    PipelineConfig c;
    try {
        reject_unknown_keys(
            doc,
            {"data_csv", "domain_json", "output_dir", "epsilon", "delta", "shares",
             "bin_method", "bins", "merge_theta", "gate", "selection", "adaptive",
             "synthesizer", "gum", "ga", "synthetic_n", "workload_per_clique", "seed"},
            "the top level");
        c.data_csv = doc.value("data_csv", c.data_csv);
        c.domain_json = doc.value("domain_json", c.domain_json);
        c.output_dir = doc.value("output_dir", c.output_dir);
        c.epsilon = doc.value("epsilon", c.epsilon);
        c.delta = doc.value("delta", c.delta);
        if (doc.contains("shares")) {
            const json& s = doc["shares"];
            reject_unknown_keys(s, {"preprocess", "row_count", "selection", "measurement"},
                                "shares");
            c.shares.preprocess = s.value("preprocess", c.shares.preprocess);
            c.shares.row_count = s.value("row_count", c.shares.row_count);
            c.shares.selection = s.value("selection", c.shares.selection);
            c.shares.measurement = s.value("measurement", c.shares.measurement);
        }
        if (doc.contains("bin_method"))
            c.bin_method = parse_bin_method(doc["bin_method"].get<std::string>());
        c.bins = doc.value("bins", c.bins);
        c.merge_theta = doc.value("merge_theta", c.merge_theta);
        c.gate = doc.value("gate", c.gate);
        if (doc.contains("selection"))
            c.strategy = parse_strategy(doc["selection"].get<std::string>());
        if (doc.contains("adaptive")) {
            const json& a = doc["adaptive"];
            reject_unknown_keys(a, {"rounds", "init_share", "em_share", "include_3way"},
                                "adaptive");
            c.adaptive.rounds = a.value("rounds", c.adaptive.rounds);
            c.adaptive.init_share = a.value("init_share", c.adaptive.init_share);
            c.adaptive.em_share = a.value("em_share", c.adaptive.em_share);
            c.adaptive.include_3way = a.value("include_3way", c.adaptive.include_3way);
        }
        if (doc.contains("synthesizer"))
            c.synthesizer = parse_synth_method(doc["synthesizer"].get<std::string>());
        if (doc.contains("gum")) {
            const json& g = doc["gum"];
            reject_unknown_keys(g, {"max_iterations", "alpha_step", "tolerance"}, "gum");
            c.gum.max_iterations = g.value("max_iterations", c.gum.max_iterations);
            c.gum.alpha_step = g.value("alpha_step", c.gum.alpha_step);
            c.gum.tolerance = g.value("tolerance", c.gum.tolerance);
        }
        if (doc.contains("ga")) {
            const json& g = doc["ga"];
            reject_unknown_keys(g, {"generations", "mutations", "crossovers", "elite"},
                                "ga");
            c.ga.generations = g.value("generations", c.ga.generations);
            c.ga.mutations = g.value("mutations", c.ga.mutations);
            c.ga.crossovers = g.value("crossovers", c.ga.crossovers);
            c.ga.elite = g.value("elite", c.ga.elite);
        }
        c.synthetic_n = doc.value("synthetic_n", c.synthetic_n);
        c.workload_per_clique = doc.value("workload_per_clique", c.workload_per_clique);
        c.seed = doc.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return pipeline_config_from_json(text);
}

std::string PipelineReport::metrics_json() const {
    json doc;
    doc["input_rows"] = input_rows;
    doc["n_hat"] = n_hat;
    doc["rows_synthesized"] = rows_synthesized;
    doc["budget"]["rho_total"] = rho_total;
    doc["budget"]["rho_spent"] = rho_spent;
    doc["budget"]["equivalent_epsilon"] = equivalent_epsilon;
    doc["budget"]["ledger"] = json::array();
    for (const BudgetLedger::Spend& s : ledger)
        doc["budget"]["ledger"].push_back({{"label", s.label}, {"rho", s.rho_cost}});

    doc["plan"]["strategy"] = plan_strategy;
    doc["plan"]["rho_overhead"] = plan_rho_overhead;
    doc["plan"]["entries"] = json::array();
    for (const PlanSummary& p : plan)
        doc["plan"]["entries"].push_back({{"clique", p.clique},
                                          {"cells", p.cells},
                                          {"rho", p.rho},
                                          {"sigma", p.sigma}});
    doc["plan"]["rounds"] = json::array();
    for (const RoundRecord& r : rounds)
        doc["plan"]["rounds"].push_back({{"round", r.round},
                                         {"candidates", r.candidate_count},
                                         {"best_score", r.best_score},
                                         {"chosen_score", r.chosen_score},
                                         {"chosen", r.chosen}});

    doc["metrics"]["fidelity_mean_tvd"] = fidelity.mean_tvd;
    doc["metrics"]["fidelity_total_tvd"] = fidelity.total_tvd;
    doc["metrics"]["fidelity_pairs"] = fidelity.pairs;
    doc["metrics"]["query_error"] = query_error;
    doc["metrics"]["processed_sizes"] = json::parse(processed_sizes.to_json());
    return doc.dump(2);
}

std::string PipelineReport::to_json() const {
    json doc = json::parse(metrics_json());
    doc["config"] = config_to_json(config);
    doc["timings"] = json::array();
    for (const StageTime& t : stage_seconds)
        doc["timings"].push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    doc["outputs"] = outputs;
    return doc.dump(2);
}

PipelineResult run_pipeline(const PipelineConfig& config, const Dataset& data) {
    config.validate();
    if (data.n() == 0) throw StageError("load", "dataset has no rows");

    namespace fs = std::filesystem;
    PipelineResult result;
    PipelineReport& report = result.report;
    report.config = config;
    report.input_rows = data.n();

    const bool emit = !config.output_dir.empty();
    std::vector<fs::path> written;
    auto cleanup = [&]() {
        std::error_code ec;
        for (const fs::path& p : written) fs::remove(p, ec);
    };

    std::string current_stage = "budget";
    auto timed = [&](const char* stage, auto&& body) {
        current_stage = stage;
        const auto t0 = std::chrono::steady_clock::now();
        body();
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        report.stage_seconds.push_back({stage, dt.count()});
    };

    Dataset processed;
    try {
        timed("budget", [&] {
            report.rho_total = epsilon_to_rho(config.epsilon, config.delta);
        });
        BudgetLedger ledger(report.rho_total);
        Rng root(config.seed);

        timed("preprocess", [&] {
            const double rho_count = config.shares.row_count * report.rho_total;
            ledger.spend(rho_count, "record count");
            Rng count_rng = root.substream("record count");
            report.n_hat = static_cast<double>(data.n()) +
                           count_rng.normal(sigma_for_rho(rho_count, 1.0).sigma);

            PreprocessConfig pc;
            pc.method = config.bin_method;
            pc.bins = config.bins;
            pc.merge_theta = config.merge_theta;
            pc.privtree_theta = std::max(report.n_hat, 1.0) / 1000.0;
            pc.gate = config.gate;
            pc.rho_preprocess = config.shares.preprocess * report.rho_total;
            Rng pre_rng = root.substream("preprocess");
            PreprocessResult pre = apply_preprocess(data, pc, ledger, pre_rng);
            result.artifacts = std::move(pre.artifacts);
            processed = std::move(pre.data);
        });

        const std::size_t synth_n =
            config.synthetic_n > 0
                ? config.synthetic_n
                : static_cast<std::size_t>(std::llround(std::max(1.0, report.n_hat)));

        timed("selection", [&] {
            Rng sel_rng = root.substream("selection");
            const double rho_sel = config.shares.selection * report.rho_total;
            const double rho_meas = config.shares.measurement * report.rho_total;
            if (config.strategy == SelectionStrategy::NonAdaptive) {
                result.plan = privsyn_select(processed, rho_sel, rho_meas, ledger, sel_rng);
            } else {
                result.plan = adaptive_select(processed, rho_sel + rho_meas,
                                              config.adaptive,
                                              make_junction_hook(processed.domain(), synth_n),
                                              ledger, sel_rng);
            }
        });

        timed("synthesis", [&] {
            Rng syn_rng = root.substream("synthesis");
            SelectionPlan consistent =
                make_plan_consistent(result.plan, static_cast<double>(synth_n),
                                     processed.domain());
            switch (config.synthesizer) {
                case SynthMethod::Gum:
                    result.synthetic = gum_synthesize(consistent, processed.domain(),
                                                      synth_n, config.gum, syn_rng);
                    break;
                case SynthMethod::Junction:
                    result.synthetic = junction_sample(consistent, processed.domain(),
                                                       synth_n, syn_rng);
                    break;
                case SynthMethod::Ga:
                    result.synthetic = gsd_synthesize(consistent, processed.domain(),
                                                      synth_n, config.ga, syn_rng);
                    break;
            }
        });
        report.rows_synthesized = result.synthetic.n();

        timed("decode", [&] {
            result.decoded = decode_dataset(result.synthetic, result.artifacts);
            if (emit) {
                std::error_code ec;
                fs::create_directories(config.output_dir, ec);
                if (ec)
                    throw DataError("cannot create output directory '" +
                                    config.output_dir + "': " + ec.message());
                const fs::path dir(config.output_dir);
                write_csv(result.decoded, (dir / "synthetic.csv").string());
                written.push_back(dir / "synthetic.csv");
                write_text_file(dir / "artifacts.json", result.artifacts.to_json());
                written.push_back(dir / "artifacts.json");
            }
        });

        timed("evaluate", [&] {
            report.fidelity = fidelity_report(result.synthetic, processed);
            if (data.d() >= 3) {
                QueryWorkload workload = make_workload(
                    data.domain(), config.workload_per_clique, 2000, config.seed);
                report.query_error =
                    query_error(result.synthetic, processed, workload, result.artifacts);
            }
            report.processed_sizes = marginal_size_report(processed.domain());
        });

        current_stage = "accounting";
        report.rho_spent = ledger.rho_spent();
        report.ledger = ledger.spends();
        report.equivalent_epsilon = rho_to_epsilon(report.rho_spent, config.delta);
        if (report.rho_spent > report.rho_total * (1.0 + 1e-12))
            throw BudgetError("ledger total exceeds the rho budget");
        if (report.equivalent_epsilon > config.epsilon * (1.0 + 1e-9))
            throw BudgetError("equivalent epsilon exceeds the configured epsilon");

        report.plan_strategy = strategy_name(result.plan.strategy);
        report.plan_rho_overhead = result.plan.rho_overhead;
        report.rounds = result.plan.rounds;
        for (const PlanEntry& e : result.plan.entries)
            report.plan.push_back({e.clique.to_string(), e.clique.cell_count, e.rho,
                                   e.marginal.sigma});

        if (emit) {
            current_stage = "report";
            const fs::path dir(config.output_dir);
            report.outputs = {(dir / "synthetic.csv").string(),
                              (dir / "artifacts.json").string(),
                              (dir / "report.json").string()};
            write_text_file(dir / "report.json", report.to_json());
        }
    } catch (const StageError&) {
        cleanup();
        throw;
    } catch (const std::exception& e) {
        cleanup();
        throw StageError(current_stage, e.what());
    }
    return result;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    config.validate();
    Dataset data;
    try {
        if (config.data_csv.empty() || config.domain_json.empty())
            throw ConfigError("dataset CSV and domain spec paths are required");
        Domain domain = load_domain_file(config.domain_json);
        data = load_dataset_file(config.data_csv, domain);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("load", e.what());
    }
    return run_pipeline(config, data);
}

TheoryBatteryReport verify_theory(const TheoryBatteryOptions& options, const KlFn& kl) {
    return run_theory_battery(options, kl);
}

}  // namespace dpsynth
