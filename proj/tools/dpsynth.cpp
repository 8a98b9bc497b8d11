#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dpsynth/datagen.hpp"
#include "dpsynth/pipeline.hpp"

using namespace dpsynth;

namespace {

// Raised after a battery report shows violations; mapped to exit code 3.
struct TheoryViolationExit : std::exception {
    const char* what() const noexcept override { return "theory battery reported violations"; }
};

void write_or_print(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text << '\n';
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << text << '\n';
    if (!out) throw DataError("failed while writing '" + out_path + "'");
}

PreprocessArtifacts load_artifacts(const std::string& path, const Domain& original) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open artifacts file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return PreprocessArtifacts::from_json(text, original);
}

void add_run_command(CLI::App& app) {
    auto* cmd = app.add_subcommand("run", "Run the full synthesis pipeline");

    auto state = std::make_shared<PipelineConfig>();
    auto config_path = std::make_shared<std::string>();

    cmd->add_option("--config", *config_path, "JSON config file; flags override it");
    auto* data = cmd->add_option("--data", state->data_csv, "Input CSV");
    auto* domain = cmd->add_option("--domain", state->domain_json, "Domain spec JSON");
    auto* out = cmd->add_option("--out", state->output_dir, "Output directory");
    auto* eps = cmd->add_option("--epsilon", state->epsilon, "Privacy budget epsilon");
    auto* delta = cmd->add_option("--delta", state->delta, "Privacy parameter delta");
    auto* sp = cmd->add_option("--share-preprocess", state->shares.preprocess,
                               "Budget share for preprocessing");
    auto* sc = cmd->add_option("--share-row-count", state->shares.row_count,
                               "Budget share for the noisy record count");
    auto* ss = cmd->add_option("--share-selection", state->shares.selection,
                               "Budget share for marginal selection");
    auto* sm = cmd->add_option("--share-measurement", state->shares.measurement,
                               "Budget share for marginal measurement");
    auto bin_method = std::make_shared<std::string>("privtree");
    auto* bm = cmd->add_option("--bin-method", *bin_method, "uniform or privtree");
    auto* bins = cmd->add_option("--bins", state->bins, "Uniform bin count");
    auto* mt = cmd->add_option("--merge-theta", state->merge_theta,
                               "Rare-category threshold fraction");
    auto* gate = cmd->add_option("--gate", state->gate,
                                 "Transform only attributes larger than this");
    auto strategy = std::make_shared<std::string>("privsyn");
    auto* sel = cmd->add_option("--selection", *strategy, "privsyn or adaptive");
    auto* rounds = cmd->add_option("--rounds", state->adaptive.rounds,
                                   "Adaptive selection rounds");
    auto* init_share = cmd->add_option("--init-share", state->adaptive.init_share,
                                       "Adaptive share spent on 1-ways up front");
    auto* em_share = cmd->add_option("--em-share", state->adaptive.em_share,
                                     "Adaptive per-round choice share");
    auto* three = cmd->add_flag("--include-3way", state->adaptive.include_3way,
                                "Let adaptive selection consider 3-way cliques");
    auto synth = std::make_shared<std::string>("gum");
    auto* sy = cmd->add_option("--synthesizer", *synth, "gum, junction, or ga");
    auto* gi = cmd->add_option("--gum-iterations", state->gum.max_iterations,
                               "Update passes");
    auto* ga_gen = cmd->add_option("--ga-generations", state->ga.generations,
                                   "Genetic search generations");
    auto* sn = cmd->add_option("--synthetic-n", state->synthetic_n,
                               "Synthetic rows (0 = noisy input size)");
    auto* wpc = cmd->add_option("--workload-per-clique", state->workload_per_clique,
                                "Evaluation queries per 3-way clique");
    auto* seed = cmd->add_option("--seed", state->seed, "Root seed");

    cmd->callback([=] {
        PipelineConfig c;
        if (!config_path->empty()) c = load_pipeline_config(*config_path);
        if (*data) c.data_csv = state->data_csv;
        if (*domain) c.domain_json = state->domain_json;
        if (*out) c.output_dir = state->output_dir;
        if (*eps) c.epsilon = state->epsilon;
        if (*delta) c.delta = state->delta;
        if (*sp) c.shares.preprocess = state->shares.preprocess;
        if (*sc) c.shares.row_count = state->shares.row_count;
        if (*ss) c.shares.selection = state->shares.selection;
        if (*sm) c.shares.measurement = state->shares.measurement;
        if (*bm) c.bin_method = parse_bin_method(*bin_method);
        if (*bins) c.bins = state->bins;
        if (*mt) c.merge_theta = state->merge_theta;
        if (*gate) c.gate = state->gate;
        if (*sel) c.strategy = parse_strategy(*strategy);
        if (*rounds) c.adaptive.rounds = state->adaptive.rounds;
        if (*init_share) c.adaptive.init_share = state->adaptive.init_share;
        if (*em_share) c.adaptive.em_share = state->adaptive.em_share;
        if (*three) c.adaptive.include_3way = state->adaptive.include_3way;
        if (*sy) c.synthesizer = parse_synth_method(*synth);
        if (*gi) c.gum.max_iterations = state->gum.max_iterations;
        if (*ga_gen) c.ga.generations = state->ga.generations;
        if (*sn) c.synthetic_n = state->synthetic_n;
        if (*wpc) c.workload_per_clique = state->workload_per_clique;
        if (*seed) c.seed = state->seed;

        PipelineResult r = run_pipeline(c);
        const PipelineReport& rep = r.report;
        std::printf("rho budget %.6g, spent %.6g, equivalent epsilon %.4f\n",
                    rep.rho_total, rep.rho_spent, rep.equivalent_epsilon);
        std::printf("synthesized %zu rows from %zu\n", rep.rows_synthesized,
                    rep.input_rows);
        std::printf("fidelity mean TVD %.4f over %zu pairs, query error %.4f\n",
                    rep.fidelity.mean_tvd, rep.fidelity.pairs, rep.query_error);
        for (const std::string& f : rep.outputs) std::printf("wrote %s\n", f.c_str());
    });
}

void add_preprocess_command(CLI::App& app) {
    auto* cmd = app.add_subcommand("preprocess",
                                   "Fit and apply domain compression only");
    struct Args {
        std::string data, domain, out;
        double epsilon = 1.0, delta = 1e-5;
        std::string bin_method = "privtree";
        std::int64_t bins = 100;
        double merge_theta = 0.002;
        double privtree_theta = 0.0;
        std::int64_t gate = 100;
        std::uint64_t seed = 0;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--data", a->data, "Input CSV")->required();
    cmd->add_option("--domain", a->domain, "Domain spec JSON")->required();
    cmd->add_option("--out", a->out, "Output directory")->required();
    cmd->add_option("--epsilon", a->epsilon, "Privacy budget for the fits");
    cmd->add_option("--delta", a->delta, "Privacy parameter delta");
    cmd->add_option("--bin-method", a->bin_method, "uniform or privtree");
    cmd->add_option("--bins", a->bins, "Uniform bin count");
    cmd->add_option("--merge-theta", a->merge_theta, "Rare-category threshold fraction");
    cmd->add_option("--privtree-theta", a->privtree_theta,
                    "Tree split threshold (0 = derive from a noisy count)");
    cmd->add_option("--gate", a->gate, "Transform only attributes larger than this");
    cmd->add_option("--seed", a->seed, "Root seed");

    cmd->callback([a] {
        Domain domain = load_domain_file(a->domain);
        Dataset data = load_dataset_file(a->data, domain);

        const double rho = epsilon_to_rho(a->epsilon, a->delta);
        BudgetLedger ledger(rho);
        PreprocessConfig pc;
        pc.method = parse_bin_method(a->bin_method);
        pc.bins = a->bins;
        pc.merge_theta = a->merge_theta;
        pc.privtree_theta = a->privtree_theta;
        pc.gate = a->gate;
        pc.rho_preprocess = rho;
        Rng rng = Rng(a->seed).substream("preprocess");
        PreprocessResult result = apply_preprocess(data, pc, ledger, rng);

        std::error_code ec;
        std::filesystem::create_directories(a->out, ec);
        if (ec) throw DataError("cannot create output directory '" + a->out + "'");
        const std::filesystem::path dir(a->out);
        write_or_print((dir / "artifacts.json").string(), result.artifacts.to_json());
        write_csv(decode_dataset(result.data, result.artifacts),
                  (dir / "processed.csv").string());

        for (std::size_t j = 0; j < domain.attr_count(); ++j)
            std::printf("%s: %lld -> %lld\n", domain.attr(j).name.c_str(),
                        static_cast<long long>(domain.size(j)),
                        static_cast<long long>(result.artifacts.transforms[j].new_size));
        std::printf("rho spent %.6g of %.6g\n", ledger.rho_spent(), rho);
    });
}

void add_evaluate_command(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate",
                                   "Score a synthetic dataset against a holdout");
    struct Args {
        std::string synthetic, holdout, domain, artifacts, out;
        int per_clique = 5;
        std::uint64_t seed = 0;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--synthetic", a->synthetic, "Synthetic CSV")->required();
    cmd->add_option("--holdout", a->holdout, "Holdout CSV in original space")->required();
    cmd->add_option("--domain", a->domain, "Domain spec JSON")->required();
    cmd->add_option("--artifacts", a->artifacts,
                    "Artifacts JSON; when given, the synthetic CSV is read in "
                    "its decoded value space");
    cmd->add_option("--per-clique", a->per_clique, "Queries per 3-way clique");
    cmd->add_option("--seed", a->seed, "Workload seed");
    cmd->add_option("--out", a->out, "Report path (default: stdout)");

    cmd->callback([a] {
        Domain domain = load_domain_file(a->domain);
        PreprocessArtifacts artifacts = a->artifacts.empty()
                                            ? identity_artifacts(domain)
                                            : load_artifacts(a->artifacts, domain);
        Dataset synthetic = encode_decoded(
            load_dataset_file(a->synthetic, decode_domain(artifacts)), artifacts);
        Dataset holdout = encode_with_artifacts(
            load_dataset_file(a->holdout, domain), artifacts);

        FidelityReport fidelity = fidelity_report(synthetic, holdout);
        double qerr = 0.0;
        if (domain.attr_count() >= 3) {
            QueryWorkload workload =
                make_workload(domain, a->per_clique, 2000, a->seed);
            qerr = query_error(synthetic, holdout, workload, artifacts);
        }

        std::string text = "{\n  \"fidelity_mean_tvd\": " +
                           std::to_string(fidelity.mean_tvd) +
                           ",\n  \"fidelity_total_tvd\": " +
                           std::to_string(fidelity.total_tvd) +
                           ",\n  \"fidelity_pairs\": " + std::to_string(fidelity.pairs) +
                           ",\n  \"query_error\": " + std::to_string(qerr) + "\n}";
        write_or_print(a->out, text);
    });
}

void add_verify_theory_command(CLI::App& app) {
    auto* cmd = app.add_subcommand("verify-theory",
                                   "Run the divergence-bound batteries");
    auto options = std::make_shared<TheoryBatteryOptions>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--lemma-instances", options->lemma_instances,
                    "Mixture-bound instances");
    cmd->add_option("--theorem-instances", options->theorem_instances,
                    "Chain-bound instances");
    cmd->add_option("--seed", options->seed, "Battery seed");
    cmd->add_option("--out", *out, "Report path (default: stdout)");

    cmd->callback([options, out] {
        TheoryBatteryReport report = verify_theory(*options);
        write_or_print(*out, report.to_json());
        if (!report.ok()) throw TheoryViolationExit{};
    });
}

void add_export_ml_command(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "export-ml", "Package synthetic train and holdout test splits");
    struct Args {
        std::string synthetic, holdout, domain, artifacts, dest, label;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--synthetic", a->synthetic, "Synthetic CSV")->required();
    cmd->add_option("--holdout", a->holdout, "Holdout CSV in original space")->required();
    cmd->add_option("--domain", a->domain, "Domain spec JSON")->required();
    cmd->add_option("--artifacts", a->artifacts,
                    "Artifacts JSON matching the synthetic CSV");
    cmd->add_option("--dest", a->dest, "Destination directory")->required();
    cmd->add_option("--label", a->label, "Label column name")->required();

    cmd->callback([a] {
        Domain domain = load_domain_file(a->domain);
        PreprocessArtifacts artifacts = a->artifacts.empty()
                                            ? identity_artifacts(domain)
                                            : load_artifacts(a->artifacts, domain);
        Dataset synthetic = encode_decoded(
            load_dataset_file(a->synthetic, decode_domain(artifacts)), artifacts);
        Dataset holdout = encode_with_artifacts(
            load_dataset_file(a->holdout, domain), artifacts);
        export_for_ml(synthetic, holdout, artifacts, a->dest, a->label);
        std::printf("wrote %s/synthetic_train.csv, test.csv, domain.json, manifest.json\n",
                    a->dest.c_str());
    });
}

void add_gen_data_command(CLI::App& app) {
    auto* cmd = app.add_subcommand("gen-data", "Write a bundled synthetic dataset");
    struct Args {
        std::string name = "chain";
        std::string out = ".";
        std::size_t rows = 20000;
        std::uint64_t seed = 0;
    };
    auto a = std::make_shared<Args>();
    cmd->add_option("--name", a->name, "chain, heavy-tail, or latent")->required();
    cmd->add_option("--out", a->out, "Output directory");
    cmd->add_option("--rows", a->rows, "Row count");
    cmd->add_option("--seed", a->seed, "Seed");

    cmd->callback([a] {
        Dataset data;
        if (a->name == "chain")
            data = make_chain_dataset(a->rows, a->seed);
        else if (a->name == "heavy-tail")
            data = make_heavy_tail_dataset(a->rows, a->seed);
        else if (a->name == "latent")
            data = make_latent_class_dataset(a->rows, a->seed);
        else
            throw ConfigError("unknown dataset '" + a->name + "'");
        write_dataset_bundle(data, a->out, a->name);
        std::printf("wrote %s/%s.csv and %s/%s.domain.json\n", a->out.c_str(),
                    a->name.c_str(), a->out.c_str(), a->name.c_str());
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentially private synthesis of tabular data"};
    app.require_subcommand(1);

    add_run_command(app);
    add_preprocess_command(app);
    add_evaluate_command(app);
    add_verify_theory_command(app);
    add_export_ml_command(app);
    add_gen_data_command(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const TheoryViolationExit&) {
        return 3;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
