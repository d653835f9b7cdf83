// causalfair command-line tool: discover, debias, evaluate, synth-gen, serve.
//
// Every failure prints one line "error: <category>: <reason>" on stderr.
// Exit codes: 1 usage or internal, 2 input data, 3 rejected edit, 4 stage.

#include "causalfair/json_io.hpp"
#include "causalfair/metrics.hpp"
#include "causalfair/pipeline.hpp"
#include "causalfair/service.hpp"
#include "causalfair/simulate.hpp"
#include "causalfair/synthgen.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace causalfair;

namespace {

struct LoadFlags {
    std::string data;
    std::string schema;
    std::string label;
    std::string favorable;

    void add(CLI::App* cmd) {
        cmd->add_option("--data", data, "Input CSV")->required();
        cmd->add_option("--schema", schema, "Schema JSON (column kinds, label, favorable level)");
        cmd->add_option("--label", label, "Label column (overrides the schema)");
        cmd->add_option("--favorable", favorable, "Favorable label level (overrides the schema)");
    }

    pipeline::LoadOptions options() const {
        pipeline::LoadOptions o;
        if (!schema.empty()) o.schema_path = schema;
        if (!label.empty()) o.label = label;
        if (!favorable.empty()) o.favorable = favorable;
        return o;
    }

    std::shared_ptr<const tabular::Dataset> load() const {
        if (!schema.empty() && !fs::exists(schema)) throw DataError("schema file '" + schema + "' does not exist");
        if (!fs::exists(data)) throw DataError("data file '" + data + "' does not exist");
        auto r = pipeline::load(data, options());
        if (r.dropped_rows > 0)
            std::cerr << "note: dropped " << r.dropped_rows << " rows with missing cells\n";
        return std::make_shared<const tabular::Dataset>(std::move(r.data));
    }
};

struct DiscoveryFlags {
    double p_value = 0.01;
    std::size_t max_cond_size = 0;
    unsigned threads = 1;

    void add(CLI::App* cmd) {
        cmd->add_option("--p-value", p_value, "Significance level of the independence tests")->capture_default_str();
        cmd->add_option("--max-cond-size", max_cond_size, "Largest conditioning set (0 = unbounded)");
        cmd->add_option("--threads", threads, "Worker threads (0 = all cores); output does not depend on it")
            ->capture_default_str();
    }

    discovery::DiscoveryConfig config() const {
        discovery::DiscoveryConfig c;
        c.alpha = p_value;
        if (max_cond_size > 0) c.max_cond_size = max_cond_size;
        c.threads = threads;
        c.validate();
        return c;
    }
};

fs::path out_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

io::Json json_arg(const std::string& text, const char* what) {
    if (!text.empty() && text[0] == '@') return io::read_file(text.substr(1));
    if (fs::exists(text) && fs::is_regular_file(text)) return io::read_file(text);
    if (!text.empty() && (text[0] == '{' || text[0] == '[' || text[0] == '"')) return io::parse(text, what);
    return io::Json(text);  // bare name
}

int run_discover(const LoadFlags& load, const DiscoveryFlags& disc, const std::string& out) {
    auto data = load.load();
    auto d = pipeline::discover(data, disc.config());
    const auto dir = out_dir(out);
    io::write_file((dir / "graph.json").string(), io::graph_summary(*d.model));
    io::write_file((dir / "fit.json").string(), io::fit_summary(*d.model));
    for (const auto& w : d.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "discovered " << d.model->edges().size() << " edges over " << data->cols() << " columns; wrote "
              << (dir / "graph.json").string() << "\n";
    return 0;
}

int run_debias(const LoadFlags& load, const DiscoveryFlags& disc, const std::string& edits, std::uint64_t seed,
               const std::string& out) {
    auto data = load.load();
    graph::EditLog log;
    if (!edits.empty()) log = io::edit_log_from_json(io::read_file(edits));
    auto d = pipeline::discover(data, disc.config());
    pipeline::replay(*d.model, log);

    simulate::SimulationConfig sc;
    sc.seed = seed;
    sc.threads = disc.threads;
    auto res = simulate::generate_debiased(*data, *d.model, sc);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";

    const auto dir = out_dir(out);
    tabular::save_csv(res.data, (dir / "debiased.csv").string());
    io::write_file((dir / "edits.json").string(), io::to_json(d.model->log()));
    io::write_file((dir / "graph.json").string(), io::graph_summary(*d.model));
    std::cout << "simulated " << res.simulated.size() << " columns; wrote " << (dir / "debiased.csv").string() << "\n";
    return 0;
}

int run_evaluate(const LoadFlags& load, const std::string& debiased_path, const std::string& group,
                 const std::string& learner, std::uint64_t seed, std::size_t k, int splits, unsigned threads,
                 const std::string& out) {
    auto original = load.load();
    tabular::Dataset debiased = *original;
    if (!debiased_path.empty()) {
        if (!fs::exists(debiased_path)) throw DataError("debiased file '" + debiased_path + "' does not exist");
        auto r = tabular::load_csv(debiased_path, tabular::hint_of(*original));
        debiased = pipeline::conform(*original, r.data);
    }
    metrics::EvalConfig ec;
    ec.learner = io::learner_from_json(json_arg(learner, "--learner"));
    ec.seed = seed;
    ec.k = k;
    ec.splits = splits;
    ec.threads = threads;
    const auto groups = io::group_from_json(json_arg(group, "--group"));
    const auto outcome = metrics::Outcome::of(*original);
    const auto cmp = metrics::compare(*original, debiased, groups, outcome, ec);

    io::Json report;
    report["label"] = outcome.column;
    report["favorable"] = outcome.favorable;
    report["learner"] = io::to_json(ec.learner);
    report["seed"] = seed;
    report["k"] = k;
    report["splits"] = splits;
    const auto body = io::to_json(cmp);
    for (auto it = body.begin(); it != body.end(); ++it) report[it.key()] = it.value();
    const auto dir = out_dir(out);
    io::write_file((dir / "report.json").string(), report);
    std::cout << "parity_diff " << cmp.original.parity_diff << " -> " << cmp.debiased.parity_diff << "; wrote "
              << (dir / "report.json").string() << "\n";
    return 0;
}

int run_synth(std::size_t n, std::uint64_t seed, double p_male, const std::string& out) {
    synthgen::SynthConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    cfg.p_male = p_male;
    const auto data = synthgen::generate_hiring(cfg);
    const auto dir = out_dir(out);
    tabular::save_csv(data, (dir / "hiring.csv").string());
    io::write_text((dir / "hiring.schema.json").string(), synthgen::hiring_schema_json());
    std::cout << "wrote " << (dir / "hiring.csv").string() << " (" << data.rows() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Human-in-the-loop causal debiasing of tabular data"};
    app.require_subcommand(1);

    LoadFlags load;
    DiscoveryFlags disc;
    std::string out = ".";

    auto* discover = app.add_subcommand("discover", "Discover the causal graph and fit its equations");
    load.add(discover);
    disc.add(discover);
    discover->add_option("--out", out, "Output directory")->capture_default_str();

    auto* debias = app.add_subcommand("debias", "Replay an edit script and write the debiased dataset");
    std::string edits;
    std::uint64_t seed = 0;
    load.add(debias);
    disc.add(debias);
    debias->add_option("--edits", edits, "Edit script JSON; omit for no edits");
    debias->add_option("--seed", seed, "Seed of the simulation noise")->required();
    debias->add_option("--out", out, "Output directory")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Compare fairness and utility of original and debiased data");
    std::string debiased, group, learner = "logistic";
    std::size_t k = 5;
    int splits = 3;
    std::uint64_t eval_seed = 0;
    unsigned eval_threads = 1;
    load.add(evaluate);
    evaluate->add_option("--debiased", debiased, "Debiased CSV (defaults to the original)");
    evaluate->add_option("--group", group, "Sensitive column name, or group JSON / @file")->required();
    evaluate->add_option("--learner", learner, "Learner name or JSON / @file")->capture_default_str();
    evaluate->add_option("--seed", eval_seed, "Seed of the evaluation splits")->capture_default_str();
    evaluate->add_option("--k", k, "Neighbours for individual bias")->capture_default_str();
    evaluate->add_option("--splits", splits, "Repeated 50:50 splits")->capture_default_str();
    evaluate->add_option("--threads", eval_threads, "Worker threads; output does not depend on it")
        ->capture_default_str();
    evaluate->add_option("--out", out, "Output directory")->capture_default_str();

    auto* synth = app.add_subcommand("synth-gen", "Write the synthetic hiring dataset and its schema");
    std::size_t n = 4000;
    std::uint64_t synth_seed = 0;
    double p_male = 0.6;
    synth->add_option("--n", n, "Rows")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth->add_option("--p-male", p_male, "Probability of a male row")->capture_default_str();
    synth->add_option("--out", out, "Output directory")->capture_default_str();

    auto* serve = app.add_subcommand("serve", "Run the session API over HTTP");
    std::string host = "127.0.0.1", snapshot_dir;
    int port = 8080;
    unsigned serve_threads = 1;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--snapshot-dir", snapshot_dir, "Write a JSON snapshot per session after each mutating call");
    serve->add_option("--threads", serve_threads, "Worker threads per request")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: usage: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*discover) return run_discover(load, disc, out);
        if (*debias) return run_debias(load, disc, edits, seed, out);
        if (*evaluate) return run_evaluate(load, debiased, group, learner, eval_seed, k, splits, eval_threads, out);
        if (*synth) return run_synth(n, synth_seed, p_male, out);
        if (*serve) {
            service::ServiceConfig sc;
            if (!snapshot_dir.empty()) sc.snapshot_dir = snapshot_dir;
            sc.threads = serve_threads;
            service::SessionService svc(sc);
            std::cout << "listening on http://" << host << ":" << port << std::endl;
            service::serve(svc, host, port);
            return 0;
        }
    } catch (const pipeline::ReplayError& e) {
        std::cerr << "error: edit: index=" << e.index() << ": " << e.what() << "\n";
        return 3;
    } catch (const EditError& e) {
        std::cerr << "error: edit: " << e.what() << "\n";
        return 3;
    } catch (const StageError& e) {
        std::cerr << "error: stage: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
