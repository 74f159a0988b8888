// pnr: command-line front end for the trace analysis pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pnr/pca.hpp"
#include "pnr/pipeline.hpp"
#include "pnr/pnr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_data = 3;
constexpr int exit_numerical = 4;

/// JSON flag defaults: top-level keys are global flags, nested objects are
/// subcommand sections, e.g. {"seed": 3, "synth": {"count": 1000}}.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override
    {
        json j;
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_configurable() && !opt->get_lnames().empty()) {
                const std::string name = opt->get_lnames().front();
                if (opt->count() > 0) {
                    j[name] = opt->as<std::string>();
                } else if (default_also && !opt->get_default_str().empty()) {
                    j[name] = opt->get_default_str();
                }
            }
        }
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override
    {
        json j;
        try {
            j = json::parse(input);
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) {
            throw CLI::ConversionError("config must be a JSON object");
        }
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

private:
    static std::string scalar(const json& v)
    {
        if (v.is_string()) {
            return v.get<std::string>();
        }
        if (v.is_boolean()) {
            return v.get<bool>() ? "true" : "false";
        }
        return v.dump();
    }

    static void flatten(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out)
    {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto path = parents;
                path.push_back(key);
                flatten(value, path, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
                for (const auto& v : value) {
                    item.inputs.push_back(scalar(v));
                }
            } else {
                item.inputs.push_back(scalar(value));
            }
            out.push_back(std::move(item));
        }
    }
};

struct Globals {
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

pnr::TraceSet load(const std::string& path) { return pnr::read_trace_bundle(path); }

void say(const std::string& line) { std::cout << line << '\n'; }

void print_warnings(const std::vector<std::string>& warnings)
{
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << '\n';
    }
}

// synth

struct SynthArgs {
    std::string params;
    std::string out;
    std::size_t count = 0;
    std::optional<double> mu, per_photon_shift, jitter_sigma, jitter_tau, noise_sigma, sample_rate;
    std::optional<std::size_t> trace_len, pre_trigger;
    bool keep_zeros = false;
    bool csv = false;
};

void add_synth(CLI::App& app, SynthArgs& a, const Globals& g)
{
    auto* cmd = app.add_subcommand("synth", "Generate labeled synthetic SNSPD/sync trace pairs");
    cmd->add_option("--params", a.params, "SynthConfig JSON document")->check(CLI::ExistingFile);
    cmd->add_option("--count", a.count, "Number of pairs")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--out", a.out, "Output prefix (<prefix>.snspd.pnrb, .sync.pnrb, .labels.csv)")->required();
    cmd->add_option("--mu", a.mu, "Mean photon number");
    cmd->add_option("--per-photon-shift", a.per_photon_shift, "Arrival shift per extra photon [s]");
    cmd->add_option("--jitter-sigma", a.jitter_sigma, "EMG jitter sigma [s]");
    cmd->add_option("--jitter-tau", a.jitter_tau, "EMG jitter tau [s]");
    cmd->add_option("--noise-sigma", a.noise_sigma, "Additive noise sigma [V]");
    cmd->add_option("--sample-rate", a.sample_rate, "Sample rate [Hz]");
    cmd->add_option("--trace-len", a.trace_len, "Samples per trace");
    cmd->add_option("--pre-trigger", a.pre_trigger, "Samples before the trigger");
    cmd->add_flag("--keep-zeros", a.keep_zeros, "Keep n = 0 (no detection) traces");
    cmd->add_flag("--csv", a.csv, "Also export both channels as CSV");
    cmd->callback([&a, &g, &app] {
        pnr::SynthConfig cfg;
        if (!a.params.empty()) {
            pnr::from_json(pnr::read_json(a.params), cfg);
        }
        if (app.count("--seed") || a.params.empty()) {
            cfg.seed = g.seed;
        }
        if (a.mu) cfg.mu = *a.mu;
        if (a.per_photon_shift) cfg.per_photon_shift = *a.per_photon_shift;
        if (a.jitter_sigma) cfg.jitter_emg.sigma = *a.jitter_sigma;
        if (a.jitter_tau) cfg.jitter_emg.tau = *a.jitter_tau;
        if (a.noise_sigma) cfg.noise_sigma = *a.noise_sigma;
        if (a.sample_rate) cfg.sample_rate = *a.sample_rate;
        if (a.trace_len) cfg.trace_len = *a.trace_len;
        if (a.pre_trigger) cfg.pre_trigger = *a.pre_trigger;
        const pnr::LabeledSet set = pnr::generate_dataset(cfg, a.count, a.keep_zeros);
        pnr::write_trace_bundle(set.snspd, a.out + ".snspd.pnrb");
        pnr::write_trace_bundle(set.sync, a.out + ".sync.pnrb");
        pnr::write_labels_csv(set.labels, a.out + ".labels.csv");
        pnr::write_json(json(cfg), a.out + ".synth.json");
        if (a.csv) {
            pnr::write_trace_csv(set.snspd, a.out + ".snspd.csv");
            pnr::write_trace_csv(set.sync, a.out + ".sync.csv");
        }
        say("wrote " + std::to_string(a.count) + " pairs to " + a.out + ".*");
    });
}

// import

struct ImportArgs {
    std::string input, out, format = "f32", channel = "snspd";
    std::size_t rows = 0, cols = 0;
    double dt = 0.0, t0 = 0.0;
    std::optional<double> mu;
};

void add_import(CLI::App& app, ImportArgs& a)
{
    auto* cmd = app.add_subcommand("import", "Convert a raw CSV/f32/f64 matrix into a trace bundle");
    cmd->add_option("--input", a.input, "Raw file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Output bundle")->required();
    cmd->add_option("--format", a.format, "csv, f32 or f64")->check(CLI::IsMember({"csv", "f32", "f64"}));
    cmd->add_option("--rows", a.rows, "Trace count (0: infer, CSV only)");
    cmd->add_option("--cols", a.cols, "Samples per trace (0: infer, CSV only)");
    cmd->add_option("--dt", a.dt, "Sample period [s] (CSV header overrides)");
    cmd->add_option("--t0", a.t0, "Time of the first sample [s]");
    cmd->add_option("--channel", a.channel, "snspd or sync")->check(CLI::IsMember({"snspd", "sync"}));
    cmd->add_option("--mu", a.mu, "Mean photon number label");
    cmd->callback([&a] {
        pnr::RawImport spec;
        spec.format = pnr::parse_raw_format(a.format);
        spec.rows = a.rows;
        spec.cols = a.cols;
        spec.dt = a.dt;
        spec.t0 = a.t0;
        spec.channel = a.channel == "sync" ? pnr::Channel::sync : pnr::Channel::snspd;
        spec.mu = a.mu;
        const pnr::TraceSet set = pnr::import_raw(a.input, spec);
        pnr::write_trace_bundle(set, a.out);
        say("imported " + std::to_string(set.size()) + " traces x " + std::to_string(set.samples_per_trace()) +
            " samples");
    });
}

// align / filter / decimate

struct AlignArgs {
    std::string sync, target, out, shifts;
    std::size_t window = 7;
};

void add_align(CLI::App& app, AlignArgs& a)
{
    auto* cmd = app.add_subcommand("align", "Remove digitizer trigger jitter using the sync channel");
    cmd->add_option("--sync", a.sync, "Sync bundle")->required()->check(CLI::ExistingFile);
    cmd->add_option("--target", a.target, "SNSPD bundle to shift")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Aligned bundle")->required();
    cmd->add_option("--shifts", a.shifts, "Per-trace shifts CSV (index,shift_s)");
    cmd->add_option("--window", a.window, "Parabola window in samples")->check(CLI::Range(3, 1001));
    cmd->callback([&a] {
        const auto result = pnr::align_dataset(load(a.sync), load(a.target), a.window);
        print_warnings(result.warnings);
        pnr::write_trace_bundle(result.aligned, a.out);
        if (!a.shifts.empty()) {
            pnr::write_column_csv(result.shifts, "shift_s", a.shifts);
        }
        say("aligned " + std::to_string(result.aligned.size()) + " traces");
    });
}

struct FilterArgs {
    std::string input, out;
    double f_lo = 10e6, f_hi = 2e9;
    std::size_t factor = 26;
};

void add_filter(CLI::App& app, FilterArgs& a)
{
    auto* cmd = app.add_subcommand("filter", "First-order band-pass filter");
    cmd->add_option("--input", a.input, "Input bundle")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Output bundle")->required();
    cmd->add_option("--f-lo", a.f_lo, "High-pass cutoff [Hz]");
    cmd->add_option("--f-hi", a.f_hi, "Low-pass cutoff [Hz]");
    cmd->callback([&a] {
        pnr::write_trace_bundle(pnr::bandpass_set(load(a.input), a.f_lo, a.f_hi), a.out);
        say("filtered " + a.input);
    });
}

void add_decimate(CLI::App& app, FilterArgs& a)
{
    auto* cmd = app.add_subcommand("decimate", "Keep every k-th sample");
    cmd->add_option("--input", a.input, "Input bundle")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Output bundle")->required();
    cmd->add_option("--factor", a.factor, "Decimation factor")->check(CLI::PositiveNumber);
    cmd->callback([&a] {
        const pnr::TraceSet set = pnr::decimate_set(load(a.input), a.factor);
        pnr::write_trace_bundle(set, a.out);
        say("decimated to " + std::to_string(set.samples_per_trace()) + " samples per trace");
    });
}

// pca

struct PcaArgs {
    std::string input, out;
    std::size_t components = 10;
};

void add_pca(CLI::App& app, PcaArgs& a)
{
    auto* cmd = app.add_subcommand("pca", "Principal components, scree and scores");
    cmd->add_option("--input", a.input, "Input bundle")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Output prefix (.components.csv, .scree.csv, .scores.csv)")->required();
    cmd->add_option("--components", a.components, "Number of components")->check(CLI::PositiveNumber);
    cmd->callback([&a] {
        const pnr::TraceSet set = load(a.input);
        const pnr::PcaModel model = pnr::fit_pca(set, a.components);
        {
            std::ofstream out(a.out + ".components.csv");
            for (const auto& c : model.components) {
                for (std::size_t j = 0; j < c.size(); ++j) {
                    out << (j ? "," : "") << pnr::detail::format_real(c[j]);
                }
                out << '\n';
            }
        }
        {
            const pnr::Scree s = pnr::scree(model);
            std::ofstream out(a.out + ".scree.csv");
            out << "index,ratio,cumulative\n";
            for (std::size_t i = 0; i < s.ratios.size(); ++i) {
                out << i + 1 << ',' << pnr::detail::format_real(s.ratios[i]) << ','
                    << pnr::detail::format_real(s.cumulative[i]) << '\n';
            }
        }
        {
            std::ofstream out(a.out + ".scores.csv");
            out << "index";
            for (std::size_t c = 0; c < a.components; ++c) {
                out << ",pc" << c + 1;
            }
            out << '\n';
            for (std::size_t i = 0; i < set.size(); ++i) {
                out << i;
                for (double v : pnr::pca_scores(model, set.traces[i], a.components)) {
                    out << ',' << pnr::detail::format_real(v);
                }
                out << '\n';
            }
        }
        say("wrote " + std::to_string(a.components) + " components for " + std::to_string(set.size()) + " traces");
    });
}

// basis / project

struct BasisArgs {
    std::string reference, sync_reference, out, label;
    bool hybrid = false;
};

pnr::AnyBasis make_basis(const std::string& reference, const std::string& sync_reference, bool hybrid,
                         const std::string& label)
{
    if (hybrid) {
        if (sync_reference.empty()) {
            throw CLI::ValidationError("--hybrid needs --sync-reference");
        }
        return pnr::build_hybrid_basis(load(reference), load(sync_reference));
    }
    pnr::ProjectionBasis b = pnr::build_basis(load(reference));
    if (!label.empty()) {
        b.reference_label = label;
    }
    return b;
}

void add_basis(CLI::App& app, BasisArgs& a)
{
    auto* cmd = app.add_subcommand("basis", "Mean-derivative projection basis from a reference set");
    cmd->add_option("--reference", a.reference, "Reference SNSPD bundle (aligned)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--sync-reference", a.sync_reference, "Raw sync bundle for --hybrid")->check(CLI::ExistingFile);
    cmd->add_flag("--hybrid", a.hybrid, "Build the combined SNSPD+sync vector");
    cmd->add_option("--label", a.label, "Reference label stored in the sidecar");
    cmd->add_option("--out", a.out, "Basis sidecar (.pnrp)")->required();
    cmd->callback([&a] {
        pnr::write_basis(make_basis(a.reference, a.sync_reference, a.hybrid, a.label), a.out);
        say("wrote basis " + a.out);
    });
}

struct ProjectArgs {
    std::string input, sync, basis_from, sync_reference, out;
    bool hybrid = false;
};

void add_project(CLI::App& app, ProjectArgs& a)
{
    auto* cmd = app.add_subcommand("project", "Projected arrival time per trace");
    cmd->add_option("--input", a.input, "SNSPD bundle (aligned, or raw with --hybrid)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--basis-from", a.basis_from, "Basis sidecar (.pnrp) or reference bundle")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--sync", a.sync, "Raw sync bundle for --hybrid")->check(CLI::ExistingFile);
    cmd->add_option("--sync-reference", a.sync_reference, "Sync reference when --basis-from is a bundle")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--hybrid", a.hybrid, "Project raw SNSPD+sync pairs with the hybrid vector");
    cmd->add_option("--out", a.out, "Output file; .csv (index,dt_s) or .json")->required();
    cmd->callback([&a] {
        const bool sidecar = fs::path(a.basis_from).extension() == ".pnrp";
        const pnr::AnyBasis basis =
            sidecar ? pnr::read_basis(a.basis_from) : make_basis(a.basis_from, a.sync_reference, a.hybrid, "");
        std::vector<double> times;
        if (const auto* h = std::get_if<pnr::HybridBasis>(&basis)) {
            if (a.sync.empty()) {
                throw CLI::ValidationError("hybrid projection needs --sync");
            }
            times = pnr::hybrid_project_set(*h, load(a.input), load(a.sync));
        } else {
            if (a.hybrid) {
                throw CLI::ValidationError("--hybrid given but the basis is not a hybrid basis");
            }
            times = pnr::project_set(std::get<pnr::ProjectionBasis>(basis), load(a.input));
        }
        if (fs::path(a.out).extension() == ".json") {
            pnr::write_json(json(times), a.out);
        } else {
            pnr::write_column_csv(times, "dt_s", a.out);
        }
        say("projected " + std::to_string(times.size()) + " traces");
    });
}

// fit

struct FitArgs {
    std::string input, g1_from, out;
    std::size_t bins = 0;
    bool single = false;
    std::optional<double> mu;
};

void add_fit(CLI::App& app, FitArgs& a)
{
    auto* cmd = app.add_subcommand("fit", "Single-photon EMG fit or staged photon-number mixture fit");
    cmd->add_option("--input", a.input, "Projected times CSV (index,dt_s)")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--single", a.single, "Fit EMG + background (low-mu reference set)");
    cmd->add_option("--g1-from", a.g1_from, "Single-photon fit JSON to reuse for the mixture")
        ->check(CLI::ExistingFile);
    cmd->add_option("--bins", a.bins, "Histogram bins (0: Freedman-Diaconis)");
    cmd->add_option("--mu", a.mu, "Mean photon number label stored with the fit");
    cmd->add_option("--out", a.out, "Fit JSON")->required();
    cmd->callback([&a] {
        const std::vector<double> times = pnr::read_column_csv(a.input);
        if (a.single == !a.g1_from.empty()) {
            throw CLI::ValidationError("give exactly one of --single or --g1-from");
        }
        if (a.single) {
            const pnr::SinglePhotonFit fit = pnr::fit_single_photon(pnr::histogram_for_fit(times, a.bins));
            pnr::write_json(json(fit), a.out);
            char buf[160];
            std::snprintf(buf, sizeof buf, "EMG m=%.4g s=%.4g tau=%.4g FWHM=%.4g s, reduced chi2 %.3g", fit.g1.m,
                          fit.g1.s, fit.g1.tau, pnr::emg_fwhm(fit.g1), fit.reduced_chi2);
            say(buf);
            return;
        }
        const auto single = pnr::read_json(a.g1_from).get<pnr::SinglePhotonFit>();
        pnr::MixtureFit fit = pnr::fit_mixture(times, single, a.bins);
        if (a.mu) {
            fit.mu_label = *a.mu;
        }
        print_warnings(fit.warnings);
        pnr::write_json(json(fit), a.out);
        char buf[160];
        std::snprintf(buf, sizeof buf, "P1=%.4f P2=%.4f P3+=%.4f", fit.p[0], fit.p[1], fit.p[2]);
        say(buf);
    });
}

// confidence / report

struct ConfidenceArgs {
    std::vector<std::string> fits, names;
    std::string out, csv;
    std::size_t draws = pnr::default_bootstrap_draws;
    std::size_t grid_points = pnr::default_grid_points;
};

void add_confidence(CLI::App& app, ConfidenceArgs& a, const Globals& g)
{
    auto* cmd = app.add_subcommand("confidence", "Bhattacharyya confidence with bootstrap errors");
    cmd->add_option("--fit", a.fits, "Mixture fit JSON (repeatable)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--name", a.names, "System name per fit (default: file stem)");
    cmd->add_option("--draws", a.draws, "Bootstrap draws")->check(CLI::Range(2, 100000000));
    cmd->add_option("--grid-points", a.grid_points, "Integration grid points")->check(CLI::Range(16, 100000000));
    cmd->add_option("--out", a.out, "Report JSON (array when several fits)")->required();
    cmd->add_option("--csv", a.csv, "Comparison CSV");
    cmd->callback([&a, &g] {
        if (!a.names.empty() && a.names.size() != a.fits.size()) {
            throw CLI::ValidationError("--name must be given once per --fit");
        }
        std::vector<pnr::ConfidenceReport> reports;
        for (std::size_t i = 0; i < a.fits.size(); ++i) {
            const auto fit = pnr::read_json(a.fits[i]).get<pnr::MixtureFit>();
            const std::string name = a.names.empty() ? fs::path(a.fits[i]).stem().string() : a.names[i];
            reports.push_back(pnr::confidence_report(fit, name, a.draws, pnr::derive_seed(g.seed, "confidence/" + name),
                                                     a.grid_points));
            print_warnings(reports.back().warnings);
        }
        pnr::write_json(reports.size() == 1 ? json(reports.front()) : json(reports), a.out);
        const auto table = pnr::compare_systems(reports);
        if (!a.csv.empty()) {
            pnr::write_text(pnr::render_csv(table), a.csv);
        }
        std::cout << pnr::render_table(table);
    });
}

struct ReportArgs {
    std::vector<std::string> reports;
    std::string csv;
};

void add_report(CLI::App& app, ReportArgs& a)
{
    auto* cmd = app.add_subcommand("report", "Side-by-side confidence table from report JSON files");
    cmd->add_option("reports", a.reports, "Confidence report JSON files")->required()->check(CLI::ExistingFile);
    cmd->add_option("--csv", a.csv, "Also write the table as CSV");
    cmd->callback([&a] {
        std::vector<pnr::ConfidenceReport> reports;
        for (const auto& path : a.reports) {
            const json j = pnr::read_json(path);
            if (j.is_array()) {
                for (const auto& r : j) {
                    reports.push_back(r.get<pnr::ConfidenceReport>());
                }
            } else {
                reports.push_back(j.get<pnr::ConfidenceReport>());
            }
        }
        const auto table = pnr::compare_systems(reports);
        if (!a.csv.empty()) {
            pnr::write_text(pnr::render_csv(table), a.csv);
        }
        std::cout << pnr::render_table(table);
    });
}

// pipeline

struct PipelineArgs {
    std::string spec, output_dir;
};

void add_pipeline(CLI::App& app, PipelineArgs& a, const Globals& g, int& status)
{
    auto* cmd = app.add_subcommand("pipeline", "Run a staged pipeline from a JSON description");
    cmd->add_option("--spec", a.spec, "Pipeline JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", a.output_dir, "Override the output directory");
    cmd->callback([&a, &g, &app, &status] {
        pnr::PipelineConfig cfg;
        try {
            cfg = pnr::read_json(a.spec).get<pnr::PipelineConfig>();
        } catch (const json::exception& e) {
            throw pnr::Error(pnr::Errc::invalid_argument, std::string("pipeline spec: ") + e.what());
        }
        if (app.count("--seed")) {
            cfg.seed = g.seed;
        }
        if (app.count("--threads")) {
            cfg.threads = g.threads;
        }
        if (!a.output_dir.empty()) {
            cfg.output_dir = a.output_dir;
        }
        const pnr::PipelineResult result = pnr::run_pipeline(cfg);
        print_warnings(result.warnings);
        say(std::to_string(result.artifacts.size()) + " artifacts, manifest " +
            (cfg.output_dir / "manifest.json").string());
        if (!result.ok) {
            std::cerr << "error: stage '" << result.failed_stage << "' failed: " << result.error << '\n';
            status = pnr::is_numerical(*result.error_code) ? exit_numerical : exit_data;
        }
    });
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Photon-number analysis of SNSPD traces by mean-derivative projection"};
    app.require_subcommand(1);
    app.fallthrough();
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON file with flag defaults (command-line flags win)");

    Globals g;
    app.add_option("--seed", g.seed, "Root random seed");
    app.add_option("--threads", g.threads, "Worker threads (0: all cores)");

    SynthArgs synth;
    ImportArgs import;
    AlignArgs align;
    FilterArgs filter, decimate;
    PcaArgs pca;
    BasisArgs basis;
    ProjectArgs project;
    FitArgs fit;
    ConfidenceArgs confidence;
    ReportArgs report;
    PipelineArgs pipeline;
    int status = 0;
    add_synth(app, synth, g);
    add_import(app, import);
    add_align(app, align);
    add_filter(app, filter);
    add_decimate(app, decimate);
    add_pca(app, pca);
    add_basis(app, basis);
    add_project(app, project);
    add_fit(app, fit);
    add_confidence(app, confidence, g);
    add_report(app, report);
    add_pipeline(app, pipeline, g, status);
    app.parse_complete_callback([&g] { pnr::set_threads(g.threads); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    } catch (const pnr::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pnr::is_numerical(e.code()) ? exit_numerical : exit_data;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    }
    return status;
}
