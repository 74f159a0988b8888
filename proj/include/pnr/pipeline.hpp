#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "pnr/bundle_io.hpp"
#include "pnr/confidence.hpp"
#include "pnr/error.hpp"
#include "pnr/fitting.hpp"
#include "pnr/parallel.hpp"
#include "pnr/preprocess.hpp"
#include "pnr/projection.hpp"
#include "pnr/rng.hpp"
#include "pnr/synth.hpp"

namespace pnr {

namespace fs = std::filesystem;

// Small CSV artifacts shared by the CLI and the pipeline.

inline void write_labels_csv(const std::vector<Label>& labels, const fs::path& path)
{
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::io_failure, "cannot open " + path.string());
    out << "index,n,true_shift_s\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << i << ',' << labels[i].n << ',' << detail::format_real(labels[i].true_shift) << '\n';
    }
}

/// Two-column CSV `index,<name>`, full double precision.
inline void write_column_csv(const std::vector<double>& values, const std::string& name, const fs::path& path)
{
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::io_failure, "cannot open " + path.string());
    out << "index," << name << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) {
        out << i << ',' << detail::format_real(values[i]) << '\n';
    }
}

/// Reads the last column of an `index,value` CSV with a header row.
inline std::vector<double> read_column_csv(const fs::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::io_failure, "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), Errc::malformed_header, path.string() + " is empty");
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto comma = line.rfind(',');
        require(comma != std::string::npos, Errc::malformed_header, "expected index,value rows in " + path.string());
        values.push_back(detail::parse_real(line.substr(comma + 1)));
    }
    return values;
}

inline nlohmann::json read_json(const fs::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::io_failure, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::malformed_header, path.string() + ": " + e.what());
    }
}

inline void write_json(const nlohmann::json& j, const fs::path& path)
{
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::io_failure, "cannot open " + path.string());
    out << j.dump(2) << '\n';
}

inline void write_text(const std::string& text, const fs::path& path)
{
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::io_failure, "cannot open " + path.string());
    out << text;
}

inline std::string sha256_file(const fs::path& path)
{
    const auto bytes = detail::read_file(path);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    require(EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) == 1,
            Errc::io_failure, "SHA-256 failed for " + path.string());
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline RawFormat parse_raw_format(const std::string& s)
{
    if (s == "csv") {
        return RawFormat::csv;
    }
    if (s == "f32") {
        return RawFormat::f32;
    }
    if (s == "f64") {
        return RawFormat::f64;
    }
    fail(Errc::invalid_argument, "unknown raw format '" + s + "' (csv, f32, f64)");
}

// Pipeline configuration.

inline const std::array<std::string, 9>& stage_order()
{
    static const std::array<std::string, 9> order{"synth", "import",  "align", "filter",    "decimate",
                                                  "basis", "project", "fit",   "confidence"};
    return order;
}

/// One input: generated from a SynthConfig or imported from files.
struct DatasetConfig {
    std::string name;
    std::optional<SynthConfig> synth;
    std::size_t count = 0;
    nlohmann::json import; ///< {"snspd": source, "sync": source}; source = bundle path or raw spec
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    unsigned threads = 0;
    fs::path output_dir = "pnr-out";
    std::vector<std::string> stages{"synth", "align", "basis", "project", "fit", "confidence"};
    std::vector<DatasetConfig> datasets;
    std::string reference;
    std::size_t align_window = 7;
    double f_lo = 10e6;
    double f_hi = 2e9;
    std::size_t decimate_factor = 26;
    bool hybrid = false;
    std::size_t fit_bins = 0;
    std::size_t bootstrap_draws = default_bootstrap_draws;
    std::size_t grid_points = default_grid_points;
};

/// Throws invalid_argument unless stages follow
/// synth|import -> align -> [filter -> decimate] -> basis -> project -> fit -> confidence
/// with optional steps left out.
inline void validate_stages(const std::vector<std::string>& stages)
{
    require(!stages.empty(), Errc::invalid_argument, "pipeline has no stages");
    require(stages.front() == "synth" || stages.front() == "import", Errc::invalid_argument,
            "pipeline must start with synth or import");
    std::ptrdiff_t last = -1;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& order = stage_order();
        const auto it = std::find(order.begin(), order.end(), stages[i]);
        require(it != order.end(), Errc::invalid_argument, "unknown stage '" + stages[i] + "'");
        auto rank = std::distance(order.begin(), it);
        if (rank == 1) {
            rank = 0; // synth and import share a slot
        }
        require(rank > last, Errc::invalid_argument, "stage '" + stages[i] + "' is out of order or repeated");
        last = rank;
    }
}

inline void validate(const PipelineConfig& cfg)
{
    validate_stages(cfg.stages);
    require(!cfg.datasets.empty(), Errc::invalid_argument, "pipeline has no datasets");
    const bool synth = cfg.stages.front() == "synth";
    for (const auto& d : cfg.datasets) {
        require(!d.name.empty(), Errc::invalid_argument, "dataset needs a name");
        require(d.name.find_first_of("/\\") == std::string::npos, Errc::invalid_argument,
                "dataset name must not contain path separators");
        if (synth) {
            require(d.synth.has_value() && d.count > 0, Errc::invalid_argument,
                    "dataset '" + d.name + "' needs synth settings and a count");
        } else {
            require(d.import.is_object() && d.import.contains("snspd"), Errc::invalid_argument,
                    "dataset '" + d.name + "' needs an import.snspd source");
        }
    }
    const auto has = [&](const std::string& s) {
        return std::find(cfg.stages.begin(), cfg.stages.end(), s) != cfg.stages.end();
    };
    const bool any_downstream = has("basis") || has("project") || has("fit") || has("confidence");
    if (any_downstream) {
        const bool found = std::any_of(cfg.datasets.begin(), cfg.datasets.end(),
                                       [&](const DatasetConfig& d) { return d.name == cfg.reference; });
        require(found, Errc::invalid_argument, "reference dataset '" + cfg.reference + "' is not declared");
    }
    require(!(cfg.hybrid && (has("filter") || has("decimate"))), Errc::invalid_argument,
            "hybrid projection works on raw pairs and cannot follow filter/decimate");
    require(cfg.decimate_factor >= 1, Errc::invalid_argument, "decimate factor must be >= 1");
}

inline void from_json(const nlohmann::json& j, DatasetConfig& d)
{
    d.name = j.at("name").get<std::string>();
    if (j.contains("synth")) {
        SynthConfig s;
        from_json(j.at("synth"), s);
        d.synth = s;
    }
    d.count = j.value("count", std::size_t{0});
    d.import = j.value("import", nlohmann::json());
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c)
{
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.stages = j.value("stages", c.stages);
    c.datasets = j.at("datasets").get<std::vector<DatasetConfig>>();
    c.reference = j.value("reference", c.datasets.empty() ? std::string{} : c.datasets.front().name);
    const auto section = [&](const char* key) { return j.value(key, nlohmann::json::object()); };
    c.align_window = section("align").value("window", c.align_window);
    c.f_lo = section("filter").value("f_lo", c.f_lo);
    c.f_hi = section("filter").value("f_hi", c.f_hi);
    c.decimate_factor = section("decimate").value("factor", c.decimate_factor);
    c.hybrid = section("basis").value("hybrid", c.hybrid);
    c.fit_bins = section("fit").value("bins", c.fit_bins);
    c.bootstrap_draws = section("confidence").value("draws", c.bootstrap_draws);
    c.grid_points = section("confidence").value("grid_points", c.grid_points);
}

inline RawImport raw_import_from_json(const nlohmann::json& j, Channel channel)
{
    RawImport spec;
    spec.format = parse_raw_format(j.value("format", std::string("f32")));
    spec.rows = j.value("rows", std::size_t{0});
    spec.cols = j.value("cols", std::size_t{0});
    spec.dt = j.value("dt", 0.0);
    spec.t0 = j.value("t0", 0.0);
    spec.channel = channel;
    if (j.contains("mu") && !j.at("mu").is_null()) {
        spec.mu = j.at("mu").get<double>();
    }
    return spec;
}

/// A bundle path string, or an object {path, format, rows, cols, dt, t0, mu}.
inline TraceSet load_source(const nlohmann::json& source, Channel channel, const fs::path& base)
{
    if (source.is_string()) {
        fs::path p = source.get<std::string>();
        return read_trace_bundle(p.is_absolute() ? p : base / p);
    }
    require(source.is_object() && source.contains("path"), Errc::invalid_argument,
            "import source must be a path or an object with a path");
    fs::path p = source.at("path").get<std::string>();
    return import_raw(p.is_absolute() ? p : base / p, raw_import_from_json(source, channel));
}

struct Artifact {
    std::string stage;
    std::string path; ///< relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
    bool partial = false;
};

struct PipelineResult {
    bool ok = true;
    std::string failed_stage;
    std::optional<Errc> error_code;
    std::string error;
    std::vector<Artifact> artifacts;
    std::vector<std::string> warnings;
    nlohmann::json manifest;
};

namespace detail {

struct PipelineState {
    PipelineState(const PipelineConfig& c, fs::path d) : cfg(c), dir(std::move(d)) {}

    const PipelineConfig& cfg;
    fs::path dir;
    std::vector<std::pair<std::string, fs::path>> written; // stage, absolute path
    std::vector<std::string> warnings;
    std::map<std::string, fs::path> snspd;     // latest SNSPD bundle per dataset
    std::map<std::string, fs::path> raw_snspd; // pre-alignment SNSPD bundle
    std::map<std::string, fs::path> sync;
    std::map<std::string, fs::path> times;
    std::map<std::string, fs::path> fits;
    fs::path basis;
    fs::path single_fit;
    std::string stage;

    fs::path out(const std::string& name)
    {
        fs::path p = dir / name;
        written.emplace_back(stage, p);
        return p;
    }

    void warn(const std::string& dataset, const std::vector<std::string>& ws)
    {
        for (const auto& w : ws) {
            warnings.push_back(stage + "/" + dataset + ": " + w);
        }
    }
};

inline void stage_source(PipelineState& st)
{
    for (const auto& d : st.cfg.datasets) {
        if (st.stage == "synth") {
            SynthConfig sc = *d.synth;
            sc.seed = derive_seed(st.cfg.seed, "synth/" + d.name);
            const LabeledSet set = generate_dataset(sc, d.count, false);
            st.snspd[d.name] = st.out(d.name + ".snspd.pnrb");
            write_trace_bundle(set.snspd, st.snspd[d.name]);
            st.sync[d.name] = st.out(d.name + ".sync.pnrb");
            write_trace_bundle(set.sync, st.sync[d.name]);
            write_labels_csv(set.labels, st.out(d.name + ".labels.csv"));
        } else {
            const fs::path base = fs::current_path();
            TraceSet snspd = load_source(d.import.at("snspd"), Channel::snspd, base);
            snspd.channel = Channel::snspd;
            st.snspd[d.name] = st.out(d.name + ".snspd.pnrb");
            write_trace_bundle(snspd, st.snspd[d.name]);
            if (d.import.contains("sync")) {
                TraceSet sync = load_source(d.import.at("sync"), Channel::sync, base);
                sync.channel = Channel::sync;
                st.sync[d.name] = st.out(d.name + ".sync.pnrb");
                write_trace_bundle(sync, st.sync[d.name]);
            }
        }
        st.raw_snspd[d.name] = st.snspd[d.name];
    }
}

inline void stage_align(PipelineState& st)
{
    for (const auto& d : st.cfg.datasets) {
        require(st.sync.count(d.name), Errc::invalid_argument, "dataset '" + d.name + "' has no sync channel");
        const auto result =
            align_dataset(read_trace_bundle(st.sync[d.name]), read_trace_bundle(st.snspd[d.name]), st.cfg.align_window);
        st.warn(d.name, result.warnings);
        write_column_csv(result.shifts, "shift_s", st.out(d.name + ".shifts.csv"));
        st.snspd[d.name] = st.out(d.name + ".aligned.pnrb");
        write_trace_bundle(result.aligned, st.snspd[d.name]);
    }
}

inline void stage_filter(PipelineState& st)
{
    for (const auto& d : st.cfg.datasets) {
        const TraceSet filtered = bandpass_set(read_trace_bundle(st.snspd[d.name]), st.cfg.f_lo, st.cfg.f_hi);
        st.snspd[d.name] = st.out(d.name + ".filtered.pnrb");
        write_trace_bundle(filtered, st.snspd[d.name]);
    }
}

inline void stage_decimate(PipelineState& st)
{
    for (const auto& d : st.cfg.datasets) {
        const TraceSet dec = decimate_set(read_trace_bundle(st.snspd[d.name]), st.cfg.decimate_factor);
        st.snspd[d.name] = st.out(d.name + ".decimated.pnrb");
        write_trace_bundle(dec, st.snspd[d.name]);
    }
}

inline void stage_basis(PipelineState& st)
{
    const std::string& ref = st.cfg.reference;
    st.basis = st.out("basis.pnrp");
    if (st.cfg.hybrid) {
        require(st.sync.count(ref), Errc::invalid_argument, "hybrid basis needs the reference sync channel");
        write_basis(build_hybrid_basis(read_trace_bundle(st.snspd[ref]), read_trace_bundle(st.sync[ref])), st.basis);
    } else {
        write_basis(build_basis(read_trace_bundle(st.snspd[ref])), st.basis);
    }
}

inline void stage_project(PipelineState& st)
{
    if (st.basis.empty()) {
        stage_basis(st);
    }
    const AnyBasis basis = read_basis(st.basis);
    for (const auto& d : st.cfg.datasets) {
        std::vector<double> times;
        if (const auto* h = std::get_if<HybridBasis>(&basis)) {
            require(st.sync.count(d.name), Errc::invalid_argument, "hybrid projection needs a sync channel");
            times = hybrid_project_set(*h, read_trace_bundle(st.raw_snspd[d.name]), read_trace_bundle(st.sync[d.name]));
        } else {
            times = project_set(std::get<ProjectionBasis>(basis), read_trace_bundle(st.snspd[d.name]));
        }
        st.times[d.name] = st.out(d.name + ".dt.csv");
        write_column_csv(times, "dt_s", st.times[d.name]);
    }
}

inline void stage_fit(PipelineState& st)
{
    const std::string& ref = st.cfg.reference;
    const std::vector<double> ref_times = read_column_csv(st.times.at(ref));
    const SinglePhotonFit single = fit_single_photon(histogram_for_fit(ref_times, st.cfg.fit_bins));
    st.single_fit = st.out(ref + ".single.json");
    write_json(nlohmann::json(single), st.single_fit);
    for (const auto& d : st.cfg.datasets) {
        if (d.name == ref) {
            continue;
        }
        MixtureFit fit = fit_mixture(read_column_csv(st.times.at(d.name)), single, st.cfg.fit_bins);
        if (d.synth) {
            fit.mu_label = d.synth->mu;
        }
        st.warn(d.name, fit.warnings);
        st.fits[d.name] = st.out(d.name + ".fit.json");
        write_json(nlohmann::json(fit), st.fits[d.name]);
    }
}

inline void stage_confidence(PipelineState& st)
{
    std::vector<ConfidenceReport> reports;
    for (const auto& [name, path] : st.fits) {
        const MixtureFit fit = read_json(path).get<MixtureFit>();
        ConfidenceReport report = confidence_report(fit, name, st.cfg.bootstrap_draws,
                                                    derive_seed(st.cfg.seed, "confidence/" + name), st.cfg.grid_points);
        st.warn(name, report.warnings);
        write_json(nlohmann::json(report), st.out(name + ".confidence.json"));
        reports.push_back(std::move(report));
    }
    require(!reports.empty(), Errc::invalid_argument, "no mixture fits to report (only the reference dataset?)");
    write_text(render_csv(compare_systems(reports)), st.out("comparison.csv"));
}

} // namespace detail

/// Runs the configured stages in order. Each stage reads only the files the
/// previous stages wrote. A manifest.json with the SHA-256 of every artifact
/// is written whether or not a stage fails.
inline PipelineResult run_pipeline(const PipelineConfig& cfg)
{
    validate(cfg);
    const unsigned previous_threads = threads();
    set_threads(cfg.threads);
    fs::create_directories(cfg.output_dir);

    detail::PipelineState st{cfg, cfg.output_dir};
    PipelineResult result;
    for (const auto& stage : cfg.stages) {
        st.stage = stage;
        try {
            if (stage == "synth" || stage == "import") {
                detail::stage_source(st);
            } else if (stage == "align") {
                detail::stage_align(st);
            } else if (stage == "filter") {
                detail::stage_filter(st);
            } else if (stage == "decimate") {
                detail::stage_decimate(st);
            } else if (stage == "basis") {
                detail::stage_basis(st);
            } else if (stage == "project") {
                detail::stage_project(st);
            } else if (stage == "fit") {
                detail::stage_fit(st);
            } else if (stage == "confidence") {
                detail::stage_confidence(st);
            }
        } catch (const Error& e) {
            result.ok = false;
            result.failed_stage = stage;
            result.error_code = e.code();
            result.error = e.what();
            break;
        }
    }
    set_threads(previous_threads);
    result.warnings = st.warnings;

    nlohmann::json artifacts = nlohmann::json::array();
    for (const auto& [stage, path] : st.written) {
        if (!fs::exists(path)) {
            continue;
        }
        Artifact a{stage, fs::relative(path, cfg.output_dir).generic_string(), sha256_file(path), fs::file_size(path),
                   !result.ok && stage == result.failed_stage};
        artifacts.push_back({{"stage", a.stage},
                             {"path", a.path},
                             {"sha256", a.sha256},
                             {"bytes", a.bytes},
                             {"partial", a.partial}});
        result.artifacts.push_back(std::move(a));
    }
    result.manifest = {{"status", result.ok ? "ok" : "failed"},
                       {"seed", cfg.seed},
                       {"stages", cfg.stages},
                       {"artifacts", artifacts},
                       {"warnings", result.warnings}};
    if (!result.ok) {
        result.manifest["failed_stage"] = result.failed_stage;
        result.manifest["error"] = {{"code", to_string(*result.error_code)}, {"message", result.error}};
    }
    write_json(result.manifest, cfg.output_dir / "manifest.json");
    return result;
}

} // namespace pnr
