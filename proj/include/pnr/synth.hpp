#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "pnr/error.hpp"
#include "pnr/parallel.hpp"
#include "pnr/rng.hpp"
#include "pnr/trace.hpp"

namespace pnr {

/// Detector pulse: logistic rising edge times an exponential decay that sets
/// in around `onset`. The logistic scale is rise_time / (2 ln 9), which makes
/// the 10-90 % rise of the logistic equal to rise_time. The decay argument is
/// a softplus of the same scale rather than max(0, t - onset), so the pulse
/// has no slope break and stays band-limited at the digitizer rate.
struct PulseTemplate {
    double rise_time = 2e-9;
    double fall_time = 10e-9;
    double amplitude = 0.25;
    double onset = 10e-9;

    double operator()(double t) const noexcept
    {
        const double scale = rise_time / (2.0 * std::log(9.0));
        const double x = (t - onset) / scale;
        const double edge = 1.0 / (1.0 + std::exp(-x));
        const double softplus = x > 30.0 ? x : std::log1p(std::exp(x));
        return amplitude * edge * std::exp(-scale * softplus / fall_time);
    }
};

inline void validate(const PulseTemplate& p)
{
    require(p.rise_time > 0.0 && p.fall_time > 0.0, Errc::invalid_argument, "pulse times must be positive");
    require(p.amplitude != 0.0 && std::isfinite(p.amplitude), Errc::invalid_argument, "pulse amplitude must be non-zero");
    require(std::isfinite(p.onset), Errc::invalid_argument, "pulse onset must be finite");
}

struct EmgJitter {
    double sigma = 0.0;
    double tau = 0.0;
};

/// Generator settings. Defaults are the desk-scale configuration: 5 GS/s,
/// 512 samples with 20 before the trigger, EMG detector jitter whose fitted
/// single-photon FWHM comes out near 45 ps, and a per-photon shift tuned so
/// the 1->2 confidence lands near 0.85.
struct SynthConfig {
    PulseTemplate pulse{};
    double per_photon_shift = -74e-12;
    EmgJitter jitter_emg{17e-12, 8.5e-12};
    double noise_sigma = 1.25e-3;
    double mu = 1.77;
    double sample_rate = 5e9;
    std::size_t trace_len = 512;
    std::size_t pre_trigger = 20;
    PulseTemplate sync_template{14e-9, 7e-9, 0.5, 30e-9};
    double sync_jitter_sigma = 200e-12 / 3.0;
    std::uint64_t seed = 1;

    double dt() const noexcept { return 1.0 / sample_rate; }
    double t0() const noexcept { return -static_cast<double>(pre_trigger) * dt(); }
};

inline void validate(const SynthConfig& cfg)
{
    validate(cfg.pulse);
    validate(cfg.sync_template);
    require(std::isfinite(cfg.mu) && cfg.mu >= 0.0, Errc::invalid_argument, "mu must be >= 0");
    require(cfg.noise_sigma >= 0.0, Errc::invalid_argument, "noise_sigma must be >= 0");
    require(cfg.jitter_emg.sigma >= 0.0, Errc::invalid_argument, "jitter sigma must be >= 0");
    require(cfg.sync_jitter_sigma >= 0.0, Errc::invalid_argument, "sync jitter sigma must be >= 0");
    require(cfg.sample_rate > 0.0 && std::isfinite(cfg.sample_rate), Errc::invalid_argument, "sample_rate must be positive");
    require(cfg.trace_len > cfg.pre_trigger && cfg.trace_len > 1, Errc::invalid_argument,
            "trace_len must exceed pre_trigger");
}

struct Label {
    int n = 0;
    double true_shift = 0.0;
};

struct LabeledSet {
    TraceSet snspd;
    TraceSet sync;
    std::vector<Label> labels;
};

struct GeneratedPair {
    Trace snspd;
    Trace sync;
    double true_shift = 0.0;
};

inline int sample_photon_number(double mu, Rng& rng)
{
    require(std::isfinite(mu) && mu >= 0.0, Errc::invalid_argument, "mu must be finite and >= 0");
    if (mu == 0.0) {
        return 0;
    }
    return std::poisson_distribution<int>(mu)(rng);
}

/// Gaussian(0, sigma) plus a one-sided exponential of scale |tau| pointing along sign(tau).
inline double draw_emg(const EmgJitter& j, Rng& rng)
{
    double v = 0.0;
    if (j.sigma > 0.0) {
        v += std::normal_distribution<double>(0.0, j.sigma)(rng);
    }
    if (j.tau != 0.0) {
        const double e = std::exponential_distribution<double>(1.0 / std::abs(j.tau))(rng);
        v += j.tau > 0.0 ? e : -e;
    }
    return v;
}

/// One SNSPD/sync pair for a known photon number. Draw order: trigger jitter,
/// detector jitter, then per-sample noise.
inline GeneratedPair generate_pair(int n, const SynthConfig& cfg, Rng& rng)
{
    require(n >= 0, Errc::invalid_argument, "photon number must be >= 0");
    const double dt = cfg.dt();
    const double t0 = cfg.t0();
    const double trigger = cfg.sync_jitter_sigma > 0.0
                               ? std::normal_distribution<double>(0.0, cfg.sync_jitter_sigma)(rng)
                               : 0.0;
    GeneratedPair pair;
    if (n >= 1) {
        pair.true_shift = (n - 1) * cfg.per_photon_shift + draw_emg(cfg.jitter_emg, rng);
    }
    pair.snspd = Trace{std::vector<double>(cfg.trace_len), dt, t0};
    pair.sync = Trace{std::vector<double>(cfg.trace_len), dt, t0};
    const double delay = pair.true_shift + trigger;
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma > 0.0 ? cfg.noise_sigma : 1.0);
    for (std::size_t i = 0; i < cfg.trace_len; ++i) {
        const double t = t0 + static_cast<double>(i) * dt;
        double v = n >= 1 ? cfg.pulse(t - delay) : 0.0;
        if (cfg.noise_sigma > 0.0) {
            v += noise(rng);
        }
        pair.snspd.samples[i] = v;
        pair.sync.samples[i] = cfg.sync_template(t - trigger);
    }
    return pair;
}

inline TraceSet empty_synth_set(const SynthConfig& cfg, Channel channel)
{
    TraceSet set;
    set.channel = channel;
    set.mu_label = cfg.mu;
    store(set, AcquisitionMeta{cfg.sample_rate, static_cast<std::uint32_t>(cfg.pre_trigger), "synth"});
    set.meta["seed"] = cfg.seed;
    return set;
}

/// Pairs for dataset indices [first, first + count). Item i depends only on
/// (cfg.seed, i), so ranges concatenate to exactly the full dataset.
inline LabeledSet generate_range(const SynthConfig& cfg, std::size_t first, std::size_t count, bool keep_zeros)
{
    validate(cfg);
    require(keep_zeros || cfg.mu > 0.0, Errc::invalid_argument, "mu = 0 has no detections to keep");
    LabeledSet out{empty_synth_set(cfg, Channel::snspd), empty_synth_set(cfg, Channel::sync), {}};
    out.snspd.traces.resize(count);
    out.sync.traces.resize(count);
    out.labels.resize(count);
    parallel_for(count, [&](std::size_t j) {
        Rng rng = stream(cfg.seed, first + j);
        int n = sample_photon_number(cfg.mu, rng);
        while (n == 0 && !keep_zeros) {
            n = sample_photon_number(cfg.mu, rng);
        }
        GeneratedPair pair = generate_pair(n, cfg, rng);
        out.snspd.traces[j] = std::move(pair.snspd);
        out.sync.traces[j] = std::move(pair.sync);
        out.labels[j] = Label{n, pair.true_shift};
    });
    return out;
}

inline LabeledSet generate_dataset(const SynthConfig& cfg, std::size_t count, bool keep_zeros)
{
    require(count >= 1, Errc::invalid_argument, "count must be >= 1");
    return generate_range(cfg, 0, count, keep_zeros);
}

inline void to_json(nlohmann::json& j, const PulseTemplate& p)
{
    j = {{"rise_time", p.rise_time}, {"fall_time", p.fall_time}, {"amplitude", p.amplitude}, {"onset", p.onset}};
}

inline void from_json(const nlohmann::json& j, PulseTemplate& p)
{
    p.rise_time = j.value("rise_time", p.rise_time);
    p.fall_time = j.value("fall_time", p.fall_time);
    p.amplitude = j.value("amplitude", p.amplitude);
    p.onset = j.value("onset", p.onset);
}

inline void to_json(nlohmann::json& j, const SynthConfig& c)
{
    j = {{"template", c.pulse},
         {"per_photon_shift", c.per_photon_shift},
         {"jitter_emg", {{"sigma", c.jitter_emg.sigma}, {"tau", c.jitter_emg.tau}}},
         {"noise_sigma", c.noise_sigma},
         {"mu", c.mu},
         {"sample_rate", c.sample_rate},
         {"trace_len", c.trace_len},
         {"pre_trigger", c.pre_trigger},
         {"sync_template", c.sync_template},
         {"sync_jitter_sigma", c.sync_jitter_sigma},
         {"seed", c.seed}};
}

/// Missing keys keep their defaults, so partial documents are accepted.
inline void from_json(const nlohmann::json& j, SynthConfig& c)
{
    if (j.contains("template")) {
        j.at("template").get_to(c.pulse);
    }
    c.per_photon_shift = j.value("per_photon_shift", c.per_photon_shift);
    if (j.contains("jitter_emg")) {
        c.jitter_emg.sigma = j.at("jitter_emg").value("sigma", c.jitter_emg.sigma);
        c.jitter_emg.tau = j.at("jitter_emg").value("tau", c.jitter_emg.tau);
    }
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.mu = j.value("mu", c.mu);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.trace_len = j.value("trace_len", c.trace_len);
    c.pre_trigger = j.value("pre_trigger", c.pre_trigger);
    if (j.contains("sync_template")) {
        j.at("sync_template").get_to(c.sync_template);
    }
    c.sync_jitter_sigma = j.value("sync_jitter_sigma", c.sync_jitter_sigma);
    c.seed = j.value("seed", c.seed);
}

} // namespace pnr
