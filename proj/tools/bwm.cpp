// bwm: owner-side command line.
//
// Exit codes: 0 success, 1 verification negative, 2 configuration error, 3 network error.

#include "branchwm/bench.hpp"
#include "branchwm/error.hpp"
#include "branchwm/forensic.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace bwm;

constexpr int kOk = 0;
constexpr int kNegative = 1;
constexpr int kConfig = 2;
constexpr int kNetwork = 3;

struct Globals {
    std::string config;
    std::uint64_t seed = 1;
    std::string mode;
};

gateway::GatewayConfig load_config(const Globals& g) {
    gateway::GatewayConfig cfg;
    if (!g.config.empty()) {
        cfg = gateway::GatewayConfig::load(g.config);
    } else {
        cfg.apply_env();
    }
    if (!g.mode.empty()) cfg.mode = gateway::parse_mode(g.mode);
    return cfg;
}

// Writes CSV to `path`, or stdout when empty.
template <class Fn>
void emit_csv(const std::string& path, Fn&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    write(out);
}

int cmd_keygen(int bits, const std::string& out) {
    auto key = crypto::keygen(bits);
    if (out.empty()) {
        std::cout << to_hex(key.bytes()) << '\n';
    } else {
        crypto::write_key_file(out, key);
    }
    return kOk;
}

int cmd_trigger(const Globals& g, const std::string& prompt, const std::string& out) {
    auto cfg = load_config(g);
    auto secrets = forensic::OwnerSecrets::from_config(cfg);
    auto vocab = gateway::load_vocab(cfg);
    const lm::ToyLm model({cfg.model_seed, cfg.context_window}, vocab->size());
    auto artifact = forensic::make_trigger(prompt, secrets, *vocab, model);
    if (out.empty()) {
        std::cout << artifact.text << '\n';
    } else {
        forensic::write_artifact(out, artifact, *vocab);
    }
    return kOk;
}

int cmd_probe(const Globals& g, const std::string& endpoint, const std::string& trigger_path,
              std::size_t max_tokens) {
    auto cfg = load_config(g);
    auto secrets = forensic::OwnerSecrets::from_config(cfg);
    auto vocab = gateway::load_vocab(cfg);
    auto artifact = forensic::read_artifact(trigger_path, *vocab);
    if (artifact.mode != secrets.mode) throw ConfigError("trigger artifact does not match the configured mode");
    const forensic::Verifier verifier(secrets, vocab);
    forensic::Prober prober(endpoint, max_tokens);
    auto r = prober.probe(artifact, verifier);
    std::cout << "endpoint,verdict,latency_us,detail\n"
              << r.endpoint << ',' << forensic::to_string(r.verdict) << ',' << r.latency.count() << ",\""
              << r.detail << "\"\n";
    switch (r.verdict) {
    case forensic::Verdict::valid_evidence: return kOk;
    case forensic::Verdict::invalid: return kNegative;
    case forensic::Verdict::error: break;
    }
    std::cerr << "bwm: " << r.detail << '\n';
    return kNetwork;
}

int cmd_triad(const Globals& g, const std::string& prompts_path, std::size_t n, std::size_t max_tokens,
              const std::string& out) {
    forensic::TriadOptions opt;
    opt.seed = g.seed;
    opt.max_tokens = max_tokens;
    opt.mode = gateway::Mode::simple;
    if (!g.config.empty()) {
        auto cfg = load_config(g);
        opt.secrets = forensic::OwnerSecrets::from_config(cfg);
        opt.mode = cfg.mode;
        opt.model_seed = cfg.model_seed;
    }
    if (!g.mode.empty()) opt.mode = gateway::parse_mode(g.mode);
    opt.prompts = prompts_path.empty() ? forensic::story_prompts(500, forensic::kCorpusSeed)
                                       : forensic::load_prompts(prompts_path);
    if (n < opt.prompts.size()) opt.prompts.resize(n);
    auto report = forensic::run_triad(opt);
    emit_csv(out, [&](std::ostream& os) { forensic::write_triad_csv(os, {report}); });
    std::cerr << "triad: " << report.seconds << " s\n";
    return report.passed() ? kOk : kNegative;
}

int cmd_attack(const Globals& g, const std::string& attack, std::size_t trials, const std::vector<double>& rhos,
               double fpr, const std::string& out) {
    if (trials < 1) throw ConfigError("--trials must be >= 1");
    if (attack == "filter") {
        forensic::FilterOptions o;
        o.trials = trials;
        o.false_positive_rate = fpr;
        o.seed = g.seed;
        auto rows = forensic::simulate_filter(o);
        emit_csv(out, [&](std::ostream& os) { forensic::write_filter_csv(os, rows); });
    } else if (attack == "erasure") {
        forensic::ErasureOptions o;
        o.trials = trials;
        if (!rhos.empty()) o.rhos = rhos;
        o.seed = g.seed;
        auto rows = forensic::simulate_erasure(o);
        emit_csv(out, [&](std::ostream& os) { forensic::write_erasure_csv(os, rows); });
    } else if (attack == "replay") {
        forensic::ReplayOptions o;
        o.trials = trials;
        o.seed = g.seed;
        auto rows = forensic::simulate_replay(o);
        emit_csv(out, [&](std::ostream& os) { forensic::write_replay_csv(os, rows); });
    } else {
        throw ConfigError("unknown attack: " + attack);
    }
    return kOk;
}

int cmd_bench(std::size_t iterations, const std::string& out) {
    crypto::BenchOptions o;
    o.iterations = iterations;
    auto report = crypto::bench_verification(o);
    emit_csv(out, [&](std::ostream& os) { crypto::write_bench_csv(os, report); });
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branch watermark owner toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "gateway/owner config file");
    app.add_option("--seed", g.seed, "experiment seed");
    app.add_option("--mode", g.mode, "simple | concealed")->check(CLI::IsMember({"simple", "concealed"}));

    int bits = 1024;
    std::string out;
    auto* keygen = app.add_subcommand("keygen", "generate a secret key");
    keygen->add_option("--bits", bits, "128 | 256 | 512 | 1024");
    keygen->add_option("--out", out, "key file (default: stdout)");

    std::string prompt;
    auto* trigger = app.add_subcommand("trigger", "build a trigger for a prompt");
    trigger->add_option("--prompt", prompt)->required();
    trigger->add_option("--out", out, "artifact file (default: stdout)");

    std::string endpoint, trigger_path;
    std::size_t max_tokens = 64;
    auto* probe = app.add_subcommand("probe", "send a trigger to an endpoint and verify the reply");
    probe->add_option("--endpoint", endpoint, "http://host:port")->required();
    probe->add_option("--trigger", trigger_path, "artifact file")->required();
    probe->add_option("--max-tokens", max_tokens);

    std::string prompts_path;
    std::size_t n = 500;
    auto* triad = app.add_subcommand("triad", "deployed / bare / wrong-key correctness check");
    triad->add_option("--prompts", prompts_path, "one prompt per line (default: built-in corpus)");
    triad->add_option("-n", n, "number of prompts");
    triad->add_option("--max-tokens", max_tokens);
    triad->add_option("--out", out, "CSV file (default: stdout)");

    std::string attack;
    std::size_t trials = 0;
    std::vector<double> rhos;
    double fpr = 0.05;
    auto* sim = app.add_subcommand("attack-sim", "interference attack simulations");
    sim->add_option("--attack", attack)->required()->check(CLI::IsMember({"filter", "erasure", "replay"}));
    sim->add_option("--trials", trials, "trial count (default per attack)");
    sim->add_option("--rho", rhos, "substitution rates (erasure)")->delimiter(',');
    sim->add_option("--fpr", fpr, "natural false-positive rate (filter)");
    sim->add_option("--out", out, "CSV file (default: stdout)");

    std::size_t iterations = 2000;
    auto* bench = app.add_subcommand("bench", "verification timing: hash, MAC, signature");
    bench->add_option("--iterations", iterations);
    bench->add_option("--out", out, "CSV file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*keygen) return cmd_keygen(bits, out);
        if (*trigger) return cmd_trigger(g, prompt, out);
        if (*probe) return cmd_probe(g, endpoint, trigger_path, max_tokens);
        if (*triad) {
            if (n == 0) throw ConfigError("-n must be >= 1");
            return cmd_triad(g, prompts_path, n, max_tokens, out);
        }
        if (*sim) {
            if (trials == 0) trials = attack == "erasure" ? 50 : attack == "replay" ? 100 : 200;
            return cmd_attack(g, attack, trials, rhos, fpr, out);
        }
        if (*bench) return cmd_bench(iterations, out);
    } catch (const NetworkError& e) {
        std::cerr << "bwm: " << e.what() << '\n';
        return kNetwork;
    } catch (const std::exception& e) {
        std::cerr << "bwm: " << e.what() << '\n';
        return kConfig;
    }
    return kConfig;
}
