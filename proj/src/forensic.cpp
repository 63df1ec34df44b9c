#include "branchwm/forensic.hpp"

#include "branchwm/error.hpp"
#include "branchwm/simple.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace bwm::forensic {

using nlohmann::json;

namespace {

const std::vector<std::string_view> kNames = {"Anna", "Ben",  "Oscar", "Tom",  "Mary", "Lucy", "Sam",
                                              "Kate", "Jack", "Emma",  "Leo",  "Mia",  "Noah", "Ella",
                                              "Max",  "Zoe",  "Ivan",  "Nina", "Paul", "Rosa"};
const std::vector<std::string_view> kGerunds = {"filling", "painting", "cleaning", "building", "fixing", "reading",
                                                "cooking", "washing",  "planting", "baking",   "packing", "selling"};
const std::vector<std::string_view> kPast = {"filled", "painted", "cleaned", "built", "fixed",  "cooked",
                                             "washed", "planted", "baked",   "packed", "sold",  "found",
                                             "lost",   "bought",  "opened"};
const std::vector<std::string_view> kBase = {"fill", "paint", "clean", "build", "fix",  "cook", "wash",
                                             "plant", "bake", "pack",  "sell",  "find", "buy",  "open"};
const std::vector<std::string_view> kModifiers = {"bird",  "garden", "kitchen", "school", "family", "winter",
                                                  "summer", "wooden", "little", "old",    "new",    "red",
                                                  "blue",  "green",  "big",     "small",  "broken", "favorite"};
const std::vector<std::string_view> kEndings = {
    "feeders.", "house.", "car.",  "fence.", "boat.",  "cake.", "bread.", "garden.", "room.",  "window.",
    "door.",    "bike.",  "shoes.", "books.", "float.", "dog.", "cat.",   "table.",  "shirt.", "letter.",
    "store.",   "lunch.", "roof.", "yard.",  "toys.",  "plants.", "box.", "kite.",   "shelf.", "wall."};
const std::vector<std::string_view> kPossessives = {"her", "his", "their"};
const std::vector<std::string_view> kRelatives = {"mother", "father", "friend", "sister", "brother", "neighbor"};
const std::vector<std::string_view> kTimes = {"morning.", "day.", "night."};

std::string_view pick(lm::SplitMix64& rng, const std::vector<std::string_view>& words) {
    return words[rng.below(words.size())];
}

std::string join(std::initializer_list<std::string_view> words) {
    std::string out;
    for (auto w : words) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

std::string story_sentence(lm::SplitMix64& rng) {
    switch (rng.below(7)) {
    case 0:
        return join({pick(rng, kNames), "was", pick(rng, kGerunds), pick(rng, kPossessives), pick(rng, kModifiers),
                     pick(rng, kEndings)});
    case 1: return join({pick(rng, kNames), pick(rng, kPast), "the", pick(rng, kModifiers), pick(rng, kEndings)});
    case 2:
        return join({pick(rng, kNames), "decided", "to", pick(rng, kBase), pick(rng, kPossessives),
                     pick(rng, kModifiers), pick(rng, kEndings)});
    case 3:
        return join({pick(rng, kNames), "and", "her", pick(rng, kRelatives), pick(rng, kPast), "a",
                     pick(rng, kModifiers), pick(rng, kEndings)});
    case 4:
        return join({pick(rng, kNames), "wanted", "to", pick(rng, kBase), "the", pick(rng, kEndings)});
    case 5:
        return join({pick(rng, kNames), "was", pick(rng, kGerunds), "the", pick(rng, kEndings), "Then", "she",
                     pick(rng, kPast), "it", "again."});
    default:
        return join({pick(rng, kNames), pick(rng, kPast), "the", pick(rng, kModifiers), pick(rng, kEndings), "It",
                     "was", pick(rng, kModifiers), "every", pick(rng, kTimes)});
    }
}

concealed::CopyrightMessage default_copyright() {
    return concealed::CopyrightMessage::from_string("10110010011101001011000111010110");
}

OwnerSecrets seeded_secrets(gateway::Mode mode, std::uint64_t seed, std::string_view salt) {
    return {.mode = mode,
            .mac_key = seeded_key(seed, std::string(salt) + "/mac"),
            .ek_in = seeded_key(seed, std::string(salt) + "/ek_in"),
            .ek_out = seeded_key(seed, std::string(salt) + "/ek_out"),
            .copyright = default_copyright()};
}

gateway::WatermarkSettings to_settings(const OwnerSecrets& s) {
    gateway::WatermarkSettings w;
    w.mode = s.mode;
    w.mac_key = s.mac_key;
    w.ek_in = s.ek_in;
    w.ek_out = s.ek_out;
    w.copyright = s.copyright;
    w.j = s.j;
    w.tag_bits = s.tag_bits;
    w.proclamation = s.proclamation;
    w.bind_evidence_key = s.bind_evidence_key;
    w.timestamp_evidence = s.timestamp_evidence;
    return w;
}

std::string request_body(std::string_view prompt, std::size_t max_tokens) {
    return json{{"prompt", prompt}, {"max_tokens", max_tokens}}.dump();
}

TokenSequence reply_tokens(const gateway::HttpReply& reply) {
    json j = json::parse(reply.body, nullptr, false);
    if (reply.status != 200 || j.is_discarded() || !j.contains("tokens")) {
        throw std::runtime_error("generation failed: " + reply.body);
    }
    return j["tokens"].get<TokenSequence>();
}

double quantile_threshold(std::vector<double> scores, double false_positive_rate) {
    std::sort(scores.begin(), scores.end());
    const double pos = std::ceil((1.0 - false_positive_rate) * static_cast<double>(scores.size())) - 1;
    std::size_t idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(scores.size() - 1)));
    return scores[idx];
}

double flag_rate(const std::vector<double>& scores, double threshold) {
    std::size_t flagged = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
    return static_cast<double>(flagged) / static_cast<double>(scores.size());
}

} // namespace

std::vector<std::string> story_prompts(std::size_t n, std::uint64_t seed) {
    lm::SplitMix64 rng(seed);
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    out.reserve(n);
    std::size_t attempts = 0;
    while (out.size() < n) {
        if (++attempts > 100 * n + 1000) throw ConfigError("cannot draw that many distinct prompts");
        std::string s = story_sentence(rng);
        if (seen.insert(s).second) out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> load_prompts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read prompt corpus: " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

crypto::SecretKey seeded_key(std::uint64_t seed, std::string_view label, int bits) {
    Bytes key;
    for (std::uint8_t block = 0; key.size() * 8 < static_cast<std::size_t>(bits); ++block) {
        Bytes input;
        for (int b = 7; b >= 0; --b) input.push_back(static_cast<std::uint8_t>(seed >> (8 * b)));
        input.insert(input.end(), label.begin(), label.end());
        input.push_back(block);
        auto d = crypto::sha512(input);
        key.insert(key.end(), d.begin(), d.end());
    }
    key.resize(bits / 8);
    return crypto::SecretKey(std::move(key));
}

OwnerSecrets OwnerSecrets::from_config(const gateway::GatewayConfig& config) {
    if (config.mode == gateway::Mode::bare) throw ConfigError("a bare configuration has no owner keys");
    auto settings = gateway::resolve_settings(config);
    if (!settings.mac_key) throw ConfigError("mac_key is required");
    OwnerSecrets s{.mode = config.mode,
                   .mac_key = *settings.mac_key,
                   .ek_in = settings.ek_in,
                   .ek_out = settings.ek_out,
                   .copyright = settings.copyright};
    s.j = config.j;
    s.tag_bits = config.tag_bits;
    s.proclamation = config.proclamation;
    s.bind_evidence_key = config.bind_evidence_key;
    s.timestamp_evidence = config.timestamp_evidence;
    s.timestamp_window_minutes = config.timestamp_window_minutes;
    s.threshold = config.threshold;
    return s;
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::valid_evidence: return "valid-evidence";
    case Verdict::invalid: return "invalid";
    case Verdict::error: return "error";
    }
    return "?";
}

Verifier::Verifier(OwnerSecrets secrets, std::shared_ptr<const Vocab> vocab)
    : secrets_(std::move(secrets)), vocab_(std::move(vocab)) {
    if (secrets_.mode == gateway::Mode::concealed) {
        if (!secrets_.ek_in || !secrets_.ek_out) throw ConfigError("concealed verification needs ek_in and ek_out");
        concealed::EvidenceParams{*secrets_.ek_out, 0.0, secrets_.j, secrets_.copyright, false}.validate(
            vocab_->size());
        if (!(secrets_.threshold > 0.5 && secrets_.threshold <= 1.0)) {
            throw ConfigError("verification threshold must be in (0.5, 1]");
        }
    }
}

EvidenceCheck Verifier::check_simple(std::string_view trigger_text, std::string_view response_text) const {
    EvidenceCheck out;
    out.trigger_valid = simple::detect(trigger_text, secrets_.mac_key, *vocab_, secrets_.tag_bits).is_trigger;
    out.evidence_valid = out.trigger_valid && response_text == secrets_.proclamation;
    return out;
}

EvidenceCheck Verifier::check_concealed(std::span<const TokenId> trigger_ids, std::span<const TokenId> response_ids,
                                        std::uint32_t now_minute) const {
    EvidenceCheck out;
    auto det = concealed::concealed_detect(trigger_ids, secrets_.mac_key, *secrets_.ek_in, *vocab_, secrets_.tag_bits);
    out.trigger_valid = det.is_trigger;
    if (!det.is_trigger || response_ids.empty()) return out;

    concealed::EvidenceParams params{*secrets_.ek_out, 0.0, secrets_.j, secrets_.copyright,
                                     secrets_.bind_evidence_key};
    if (secrets_.timestamp_evidence) params.message = gateway::timestamped_message(secrets_.copyright, 0);
    auto report = concealed::extract_copyright(response_ids, trigger_ids.back(), *det.extracted_tag, params,
                                               vocab_->size(), &secrets_.copyright);
    bool ok = concealed::verify_concealed(secrets_.copyright, report, secrets_.threshold);
    if (secrets_.timestamp_evidence) {
        std::uint32_t ts = 0;
        for (std::size_t i = secrets_.copyright.size(); i < secrets_.copyright.size() + 32; ++i) {
            ts = ts << 1 | report.recovered_bits[i];
        }
        out.timestamp = ts;
        const std::uint32_t age = now_minute >= ts ? now_minute - ts : ts - now_minute;
        ok = ok && age <= secrets_.timestamp_window_minutes;
    }
    out.evidence_valid = ok;
    out.extraction = std::move(report);
    return out;
}

TriggerArtifact make_trigger(std::string_view prompt, const OwnerSecrets& secrets, const Vocab& vocab,
                             const lm::LogitSource& owner_model) {
    TriggerArtifact a;
    a.mode = secrets.mode;
    if (secrets.mode == gateway::Mode::simple) {
        a.text = simple::trigger_gen(prompt, secrets.mac_key, vocab, secrets.tag_bits);
    } else if (secrets.mode == gateway::Mode::concealed) {
        if (!secrets.ek_in) throw ConfigError("ek_in is required in concealed mode");
        a.ids = concealed::concealed_trigger_gen(prompt, secrets.mac_key, *secrets.ek_in, owner_model, vocab,
                                                 secrets.tag_bits)
                    .flatten();
        a.text = tok_decode(a.ids, vocab);
    } else {
        throw ConfigError("bare mode has no triggers");
    }
    return a;
}

void write_artifact(const std::filesystem::path& path, const TriggerArtifact& artifact, const Vocab& vocab) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write trigger artifact: " + path.string());
    if (artifact.mode == gateway::Mode::concealed) {
        concealed::write_trigger_file(out, {vocab.size(), crypto::kDigestBits, {artifact.ids}});
    } else {
        out << artifact.text << '\n';
    }
}

TriggerArtifact read_artifact(const std::filesystem::path& path, const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read trigger artifact: " + path.string());
    std::string first;
    std::getline(in, first);
    TriggerArtifact a;
    if (first.rfind("BWM1 ", 0) == 0) {
        std::stringstream all;
        all << first << '\n' << in.rdbuf();
        auto file = concealed::read_trigger_file(all);
        if (file.v != vocab.size()) throw ConfigError("trigger artifact vocabulary size mismatch");
        if (file.records.size() != 1) throw ConfigError("trigger artifact must hold exactly one record");
        a.mode = gateway::Mode::concealed;
        a.ids = file.records.front();
        a.text = tok_decode(a.ids, vocab);
    } else {
        if (!first.empty() && first.back() == '\r') first.pop_back();
        a.mode = gateway::Mode::simple;
        a.text = first;
    }
    return a;
}

struct Prober::Impl {
    explicit Impl(const std::string& endpoint) : client(endpoint) {
        client.set_keep_alive(true);
        client.set_tcp_nodelay(true);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(120, 0);
    }
    httplib::Client client;
};

Prober::Prober(std::string endpoint, std::size_t max_tokens)
    : impl_(std::make_unique<Impl>(endpoint)), endpoint_(std::move(endpoint)), max_tokens_(max_tokens) {}

Prober::~Prober() = default;

ProbeResult Prober::probe(const TriggerArtifact& artifact, const Verifier& verifier) {
    ProbeResult r;
    r.endpoint = endpoint_;
    r.trigger = artifact.text;
    const auto t0 = std::chrono::steady_clock::now();
    auto res = impl_->client.Post("/v1/generate", request_body(artifact.text, max_tokens_), "application/json");
    r.latency = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0);
    if (!res) {
        r.verdict = Verdict::error;
        r.detail = "request failed: " + httplib::to_string(res.error());
        return r;
    }
    r.raw_response = res->body;
    if (res->status != 200) {
        r.verdict = Verdict::invalid;
        r.detail = "status " + std::to_string(res->status);
        return r;
    }
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j["text"].is_string() || !j.contains("tokens") ||
        !j["tokens"].is_array()) {
        r.verdict = Verdict::invalid;
        r.detail = "malformed response";
        return r;
    }
    EvidenceCheck check;
    if (artifact.mode == gateway::Mode::simple) {
        check = verifier.check_simple(artifact.text, j["text"].get<std::string>());
    } else {
        TokenSequence tokens;
        for (const auto& t : j["tokens"]) {
            if (!t.is_number_unsigned()) {
                r.verdict = Verdict::invalid;
                r.detail = "malformed token list";
                return r;
            }
            tokens.push_back(t.get<TokenId>());
        }
        check = verifier.check_concealed(artifact.ids, tokens);
        if (check.extraction && check.extraction->bit_accuracy) {
            std::ostringstream d;
            d << "bit_accuracy=" << *check.extraction->bit_accuracy;
            r.detail = d.str();
        }
    }
    if (!check.trigger_valid) r.detail = "trigger does not verify under the owner key";
    r.verdict = check.evidence_valid ? Verdict::valid_evidence : Verdict::invalid;
    return r;
}

TriadReport run_triad(const TriadOptions& options) {
    if (options.prompts.empty()) throw ConfigError("triad needs at least one prompt");
    if (options.mode == gateway::Mode::bare) throw ConfigError("triad needs a watermark mode");
    const auto t0 = std::chrono::steady_clock::now();

    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    auto model = std::make_shared<const lm::ToyLm>(lm::LmConfig{options.model_seed, 4}, vocab->size());
    const std::size_t cap = std::max<std::size_t>(options.max_tokens, 512);
    auto bare = std::make_shared<const gateway::GenerationService>(model, vocab, cap);
    auto backend = std::make_shared<const gateway::InProcessBackend>(bare);

    OwnerSecrets owner = options.secrets ? *options.secrets : seeded_secrets(options.mode, options.seed, "owner");
    owner.mode = options.mode;
    OwnerSecrets other = seeded_secrets(options.mode, options.seed, "independent");
    other.copyright = owner.copyright;
    other.j = owner.j;
    other.tag_bits = owner.tag_bits;
    other.proclamation = owner.proclamation;

    auto deployed = std::make_shared<gateway::Gateway>(to_settings(owner), vocab, backend, cap);
    auto wrong_key = std::make_shared<gateway::Gateway>(to_settings(other), vocab, backend, cap);
    auto bare_srv = gateway::serve_bare(bare, "127.0.0.1:0");
    auto deployed_srv = gateway::serve_gateway(deployed, "127.0.0.1:0");
    auto wrong_srv = gateway::serve_gateway(wrong_key, "127.0.0.1:0");

    const Verifier verifier(owner, vocab);
    Prober p_deployed(deployed_srv->url(), options.max_tokens);
    Prober p_bare(bare_srv->url(), options.max_tokens);
    Prober p_wrong(wrong_srv->url(), options.max_tokens);

    TriadReport report;
    report.mode = options.mode;
    report.n = options.prompts.size();
    for (const auto& prompt : options.prompts) {
        const TriggerArtifact trig = make_trigger(prompt, owner, *vocab, *model);
        if (p_deployed.probe(trig, verifier).verdict == Verdict::valid_evidence) ++report.deployed_valid;
        if (p_bare.probe(trig, verifier).verdict == Verdict::invalid) ++report.bare_invalid;
        if (p_wrong.probe(trig, verifier).verdict == Verdict::invalid) ++report.wrong_key_invalid;
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

void write_triad_csv(std::ostream& out, const std::vector<TriadReport>& reports) {
    out << "mode,n,deployed_valid,bare_invalid,wrong_key_invalid,passed\n";
    for (const auto& r : reports) {
        out << gateway::to_string(r.mode) << ',' << r.n << ',' << r.deployed_valid << ',' << r.bare_invalid << ','
            << r.wrong_key_invalid << ',' << (r.passed() ? 1 : 0) << '\n';
    }
}

std::vector<FilterRow> simulate_filter(const FilterOptions& options) {
    if (options.trials < 1) throw ConfigError("trials must be >= 1");
    if (!(options.false_positive_rate > 0 && options.false_positive_rate < 1)) {
        throw ConfigError("false positive rate must be in (0, 1)");
    }
    const Vocab& vocab = Vocab::toy();
    const lm::ToyLm model({options.model_seed, 4}, vocab.size());
    const OwnerSecrets owner = seeded_secrets(gateway::Mode::concealed, options.seed, "filter");
    const auto prompts = story_prompts(3 * options.trials, options.seed);

    auto natural_score = [&](const std::string& prompt, std::uint64_t draw_seed) {
        TokenSequence ids = tok_encode(prompt, vocab);
        TokenSequence cont = lm::generate(model, ids, options.tail, lm::SamplingPolicy::multinomial(draw_seed));
        return lm::conditional_perplexity(ids, cont, model);
    };
    auto tail_score = [&](const TokenSequence& ids) {
        const std::size_t tail = std::min(options.tail, ids.size() - 1);
        std::span<const TokenId> all(ids);
        return lm::conditional_perplexity(all.first(ids.size() - tail), all.last(tail), model);
    };

    std::vector<double> calibration, natural, simple_scores, concealed_scores;
    lm::SplitMix64 seeds(options.seed ^ 0xf11e);
    for (std::size_t i = 0; i < options.trials; ++i) {
        calibration.push_back(natural_score(prompts[i], seeds.next()));
        natural.push_back(natural_score(prompts[options.trials + i], seeds.next()));
        const auto& p = prompts[2 * options.trials + i];
        simple_scores.push_back(tail_score(tok_encode(simple::trigger_gen(p, owner.mac_key, vocab), vocab)));
        concealed_scores.push_back(tail_score(
            concealed::concealed_trigger_gen(p, owner.mac_key, *owner.ek_in, model, vocab).flatten()));
    }
    const double threshold = quantile_threshold(calibration, options.false_positive_rate);
    return {
        {"natural", options.trials, flag_rate(natural, threshold), threshold},
        {"simple", options.trials, flag_rate(simple_scores, threshold), threshold},
        {"concealed", options.trials, flag_rate(concealed_scores, threshold), threshold},
    };
}

std::vector<ErasureRow> simulate_erasure(const ErasureOptions& options) {
    if (options.trials < 1) throw ConfigError("trials must be >= 1");
    for (double rho : options.rhos) {
        if (!(rho >= 0 && rho <= 1)) throw ConfigError("substitution rate must be in [0, 1]");
    }
    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    auto model = std::make_shared<const lm::ToyLm>(lm::LmConfig{options.model_seed, 4}, vocab->size());
    const std::size_t cap = std::max<std::size_t>(options.response_tokens, 512);
    auto backend = std::make_shared<const gateway::InProcessBackend>(
        std::make_shared<const gateway::GenerationService>(model, vocab, cap));

    OwnerSecrets owner = seeded_secrets(gateway::Mode::concealed, options.seed, "erasure");
    owner.copyright = concealed::CopyrightMessage::from_string(options.copyright);
    owner.j = options.j;
    auto settings = to_settings(owner);
    settings.delta = options.delta;
    gateway::Gateway gw(settings, vocab, backend, cap);
    const Verifier verifier(owner, vocab);

    const auto prompts = story_prompts(options.trials, options.seed ^ 0xe4a5);
    std::vector<double> sums(options.rhos.size(), 0.0);
    for (std::size_t t = 0; t < options.trials; ++t) {
        const TriggerArtifact trig = make_trigger(prompts[t], owner, *vocab, *model);
        const TokenSequence response =
            reply_tokens(gw.handle_generate(request_body(trig.text, options.response_tokens)));

        lm::SplitMix64 rng(lm::mix64(options.seed) ^ t);
        std::vector<double> u(response.size());
        TokenSequence replacement(response.size());
        for (std::size_t i = 0; i < response.size(); ++i) {
            u[i] = rng.uniform();
            replacement[i] = static_cast<TokenId>(rng.below(vocab->size()));
        }
        for (std::size_t r = 0; r < options.rhos.size(); ++r) {
            TokenSequence attacked = response;
            for (std::size_t i = 0; i < attacked.size(); ++i) {
                if (u[i] < options.rhos[r]) attacked[i] = replacement[i];
            }
            auto check = verifier.check_concealed(trig.ids, attacked);
            sums[r] += check.extraction ? check.extraction->bit_accuracy.value_or(0.0) : 0.0;
        }
    }
    std::vector<ErasureRow> rows;
    for (std::size_t r = 0; r < options.rhos.size(); ++r) {
        rows.push_back({options.rhos[r], options.trials, sums[r] / static_cast<double>(options.trials)});
    }
    return rows;
}

std::vector<ReplayRow> simulate_replay(const ReplayOptions& options) {
    if (options.trials < 1) throw ConfigError("trials must be >= 1");
    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    auto model = std::make_shared<const lm::ToyLm>(lm::LmConfig{options.model_seed, 4}, vocab->size());
    const std::size_t cap = std::max<std::size_t>(options.response_tokens, 512);
    auto backend = std::make_shared<const gateway::InProcessBackend>(
        std::make_shared<const gateway::GenerationService>(model, vocab, cap));
    const auto prompts = story_prompts(2 * options.trials, options.seed ^ 0x4e91);

    std::vector<ReplayRow> rows;
    for (bool bind : {false, true}) {
        OwnerSecrets owner = seeded_secrets(gateway::Mode::concealed, options.seed, "replay");
        owner.copyright = concealed::CopyrightMessage::from_string(options.copyright);
        owner.bind_evidence_key = bind;
        gateway::Gateway gw(to_settings(owner), vocab, backend, cap);
        const Verifier verifier(owner, vocab);

        ReplayRow row{bind, options.trials, 0, 0};
        for (std::size_t t = 0; t < options.trials; ++t) {
            const TriggerArtifact a = make_trigger(prompts[2 * t], owner, *vocab, *model);
            const TriggerArtifact b = make_trigger(prompts[2 * t + 1], owner, *vocab, *model);
            const TokenSequence evidence_a = reply_tokens(gw.handle_generate(request_body(a.text, options.response_tokens)));
            const TokenSequence evidence_b = reply_tokens(gw.handle_generate(request_body(b.text, options.response_tokens)));
            if (verifier.check_concealed(b.ids, evidence_a).evidence_valid) ++row.replay_passes;
            if (verifier.check_concealed(b.ids, evidence_b).evidence_valid) ++row.genuine_passes;
        }
        rows.push_back(row);
    }
    return rows;
}

void write_filter_csv(std::ostream& out, const std::vector<FilterRow>& rows) {
    out << "attack,population,n,flag_rate,threshold\n";
    for (const auto& r : rows) {
        out << "filter," << r.population << ',' << r.n << ',' << std::setprecision(6) << r.flag_rate << ','
            << r.threshold << '\n';
    }
}

void write_erasure_csv(std::ostream& out, const std::vector<ErasureRow>& rows) {
    out << "attack,rho,trials,mean_accuracy\n";
    for (const auto& r : rows) {
        out << "erasure," << r.rho << ',' << r.trials << ',' << std::setprecision(6) << r.mean_accuracy << '\n';
    }
}

void write_replay_csv(std::ostream& out, const std::vector<ReplayRow>& rows) {
    out << "attack,bind_evidence_key,trials,replay_passes,genuine_passes\n";
    for (const auto& r : rows) {
        out << "replay," << (r.bind_evidence_key ? 1 : 0) << ',' << r.trials << ',' << r.replay_passes << ','
            << r.genuine_passes << '\n';
    }
}

SoundnessReport soundness_game(std::size_t observed, std::size_t fresh, std::uint64_t seed) {
    const Vocab& vocab = Vocab::toy();
    const crypto::SecretKey key = seeded_key(seed, "soundness/mac");
    const auto prompts = story_prompts(observed + fresh, seed ^ 0x50d);
    const std::size_t d = codec::digit_count(crypto::kDigestBits, vocab.size());

    std::vector<TokenSequence> tails;
    tails.reserve(observed);
    for (std::size_t i = 0; i < observed; ++i) {
        TokenSequence ids = tok_encode(simple::trigger_gen(prompts[i], key, vocab), vocab);
        tails.emplace_back(ids.end() - static_cast<std::ptrdiff_t>(d), ids.end());
    }

    SoundnessReport report;
    report.observed = observed;
    for (std::size_t f = 0; f < fresh; ++f) {
        const TokenSequence base = tok_encode(prompts[observed + f], vocab);
        TokenSequence candidate = base;
        candidate.resize(base.size() + d);
        for (const auto& tail : tails) {
            std::copy(tail.begin(), tail.end(), candidate.begin() + static_cast<std::ptrdiff_t>(base.size()));
            ++report.attempts;
            if (simple::detect_ids(candidate, key, vocab).is_trigger) ++report.accepted;
        }
    }
    return report;
}

} // namespace bwm::forensic
