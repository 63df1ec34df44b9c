// Acceptance suite: one PASS/FAIL line per criterion. Exit status 0 iff all pass.

#include "branchwm/bench.hpp"
#include "branchwm/forensic.hpp"
#include "branchwm/image.hpp"
#include "branchwm/simple.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <latch>
#include <random>
#include <sstream>
#include <thread>

using namespace bwm;
using nlohmann::json;

namespace {

// Pinned tolerances and baselines.
constexpr std::size_t kTriadPrompts = 500;
constexpr double kTriadSeconds = 60.0;
constexpr std::size_t kLosslessPrompts = 10000;
constexpr std::size_t kSoundnessObserved = 10000;
constexpr std::size_t kSoundnessFresh = 100;
constexpr std::size_t kConcealedPrompts = 200;
constexpr std::size_t kEvidenceTrials = 50;
// Mean bit accuracy at rho = 0.1 recorded from the first full run (seed 1, 50 trials).
constexpr double kErasureBaseline = 1.0;
constexpr double kErasureTolerance = 0.02;
constexpr double kMacRatioLow = 1.0;
constexpr double kMacRatioHigh = 3.0;
constexpr std::size_t kImageTrials = 100;
constexpr std::size_t kImageRandom = 10000;
constexpr std::size_t kReplayTrials = 100;
constexpr int kRacers = 100;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void criterion1() {
    const auto prompts = forensic::load_prompts(BWM_DATA_DIR "/prompts.txt");
    std::ostringstream d;
    bool pass = prompts.size() == kTriadPrompts;
    for (auto mode : {gateway::Mode::simple, gateway::Mode::concealed}) {
        forensic::TriadOptions o;
        o.mode = mode;
        o.prompts = prompts;
        const auto r = forensic::run_triad(o);
        pass = pass && r.passed() && r.n == kTriadPrompts && r.seconds < kTriadSeconds;
        d << gateway::to_string(mode) << " 1A " << r.deployed_valid << "/" << r.n << " 1B " << r.bare_invalid << "/"
          << r.n << " 1c " << r.wrong_key_invalid << "/" << r.n << " in " << r.seconds << " s; ";
    }
    report(1, pass, "correctness triad: " + d.str());
}

void criterion2() {
    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    auto model = std::make_shared<const lm::ToyLm>(lm::LmConfig{}, vocab->size());
    auto bare = std::make_shared<const gateway::GenerationService>(model, vocab, 512);
    auto backend = std::make_shared<const gateway::InProcessBackend>(bare);
    auto bare_srv = gateway::serve_bare(bare, "127.0.0.1:0");

    const auto prompts = forensic::story_prompts(kLosslessPrompts, 0x1055);
    std::ostringstream d;
    bool pass = true;
    for (auto mode : {gateway::Mode::simple, gateway::Mode::concealed}) {
        gateway::WatermarkSettings s;
        s.mode = mode;
        s.mac_key = crypto::keygen(1024);
        s.ek_in = crypto::keygen(1024);
        s.ek_out = crypto::keygen(1024);
        s.copyright = concealed::CopyrightMessage::from_string("10110010011101001011000111010110");
        auto gw = std::make_shared<gateway::Gateway>(s, vocab, backend, 512);
        auto gw_srv = gateway::serve_gateway(gw, "127.0.0.1:0");
        httplib::Client cg(gw_srv->url()), cb(bare_srv->url());
        cg.set_tcp_nodelay(true);
        cb.set_tcp_nodelay(true);
        std::size_t identical = 0;
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            const std::string body = json{{"prompt", prompts[i]}, {"max_tokens", 1 + i % 32}}.dump();
            auto rg = cg.Post("/v1/generate", body, "application/json");
            auto rb = cb.Post("/v1/generate", body, "application/json");
            if (rg && rb && rg->status == rb->status && rg->body == rb->body &&
                rg->get_header_value("Content-Type") == rb->get_header_value("Content-Type")) {
                ++identical;
            }
        }
        const auto st = gw->stats();
        pass = pass && identical == prompts.size() && st.forensic == 0;
        d << gateway::to_string(mode) << " " << identical << "/" << prompts.size() << " identical, "
          << st.forensic << " forensic; ";
    }
    report(2, pass, "losslessness: " + d.str());
}

void criterion3() {
    const auto r = forensic::soundness_game(kSoundnessObserved, kSoundnessFresh, 3);
    std::ostringstream d;
    d << "soundness game: " << r.accepted << " accepted of " << r.attempts << " forgery attempts (q = " << r.observed
      << ")";
    report(3, r.accepted == 0 && r.attempts == kSoundnessObserved * kSoundnessFresh, d.str());
}

void criterion4() {
    const Vocab& vocab = Vocab::toy();
    const lm::ToyLm model({}, vocab.size());
    const auto k = crypto::keygen(1024), ek_in = crypto::keygen(1024);
    std::size_t ok = 0;
    const auto prompts = forensic::story_prompts(kConcealedPrompts, 4);
    for (const auto& p : prompts) {
        auto ids = concealed::concealed_trigger_gen(p, k, ek_in, model, vocab, 512).flatten();
        auto r = concealed::concealed_detect(ids, k, ek_in, vocab, 512);
        ok += r.is_trigger && r.extracted_tag == crypto::mac(k, p);
    }
    report(4, ok == kConcealedPrompts,
           "concealed round trip: " + std::to_string(ok) + "/" + std::to_string(prompts.size()) +
               " detected with exact tag recovery");
}

void criterion5() {
    forensic::ErasureOptions o;
    o.rhos = {0.0, 0.1};
    o.trials = kEvidenceTrials;
    o.response_tokens = 256;
    o.j = 4;
    o.delta = 11.0;
    const auto rows = forensic::simulate_erasure(o);
    const double clean = rows[0].mean_accuracy;
    const double noisy = rows[1].mean_accuracy;
    std::ostringstream d;
    d << "multi-bit evidence: clean accuracy " << clean << " (exact 1.0 required), rho=0.1 mean " << noisy
      << " vs baseline " << kErasureBaseline << " +/- " << kErasureTolerance;
    report(5, clean == 1.0 && std::abs(noisy - kErasureBaseline) <= kErasureTolerance, d.str());
}

void criterion6() {
    const auto r = crypto::bench_verification({});
    const auto* hash = r.find("SHA512");
    const auto* mac = r.find("HMAC_SHA512");
    const auto* sig = r.find("ECDSA_SHA512");
    std::ostringstream d;
    if (!hash || !mac || !sig) {
        report(6, false, "benchmark: missing row");
        return;
    }
    const bool ordering = sig->ratio > mac->ratio;
    const bool in_band = mac->ratio >= kMacRatioLow && mac->ratio <= kMacRatioHigh;
    d << "benchmark: MAC/hash " << mac->ratio << ", signature/hash " << sig->ratio
      << (in_band ? "" : " (warning: MAC ratio outside [1.0, 3.0])");
    report(6, ordering, d.str());
}

void criterion7() {
    using namespace image;
    std::mt19937_64 rng(7);
    const auto k = crypto::keygen(1024);
    auto random_image = [&] {
        GrayImage img(64, 64);
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng());
        return img;
    };
    std::size_t round_trip = 0, flip_rejected = 0, false_pos = 0;
    for (std::size_t i = 0; i < kImageTrials; ++i) {
        auto trig = img_trigger_gen(random_image(), k);
        round_trip += img_detect(trig, k);
        trig.pixels[rng() % trig.pixels.size()] ^= static_cast<std::uint8_t>(1u << (1 + rng() % 7));
        flip_rejected += !img_detect(trig, k);
    }
    for (std::size_t i = 0; i < kImageRandom; ++i) false_pos += img_detect(random_image(), k);
    std::ostringstream d;
    d << "image branch: round trip " << round_trip << "/" << kImageTrials << ", bit flip rejected " << flip_rejected
      << "/" << kImageTrials << ", false detections " << false_pos << "/" << kImageRandom;
    report(7, round_trip == kImageTrials && flip_rejected == kImageTrials && false_pos == 0, d.str());
}

void criterion8() {
    forensic::ReplayOptions o;
    o.trials = kReplayTrials;
    const auto rows = forensic::simulate_replay(o);
    const auto& bound = rows[1];

    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    auto model = std::make_shared<const lm::ToyLm>(lm::LmConfig{}, vocab->size());
    auto backend = std::make_shared<const gateway::InProcessBackend>(
        std::make_shared<const gateway::GenerationService>(model, vocab, 512));
    gateway::WatermarkSettings s;
    s.mode = gateway::Mode::simple;
    s.mac_key = crypto::keygen(1024);
    s.one_time_registry = true;
    gateway::Gateway gw(s, vocab, backend, 512);
    const std::string body =
        json{{"prompt", simple::trigger_gen("Anna was filling her bird feeders.", *s.mac_key, *vocab)},
             {"max_tokens", 16}}
            .dump();
    std::atomic<int> forensic_replies{0};
    std::latch start(kRacers);
    std::vector<std::thread> racers;
    for (int i = 0; i < kRacers; ++i) {
        racers.emplace_back([&] {
            start.arrive_and_wait();
            auto r = gw.handle_generate(body);
            if (json::parse(r.body)["text"] == s.proclamation) ++forensic_replies;
        });
    }
    for (auto& t : racers) t.join();

    std::ostringstream d;
    d << "replay resistance: bound-key transplant passes " << bound.replay_passes << "/" << bound.trials
      << " (genuine " << bound.genuine_passes << "/" << bound.trials << "), unbound transplant passes "
      << rows[0].replay_passes << "/" << rows[0].trials << "; registry admitted " << forensic_replies << "/" << kRacers
      << " concurrent duplicates";
    report(8,
           bound.bind_evidence_key && bound.replay_passes == 0 && bound.trials == kReplayTrials &&
               forensic_replies == 1,
           d.str());
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    for (auto* c : {criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8}) {
        try {
            c();
        } catch (const std::exception& e) {
            std::cout << "FAIL criterion: exception " << e.what() << std::endl;
            ++failures;
        }
    }
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << " in " << seconds_since(t0)
              << " s" << std::endl;
    return failures == 0 ? 0 : 1;
}
