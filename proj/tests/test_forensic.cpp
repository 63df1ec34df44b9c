#include "branchwm/error.hpp"
#include "branchwm/forensic.hpp"
#include "branchwm/simple.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

using namespace bwm;
using namespace bwm::forensic;

TEST_CASE("story prompts are distinct, deterministic and tokenizable") {
    auto a = story_prompts(2000, 1);
    CHECK(a == story_prompts(2000, 1));
    CHECK(std::unordered_set<std::string>(a.begin(), a.end()).size() == 2000);
    CHECK(a != story_prompts(2000, 2));
    for (const auto& p : a) CHECK_NOTHROW(tok_encode(p, Vocab::toy()));
    // Prefix stability: a longer draw extends a shorter one.
    auto b = story_prompts(100, 1);
    CHECK(std::equal(b.begin(), b.end(), a.begin()));
}

TEST_CASE("shipped corpus equals the generator output") {
    auto shipped = load_prompts(BWM_DATA_DIR "/prompts.txt");
    CHECK(shipped.size() == 500);
    CHECK(shipped == story_prompts(500, kCorpusSeed));
    CHECK_THROWS_AS(load_prompts("/nonexistent/prompts.txt"), ConfigError);
}

TEST_CASE("seeded keys") {
    CHECK(seeded_key(1, "a") == seeded_key(1, "a"));
    CHECK(seeded_key(1, "a") != seeded_key(2, "a"));
    CHECK(seeded_key(1, "a") != seeded_key(1, "b"));
    CHECK(seeded_key(1, "a", 256).bit_length() == 256);
    CHECK(seeded_key(1, "a").bit_length() == 1024);
}

TEST_CASE("artifact files round trip") {
    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    const lm::ToyLm model({}, 256);
    auto dir = std::filesystem::temp_directory_path() / "bwm_artifacts";
    std::filesystem::create_directories(dir);

    OwnerSecrets s{.mode = gateway::Mode::simple, .mac_key = seeded_key(1, "mac")};
    auto simple_art = make_trigger("Anna was filling her bird feeders.", s, *vocab, model);
    write_artifact(dir / "s.txt", simple_art, *vocab);
    auto back = read_artifact(dir / "s.txt", *vocab);
    CHECK(back.mode == gateway::Mode::simple);
    CHECK(back.text == simple_art.text);
    CHECK(tok_encode(back.text, *vocab).size() == 6 + 64);

    s.mode = gateway::Mode::concealed;
    s.ek_in = seeded_key(1, "ek_in");
    s.ek_out = seeded_key(1, "ek_out");
    s.copyright = concealed::CopyrightMessage::from_string("1011");
    auto conc = make_trigger("Anna was filling her bird feeders.", s, *vocab, model);
    write_artifact(dir / "c.bwm", conc, *vocab);
    auto cback = read_artifact(dir / "c.bwm", *vocab);
    CHECK(cback.mode == gateway::Mode::concealed);
    CHECK(cback.ids == conc.ids);
    CHECK(concealed::concealed_detect(cback.ids, s.mac_key, *s.ek_in, *vocab).is_trigger);

    CHECK_THROWS_AS(read_artifact(dir / "missing", *vocab), ConfigError);
    CHECK_THROWS_AS(read_artifact(dir / "c.bwm", Vocab::numbered(300)), ConfigError);
    s.mode = gateway::Mode::bare;
    CHECK_THROWS_AS(make_trigger("Anna", s, *vocab, model), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("verifier decisions") {
    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    OwnerSecrets s{.mode = gateway::Mode::simple, .mac_key = seeded_key(1, "mac")};
    Verifier v(s, vocab);
    auto trig = simple::trigger_gen("Ben found the blue float.", s.mac_key, *vocab);
    CHECK(v.check_simple(trig, "I am model B from owner A!").evidence_valid);
    CHECK(v.check_simple(trig, "I am model B from owner A!").trigger_valid);
    CHECK_FALSE(v.check_simple(trig, "Ben").evidence_valid);
    CHECK_FALSE(v.check_simple("Ben found the blue float.", "I am model B from owner A!").evidence_valid);

    OwnerSecrets c = s;
    c.mode = gateway::Mode::concealed;
    CHECK_THROWS_AS(Verifier(c, vocab), ConfigError);
    c.ek_in = seeded_key(1, "ek_in");
    c.ek_out = seeded_key(1, "ek_out");
    c.copyright = concealed::CopyrightMessage::from_string("10110010");
    c.threshold = 0.4;
    CHECK_THROWS_AS(Verifier(c, vocab), ConfigError);
    c.threshold = 0.9;
    Verifier cv(c, vocab);
    const TokenSequence junk(600, 3);
    CHECK_FALSE(cv.check_concealed(junk, TokenSequence{1, 2}).trigger_valid);
}

TEST_CASE("owner secrets follow the configuration") {
    auto dir = std::filesystem::temp_directory_path() / "bwm_owner_cfg";
    std::filesystem::create_directories(dir);
    crypto::write_key_file(dir / "mac.key", seeded_key(5, "mac"));
    crypto::write_key_file(dir / "ek_in.key", seeded_key(5, "ek_in"));
    crypto::write_key_file(dir / "ek_out.key", seeded_key(5, "ek_out"));
    std::ofstream(dir / "owner.conf") << "mode = concealed\nmac_key = mac.key\nek_in = ek_in.key\n"
                                         "ek_out = ek_out.key\ncopyright = 1011\nj = 2\nthreshold = 0.75\n";
    auto cfg = gateway::GatewayConfig::load(dir / "owner.conf", false);
    auto s = OwnerSecrets::from_config(cfg);
    CHECK(s.mode == gateway::Mode::concealed);
    CHECK(s.threshold == 0.75);
    CHECK(s.j == 2);
    CHECK(s.mac_key.bytes() == seeded_key(5, "mac").bytes());
    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    CHECK_NOTHROW(Verifier(s, vocab));
    s.threshold = 0.4;
    CHECK_THROWS_AS(Verifier(s, vocab), ConfigError);
    cfg.mode = gateway::Mode::bare;
    CHECK_THROWS_AS(OwnerSecrets::from_config(cfg), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("triad passes in both modes and is deterministic") {
    for (auto mode : {gateway::Mode::simple, gateway::Mode::concealed}) {
        TriadOptions o;
        o.mode = mode;
        o.prompts = story_prompts(25, 3);
        auto r = run_triad(o);
        CHECK(r.n == 25);
        CHECK(r.passed());
        auto r2 = run_triad(o);
        CHECK(r2.deployed_valid == r.deployed_valid);
        CHECK(r2.bare_invalid == r.bare_invalid);
        CHECK(r2.wrong_key_invalid == r.wrong_key_invalid);
    }
    TriadOptions empty;
    CHECK_THROWS_AS(run_triad(empty), ConfigError);

    std::ostringstream csv;
    write_triad_csv(csv, {TriadReport{gateway::Mode::simple, 2, 2, 2, 2, 0.1}});
    CHECK(csv.str() == "mode,n,deployed_valid,bare_invalid,wrong_key_invalid,passed\nsimple,2,2,2,2,1\n");
}

TEST_CASE("probe reports network failures as errors") {
    auto vocab = std::make_shared<const Vocab>(Vocab::toy());
    OwnerSecrets s{.mode = gateway::Mode::simple, .mac_key = seeded_key(1, "mac")};
    Verifier v(s, vocab);
    TriggerArtifact a{gateway::Mode::simple, simple::trigger_gen("Anna", s.mac_key, *vocab), {}};
    Prober p("http://127.0.0.1:1");
    auto r = p.probe(a, v);
    CHECK(r.verdict == Verdict::error);
    CHECK_FALSE(r.detail.empty());
    CHECK(to_string(Verdict::valid_evidence) == "valid-evidence");
}

TEST_CASE("filter attack separates simple triggers from natural text") {
    FilterOptions o;
    o.trials = 100;
    auto rows = simulate_filter(o);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].population == "natural");
    CHECK(rows[1].population == "simple");
    CHECK(rows[1].flag_rate - rows[0].flag_rate > 0.5);
    CHECK(rows[0].flag_rate <= 0.15);
    o.false_positive_rate = 0;
    CHECK_THROWS_AS(simulate_filter(o), ConfigError);
}

TEST_CASE("erasure and replay simulations") {
    ErasureOptions e;
    e.trials = 10;
    auto rows = simulate_erasure(e);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].mean_accuracy == 1.0);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].mean_accuracy <= rows[i - 1].mean_accuracy);
    e.rhos = {1.5};
    CHECK_THROWS_AS(simulate_erasure(e), ConfigError);

    ReplayOptions r;
    r.trials = 10;
    auto rr = simulate_replay(r);
    REQUIRE(rr.size() == 2);
    CHECK(rr[1].bind_evidence_key);
    CHECK(rr[1].replay_passes == 0);
    CHECK(rr[0].genuine_passes == 10);
    CHECK(rr[1].genuine_passes == 10);

    std::ostringstream csv;
    write_replay_csv(csv, rr);
    CHECK(csv.str().rfind("attack,bind_evidence_key,trials,replay_passes,genuine_passes\n", 0) == 0);
}
