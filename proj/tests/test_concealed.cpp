#include "branchwm/concealed.hpp"
#include "branchwm/error.hpp"
#include "branchwm/forensic.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace bwm;
using namespace bwm::concealed;

namespace {

// Independent re-derivation of the keyed vocabulary splits.
std::uint64_t oracle_seed(const Bytes& key, std::uint8_t domain, const Bytes& msg) {
    Bytes m = {domain};
    m.insert(m.end(), msg.begin(), msg.end());
    auto d = crypto::hmac_sha512(key, m);
    std::uint64_t s = 0;
    for (int i = 0; i < 8; ++i) s = s << 8 | d[i];
    return s;
}

Bytes be32(TokenId id) {
    return {static_cast<std::uint8_t>(id >> 24), static_cast<std::uint8_t>(id >> 16), static_cast<std::uint8_t>(id >> 8),
            static_cast<std::uint8_t>(id)};
}

std::uint64_t oracle_splitmix(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Block index of every id under the Fisher-Yates permutation cut into `parts` blocks.
std::vector<std::uint32_t> oracle_blocks(std::uint64_t seed, std::size_t v, std::size_t parts) {
    std::vector<TokenId> perm(v);
    std::iota(perm.begin(), perm.end(), 0);
    std::uint64_t state = seed;
    for (std::size_t i = v - 1; i > 0; --i) {
        const std::uint64_t bound = i + 1;
        const std::uint64_t threshold = (0 - bound) % bound;
        std::uint64_t r;
        do {
            r = oracle_splitmix(state);
        } while (r < threshold);
        std::swap(perm[i], perm[r % bound]);
    }
    std::vector<std::uint32_t> block_of(v);
    std::size_t pos = 0;
    for (std::size_t b = 0; b < parts; ++b) {
        const std::size_t len = v / parts + (b < v % parts ? 1 : 0);
        for (std::size_t k = 0; k < len; ++k) block_of[perm[pos + k]] = static_cast<std::uint32_t>(b);
        pos += len;
    }
    return block_of;
}

const Vocab& V() { return Vocab::toy(); }
const lm::ToyLm& model() {
    static const lm::ToyLm m({}, 256);
    return m;
}
crypto::SecretKey key(std::string_view label, std::uint64_t seed = 1) { return forensic::seeded_key(seed, label); }

const CopyrightMessage kC = CopyrightMessage::from_string("10110010011101001011000111010110");

EvidenceParams params(const CopyrightMessage& c = kC, bool bind = false) {
    return {key("ek_out"), 11.0, 4, c, bind};
}

} // namespace

TEST_CASE("partition contract") {
    auto one = partition_vocab(5, 256, 1);
    REQUIRE(one.blocks.size() == 1);
    CHECK(std::set<TokenId>(one.blocks[0].begin(), one.blocks[0].end()).size() == 256);

    auto two = partition_vocab(5, 256, 2);
    CHECK(two.blocks[0].size() == 128);
    CHECK(two.blocks[1].size() == 128);
    CHECK(partition_vocab(5, 256, 2).blocks == two.blocks);

    auto odd = partition_vocab(9, 100, 7);
    std::set<TokenId> all;
    std::size_t mn = 1000, mx = 0;
    for (const auto& b : odd.blocks) {
        all.insert(b.begin(), b.end());
        mn = std::min(mn, b.size());
        mx = std::max(mx, b.size());
    }
    CHECK(all.size() == 100);
    CHECK(mx - mn <= 1);
    CHECK(odd.block_of == oracle_blocks(9, 100, 7));

    CHECK_THROWS_AS(partition_vocab(1, 4, 5), ConfigError);
    CHECK_THROWS_AS(partition_vocab(1, 4, 0), ConfigError);

    int identical = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        identical += partition_vocab(2 * s, 256, 2).blocks == partition_vocab(2 * s + 1, 256, 2).blocks;
    }
    CHECK(identical == 0);
}

TEST_CASE("trigger layout and designated halves") {
    auto k = key("mac"), ek_in = key("ek_in");
    const std::string prompt = "Anna was filling her bird feeders.";
    auto t = concealed_trigger_gen(prompt, k, ek_in, model(), V());
    CHECK(t.original_ids == tok_encode(prompt, V()));
    CHECK(t.bit_token_ids.size() == 512);
    CHECK(t.flatten().size() == t.original_ids.size() + 1 + 512);

    const auto sigma = crypto::mac(k, prompt);
    TokenId prefix = t.free_token;
    for (int i = 0; i < 512; ++i) {
        auto halves = oracle_blocks(oracle_seed(ek_in.bytes(), 0x01, be32(prefix)), 256, 2);
        CHECK(halves[t.bit_token_ids[i]] == static_cast<std::uint32_t>(sigma.bit(i)));
        prefix = t.bit_token_ids[i];
    }
    // Greedy free token is the unconstrained argmax.
    auto p = lm::softmax(model().logits(t.original_ids));
    CHECK(t.free_token == static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin()));
    CHECK_THROWS_AS(concealed_trigger_gen("zorb", k, ek_in, model(), V()), TokenizeError);
}

TEST_CASE("concealed round trip over 200 prompts") {
    auto k = key("mac"), ek_in = key("ek_in");
    int ok = 0;
    for (const auto& p : forensic::story_prompts(200, 3)) {
        auto ids = concealed_trigger_gen(p, k, ek_in, model(), V()).flatten();
        auto r = concealed_detect(ids, k, ek_in, V());
        ok += r.is_trigger && r.extracted_tag == crypto::mac(k, p);
    }
    CHECK(ok == 200);
}

TEST_CASE("concealed detect rejects natural generations and wrong keys") {
    auto k = key("mac"), ek_in = key("ek_in");
    std::mt19937_64 rng(3);
    int accepted = 0;
    for (int i = 0; i < 10000; ++i) {
        TokenSequence h = {static_cast<TokenId>(rng() % 256)};
        auto cont = lm::generate(model(), h, 520, lm::SamplingPolicy::multinomial(rng()));
        h.insert(h.end(), cont.begin(), cont.end());
        accepted += concealed_detect(h, k, ek_in, V()).is_trigger;
        if (i % 10 == 0) CHECK(concealed_detect(h, k, ek_in, V()).extracted_tag.has_value());
    }
    CHECK(accepted == 0);

    int wrong = 0;
    auto prompts = forensic::story_prompts(1000, 4);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        // Cheaper 64-bit tags keep this trial fast; the split logic is identical.
        auto ids = concealed_trigger_gen(prompts[i], k, ek_in, model(), V(), 64).flatten();
        wrong += concealed_detect(ids, k, forensic::seeded_key(i, "other-ek_in"), V(), 64).is_trigger;
        wrong += concealed_detect(ids, forensic::seeded_key(i, "other-mac"), ek_in, V(), 64).is_trigger;
    }
    CHECK(wrong == 0);
}

TEST_CASE("concealed detect is total") {
    auto k = key("mac"), ek_in = key("ek_in");
    CHECK_FALSE(concealed_detect(TokenSequence{}, k, ek_in, V()).is_trigger);
    CHECK_FALSE(concealed_detect(TokenSequence(513, 1), k, ek_in, V()).is_trigger);
    CHECK_FALSE(concealed_detect(TokenSequence(513, 1), k, ek_in, V()).extracted_tag.has_value());
    CHECK_FALSE(concealed_detect(TokenSequence(600, 9999), k, ek_in, V()).is_trigger);
}

TEST_CASE("prove step identity branches") {
    auto y = model().logits(TokenSequence{1, 2});
    auto sigma = crypto::mac(key("mac"), "x");
    CHECK(concealed_prove_step(false, y, sigma, 5, params()) == y);
    auto p0 = params();
    p0.delta = 0;
    CHECK(concealed_prove_step(true, y, sigma, 5, p0) == y);
    auto biased = concealed_prove_step(true, y, sigma, 5, params());
    int changed = 0;
    for (std::size_t i = 0; i < y.size(); ++i) changed += biased[i] != y[i];
    CHECK(changed == 16); // one of 16 blocks of 256 ids
}

TEST_CASE("evidence bias dominates every greedy step") {
    auto sigma = crypto::mac(key("mac"), "Ben found the blue float.");
    const auto p = params();
    const EvidenceSchedule schedule(p, sigma, 256);
    TokenSequence prompt = tok_encode("Ben found the blue float.", V());
    auto out = lm::generate(model(), prompt, 256, lm::SamplingPolicy::greedy(),
                            [&](lm::LogitVector& y, TokenId prefix) { schedule.apply(y, prefix); });

    // Oracle: sigma' = HMAC(ek_out, sigma) split in halves; block and chunk from domain-separated seeds.
    auto sp = crypto::hmac_sha512(p.ek_out.bytes(), sigma.bytes());
    Bytes left(sp.begin(), sp.begin() + 32), right(sp.begin() + 32, sp.end());
    TokenId prefix = prompt.back();
    int in_block = 0;
    for (TokenId t : out) {
        Bytes l = left, r = right;
        auto pb = be32(prefix);
        l.insert(l.end(), pb.begin(), pb.end());
        r.insert(r.end(), pb.begin(), pb.end());
        auto blocks = oracle_blocks(oracle_seed(p.ek_out.bytes(), 0x01, l), 256, 16);
        std::size_t chunk = oracle_seed(p.ek_out.bytes(), 0x02, r) % 8;
        std::uint32_t value = 0;
        for (int b = 0; b < 4; ++b) value = value << 1 | kC.bits[chunk * 4 + b];
        in_block += blocks[t] == value;
        prefix = t;
    }
    CHECK(in_block == 256);
}

TEST_CASE("clean responses: every vote decodes, empty chunks are flagged") {
    auto k = key("mac");
    auto prompts = forensic::story_prompts(40, 12);
    std::size_t full = 0, partial = 0;
    std::vector<CopyrightMessage> messages = {kC, CopyrightMessage::from_string(std::string(32, '0')),
                                              CopyrightMessage::from_string("1011001"),
                                              CopyrightMessage::from_string("1111")};
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto& c = messages[i % messages.size()];
        for (int j : {1, 2, 4}) {
            if (static_cast<std::size_t>(j) > c.size()) continue;
            EvidenceParams ep{key("ek_out"), 11.0, j, c, i % 2 == 1};
            auto sigma = crypto::mac(k, prompts[i]);
            const EvidenceSchedule s(ep, sigma, 256);
            auto ids = tok_encode(prompts[i], V());
            const std::size_t n = std::max<std::size_t>(256, ep.chunk_count() * 8);
            auto out = lm::generate(model(), ids, n, lm::SamplingPolicy::greedy(),
                                    [&](lm::LogitVector& y, TokenId pf) { s.apply(y, pf); });
            auto rep = extract_copyright(out, ids.back(), sigma, ep, 256, &c);
            INFO("prompt " << i << " j " << j << " |c| " << c.size());
            bool covered = true;
            for (std::size_t p = 0; p < rep.tallies.size(); ++p) {
                std::size_t votes = 0, right = 0, value = 0;
                for (int b = 0; b < j; ++b) {
                    const std::size_t bit = p * j + b;
                    value = value << 1 | (bit < c.size() ? c.bits[bit] : 0);
                }
                for (std::size_t m = 0; m < rep.tallies[p].size(); ++m) votes += rep.tallies[p][m];
                right = rep.tallies[p][value];
                // Every vote cast lands on the embedded value; empty chunks are flagged.
                CHECK(right == votes);
                if (votes == 0) {
                    covered = false;
                    CHECK(rep.low_confidence[p]);
                }
            }
            ++(covered ? full : partial);
            if (covered) {
                CHECK(rep.recovered_bits == c.bits);
                CHECK(*rep.bit_accuracy == 1.0);
                CHECK_FALSE(rep.any_low_confidence());
                CHECK(verify_concealed(c, rep, 1.0));
            }
        }
    }
    MESSAGE("chunk coverage complete in " << full << " runs, incomplete in " << partial);
    CHECK(full > partial);
}

TEST_CASE("reference configuration recovers the message exactly") {
    // |c| = 32, j = 4, delta = 11, 256 greedy tokens.
    auto k = key("mac");
    const auto prompts = forensic::story_prompts(200, 13);
    std::size_t exact = 0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        EvidenceParams ep{key("ek_out"), 11.0, 4, kC, i % 2 == 1};
        auto sigma = crypto::mac(k, prompts[i]);
        const EvidenceSchedule s(ep, sigma, 256);
        auto ids = tok_encode(prompts[i], V());
        auto out = lm::generate(model(), ids, 256, lm::SamplingPolicy::greedy(),
                                [&](lm::LogitVector& y, TokenId pf) { s.apply(y, pf); });
        auto rep = extract_copyright(out, ids.back(), sigma, ep, 256, &kC);
        exact += rep.recovered_bits == kC.bits && !rep.any_low_confidence();
    }
    CHECK(exact == prompts.size());
}

TEST_CASE("unrelated text extracts near chance and fails verification") {
    auto sigma = crypto::mac(key("mac"), "Anna was filling her bird feeders.");
    std::mt19937_64 rng(21);
    double sum = 0;
    int verified = 0, flagged = 0;
    constexpr int trials = 200;
    for (int t = 0; t < trials; ++t) {
        TokenSequence h = {static_cast<TokenId>(rng() % 256)};
        auto out = lm::generate(model(), h, 256, lm::SamplingPolicy::multinomial(rng()));
        auto rep = extract_copyright(out, h.back(), sigma, params(), 256, &kC);
        sum += *rep.bit_accuracy;
        verified += verify_concealed(kC, rep, 0.9);
        flagged += rep.any_low_confidence();
        CHECK(*rep.bit_accuracy >= 0.2);
        CHECK(*rep.bit_accuracy <= 0.85);
    }
    CHECK(sum / trials >= 0.35);
    CHECK(sum / trials <= 0.65);
    CHECK(verified == 0);
    CHECK(flagged > 0);
}

TEST_CASE("short responses leave zero-vote chunks flagged") {
    auto sigma = crypto::mac(key("mac"), "x");
    auto rep = extract_copyright(TokenSequence{5}, 3, sigma, params(), 256, &kC);
    int empty = 0;
    for (std::size_t c = 0; c < rep.tallies.size(); ++c) {
        std::size_t total = std::accumulate(rep.tallies[c].begin(), rep.tallies[c].end(), std::size_t{0});
        if (total == 0) {
            ++empty;
            CHECK(rep.low_confidence[c]);
        }
    }
    CHECK(empty == 7);
    CHECK_THROWS_AS(extract_copyright(TokenSequence{}, 3, sigma, params(), 256), ConfigError);
}

TEST_CASE("verification threshold precondition") {
    ExtractionReport r;
    r.recovered_bits = kC.bits;
    CHECK(verify_concealed(kC, r, 0.9));
    CHECK_THROWS_AS(verify_concealed(kC, r, 0.4), ConfigError);
    CHECK_THROWS_AS(verify_concealed(kC, r, 0.5), ConfigError);
    CHECK_THROWS_AS(verify_concealed(kC, r, 1.01), ConfigError);
    r.recovered_bits[0] ^= 1;
    CHECK(verify_concealed(kC, r, 0.9));
    CHECK_FALSE(verify_concealed(kC, r, 1.0));
}

TEST_CASE("evidence parameter validation") {
    auto p = params();
    CHECK_NOTHROW(p.validate(256));
    p.j = 9;
    CHECK_THROWS_AS(p.validate(256), ConfigError);
    p = params(CopyrightMessage::from_string("101"));
    CHECK_THROWS_AS(p.validate(256), ConfigError); // j = 4 > |c|
    p = params();
    p.delta = -1;
    CHECK_THROWS_AS(p.validate(256), ConfigError);
    CHECK_THROWS_AS(CopyrightMessage::from_string("10a1"), ConfigError);
    CHECK_THROWS_AS(CopyrightMessage::from_string(""), ConfigError);
    CHECK(kC.to_string() == "10110010011101001011000111010110");
}

TEST_CASE("bound evidence key depends on sigma") {
    auto ek = key("ek_out");
    auto a = bound_evidence_key(ek, crypto::mac(key("mac"), "a"));
    auto b = bound_evidence_key(ek, crypto::mac(key("mac"), "b"));
    CHECK(a.bit_length() == 512);
    CHECK(a != b);
    CHECK(a == bound_evidence_key(ek, crypto::mac(key("mac"), "a")));
}

TEST_CASE("monotone degradation under substitution") {
    forensic::ErasureOptions o;
    o.rhos = {0.0, 0.3, 0.5, 0.7, 0.9};
    o.trials = 20;
    auto rows = forensic::simulate_erasure(o);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].mean_accuracy == 1.0);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].mean_accuracy <= rows[i - 1].mean_accuracy);
    CHECK(rows.back().mean_accuracy < 0.8);
}

TEST_CASE("trigger file round trip and errors") {
    TriggerFile f{256, 512, {{1, 2, 3}, {255, 0}}};
    std::stringstream ss;
    write_trigger_file(ss, f);
    CHECK(ss.str() == "BWM1 256 512\n1 2 3\n255 0\n");
    auto g = read_trigger_file(ss);
    CHECK(g.v == 256);
    CHECK(g.tag_bits == 512);
    CHECK(g.records == f.records);

    std::stringstream bad1("XXX 256 512\n1 2\n");
    CHECK_THROWS_AS(read_trigger_file(bad1), ConfigError);
    std::stringstream bad2("BWM1 256 512\n1 256\n");
    CHECK_THROWS_AS(read_trigger_file(bad2), ConfigError);
    std::stringstream bad3("BWM1 256 512\n1 x\n");
    CHECK_THROWS_AS(read_trigger_file(bad3), ConfigError);
}
