#include "branchwm/concealed.hpp"

#include "branchwm/error.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bwm::concealed {

namespace {

Bytes prefix_bytes(TokenId prefix) {
    const TokenId one[] = {prefix};
    return id_bytes(one);
}

Bytes concat(const Bytes& a, const Bytes& b) {
    Bytes out(a);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

} // namespace

CopyrightMessage CopyrightMessage::from_string(std::string_view s) {
    if (s.empty()) throw ConfigError("copyright message is empty");
    CopyrightMessage m;
    m.bits.reserve(s.size());
    for (char ch : s) {
        if (ch != '0' && ch != '1') throw ConfigError("copyright message must be a 0/1 string");
        m.bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    }
    return m;
}

std::string CopyrightMessage::to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

VocabPartition partition_vocab(std::uint64_t seed, std::size_t v, std::size_t parts) {
    if (parts < 1 || parts > v) throw ConfigError("cannot split " + std::to_string(v) + " ids into " +
                                                  std::to_string(parts) + " parts");
    TokenSequence perm(v);
    std::iota(perm.begin(), perm.end(), TokenId{0});
    lm::SplitMix64 rng(seed);
    for (std::size_t i = v - 1; i > 0; --i) {
        std::size_t k = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(perm[i], perm[k]);
    }

    VocabPartition out;
    out.blocks.resize(parts);
    out.block_of.resize(v);
    const std::size_t base = v / parts;
    const std::size_t extra = v % parts;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < parts; ++b) {
        const std::size_t len = base + (b < extra ? 1 : 0);
        out.blocks[b].assign(perm.begin() + pos, perm.begin() + pos + len);
        for (TokenId id : out.blocks[b]) out.block_of[id] = static_cast<std::uint32_t>(b);
        pos += len;
    }
    return out;
}

TokenSequence ConcealedTrigger::flatten() const {
    TokenSequence out = original_ids;
    out.push_back(free_token);
    out.insert(out.end(), bit_token_ids.begin(), bit_token_ids.end());
    return out;
}

VocabPartition trigger_split(const crypto::SecretKey& ek_in, TokenId prefix, std::size_t v) {
    const std::uint64_t seed = crypto::keyed_hash(ek_in, crypto::kDomainTriggerSplit, prefix_bytes(prefix));
    return partition_vocab(seed, v, 2);
}

ConcealedTrigger concealed_trigger_gen(std::string_view prompt, const crypto::SecretKey& key,
                                       const crypto::SecretKey& ek_in, const lm::LogitSource& model,
                                       const Vocab& vocab, int tag_bits, const lm::SamplingPolicy& policy) {
    if (prompt.empty()) throw TokenizeError("empty prompt cannot carry a trigger");
    if (model.vocab_size() != vocab.size()) throw ConfigError("model and vocabulary sizes differ");

    ConcealedTrigger trig;
    trig.original_ids = tok_encode(prompt, vocab);
    const crypto::Tag sigma = crypto::mac(key, prompt, tag_bits);

    lm::SamplingPolicy step = policy;
    TokenSequence history = trig.original_ids;
    TokenId prefix = lm::sample(lm::softmax(model.logits(history)), step);
    ++step.seed;
    trig.free_token = prefix;
    history.push_back(prefix);

    trig.bit_token_ids.reserve(tag_bits);
    for (int i = 0; i < tag_bits; ++i) {
        VocabPartition halves = trigger_split(ek_in, prefix, vocab.size());
        const auto& allowed = halves.blocks[sigma.bit(i)];
        prefix = lm::sample_constrained(lm::softmax(model.logits(history)), allowed, step);
        ++step.seed;
        history.push_back(prefix);
        trig.bit_token_ids.push_back(prefix);
    }
    return trig;
}

std::vector<int> extract_trigger_bits(std::span<const TokenId> tokens, TokenId prefix,
                                      const crypto::SecretKey& ek_in, std::size_t v) {
    std::vector<int> bits;
    bits.reserve(tokens.size());
    for (TokenId t : tokens) {
        if (t >= v) throw MalformedTrigger("token id out of range");
        bits.push_back(static_cast<int>(trigger_split(ek_in, prefix, v).block_of[t]));
        prefix = t;
    }
    return bits;
}

DetectionResult concealed_detect(std::span<const TokenId> candidate, const crypto::SecretKey& key,
                                 const crypto::SecretKey& ek_in, const Vocab& vocab, int tag_bits) {
    DetectionResult result;
    try {
        if (tag_bits <= 0 || candidate.size() < static_cast<std::size_t>(tag_bits) + 2) return result;
        auto head = candidate.first(candidate.size() - tag_bits);
        auto tail = candidate.last(tag_bits);
        const std::vector<int> bits = extract_trigger_bits(tail, head.back(), ek_in, vocab.size());
        crypto::Tag sigma = crypto::Tag::from_bits(bits);
        const std::string message = tok_decode(head.first(head.size() - 1), vocab);
        result.is_trigger = crypto::veri(key, message, sigma);
        result.extracted_tag = std::move(sigma);
    } catch (const std::exception&) {
        result.is_trigger = false;
    }
    return result;
}

void EvidenceParams::validate(std::size_t v) const {
    if (j < 1 || j > 31) throw ConfigError("j must be in [1, 31]");
    if ((std::size_t{1} << j) > v) throw ConfigError("2^j exceeds the vocabulary size");
    if (message.size() < 1 || static_cast<std::size_t>(j) > message.size()) {
        throw ConfigError("copyright message must have at least j bits");
    }
    if (!(delta >= 0)) throw ConfigError("delta must be non-negative");
}

crypto::SecretKey bound_evidence_key(const crypto::SecretKey& ek_out, const crypto::Tag& sigma) {
    Bytes key;
    Bytes link;
    for (int i = 0; i < 8; ++i) {
        std::uint64_t h = crypto::keyed_hash(ek_out, crypto::kDomainEvidenceBind, concat(link, sigma.bytes()));
        link.clear();
        for (int b = 7; b >= 0; --b) link.push_back(static_cast<std::uint8_t>(h >> (8 * b)));
        key.insert(key.end(), link.begin(), link.end());
    }
    return crypto::SecretKey(std::move(key));
}

EvidenceSchedule::EvidenceSchedule(const EvidenceParams& params, const crypto::Tag& sigma, std::size_t v)
    : params_(params),
      key_(params.bind_evidence_key ? bound_evidence_key(params.ek_out, sigma) : params.ek_out),
      v_(v) {
    params_.validate(v);
    const crypto::Tag sigma_prime = crypto::mac(key_, sigma.bytes());
    const auto& b = sigma_prime.bytes();
    const std::size_t half = b.size() / 2;
    left_.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(half));
    right_.assign(b.begin() + static_cast<std::ptrdiff_t>(half), b.end());
}

EvidenceSchedule::Slot EvidenceSchedule::slot(TokenId prefix) const {
    const Bytes pb = prefix_bytes(prefix);
    Slot s;
    const std::uint64_t seed = crypto::keyed_hash(key_, crypto::kDomainEvidenceSplit, concat(left_, pb));
    s.blocks = partition_vocab(seed, v_, std::size_t{1} << params_.j);
    s.chunk = static_cast<std::size_t>(crypto::keyed_hash(key_, crypto::kDomainEvidenceChunk, concat(right_, pb)) %
                                       params_.chunk_count());
    return s;
}

std::uint32_t EvidenceSchedule::chunk_value(std::size_t chunk) const {
    std::uint32_t value = 0;
    const auto& bits = params_.message.bits;
    for (int b = 0; b < params_.j; ++b) {
        std::size_t idx = chunk * params_.j + b;
        value = value << 1 | (idx < bits.size() ? bits[idx] : 0u);
    }
    return value;
}

void EvidenceSchedule::apply(lm::LogitVector& logits, TokenId prefix) const {
    if (params_.delta == 0) return;
    const Slot s = slot(prefix);
    for (TokenId id : s.blocks.blocks[chunk_value(s.chunk)]) logits[id] += params_.delta;
}

lm::LogitVector concealed_prove_step(bool triggered, lm::LogitVector y, const crypto::Tag& sigma, TokenId prefix,
                                     const EvidenceParams& params) {
    if (!triggered || params.delta == 0) return y;
    EvidenceSchedule(params, sigma, y.size()).apply(y, prefix);
    return y;
}

bool ExtractionReport::any_low_confidence() const {
    return std::find(low_confidence.begin(), low_confidence.end(), true) != low_confidence.end();
}

double bit_accuracy(std::span<const std::uint8_t> recovered, std::span<const std::uint8_t> reference) {
    if (reference.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (i < recovered.size() && recovered[i] == reference[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(reference.size());
}

ExtractionReport extract_copyright(std::span<const TokenId> response, TokenId first_prefix,
                                   const crypto::Tag& sigma, const EvidenceParams& params, std::size_t v,
                                   const CopyrightMessage* reference) {
    if (response.empty()) throw ConfigError("cannot extract from an empty response");
    const EvidenceSchedule schedule(params, sigma, v);
    const std::size_t chunks = params.chunk_count();
    const std::size_t values = std::size_t{1} << params.j;

    ExtractionReport report;
    report.tallies.assign(chunks, std::vector<std::size_t>(values, 0));
    TokenId prefix = first_prefix;
    for (TokenId t : response) {
        if (t < v) {
            const auto s = schedule.slot(prefix);
            ++report.tallies[s.chunk][s.blocks.block_of[t]];
        }
        prefix = t;
    }

    const std::size_t n_bits = params.message.size();
    report.recovered_bits.reserve(chunks * params.j);
    for (const auto& tally : report.tallies) {
        std::size_t best = 0;
        for (std::size_t val = 1; val < values; ++val) {
            if (tally[val] > tally[best]) best = val;
        }
        std::size_t total = 0;
        std::size_t runner_up = 0;
        bool tie = false;
        for (std::size_t val = 0; val < values; ++val) {
            total += tally[val];
            if (val != best) {
                runner_up = std::max(runner_up, tally[val]);
                if (tally[val] == tally[best]) tie = true;
            }
        }
        report.low_confidence.push_back(total == 0 || tie);
        report.confidence.push_back(total == 0 ? 0.0
                                               : static_cast<double>(tally[best] - runner_up) /
                                                     static_cast<double>(total));
        for (int b = params.j - 1; b >= 0; --b) report.recovered_bits.push_back(static_cast<std::uint8_t>(best >> b & 1));
    }
    report.recovered_bits.resize(n_bits);
    if (reference) report.bit_accuracy = bit_accuracy(report.recovered_bits, reference->bits);
    return report;
}

bool verify_concealed(const CopyrightMessage& reference, const ExtractionReport& report, double threshold) {
    if (!(threshold > 0.5 && threshold <= 1.0)) throw ConfigError("verification threshold must be in (0.5, 1]");
    return bit_accuracy(report.recovered_bits, reference.bits) >= threshold;
}

void write_trigger_file(std::ostream& out, const TriggerFile& file) {
    out << "BWM1 " << file.v << ' ' << file.tag_bits << '\n';
    for (const auto& rec : file.records) {
        for (std::size_t i = 0; i < rec.size(); ++i) out << (i ? " " : "") << rec[i];
        out << '\n';
    }
}

TriggerFile read_trigger_file(std::istream& in) {
    TriggerFile file;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty trigger file");
    {
        std::istringstream hdr(line);
        std::string magic;
        if (!(hdr >> magic >> file.v >> file.tag_bits) || magic != "BWM1") {
            throw ConfigError("bad trigger file header");
        }
    }
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream rec(line);
        TokenSequence ids;
        long long id = 0;
        while (rec >> id) {
            if (id < 0 || static_cast<std::size_t>(id) >= file.v) throw ConfigError("token id out of range");
            ids.push_back(static_cast<TokenId>(id));
        }
        if (!rec.eof()) throw ConfigError("bad token id in trigger file");
        file.records.push_back(std::move(ids));
    }
    return file;
}

} // namespace bwm::concealed
