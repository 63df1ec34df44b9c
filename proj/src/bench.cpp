#include "branchwm/bench.hpp"

#include "branchwm/crypto.hpp"
#include "branchwm/error.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <optional>

namespace bwm::crypto {

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

struct Primitive {
    std::string name;
    int key_bits;
    int output_bits;
    std::function<bool()> verify_once;
    std::vector<double> samples; // ns per op, one per batch
};

// ECDSA over the 163-bit Koblitz curve, falling back to P-256 when the
// binary-field curves are compiled out.
struct EcdsaFixture {
    PkeyPtr key;
    Bytes signature;
    int key_bits = 0;
    std::string curve;
};

std::optional<EcdsaFixture> make_ecdsa(ByteView message) {
    for (const char* curve : {"sect163k1", "prime256v1"}) {
        PkeyPtr key(EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", curve));
        if (!key) continue;
        MdCtxPtr ctx(EVP_MD_CTX_new());
        std::size_t sig_len = 0;
        if (EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha512(), nullptr, key.get()) != 1) continue;
        if (EVP_DigestSign(ctx.get(), nullptr, &sig_len, message.data(), message.size()) != 1) continue;
        Bytes sig(sig_len);
        if (EVP_DigestSign(ctx.get(), sig.data(), &sig_len, message.data(), message.size()) != 1) continue;
        sig.resize(sig_len);
        EcdsaFixture f;
        f.key_bits = EVP_PKEY_get_bits(key.get());
        f.key = std::move(key);
        f.signature = std::move(sig);
        f.curve = curve;
        return f;
    }
    return std::nullopt;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

const BenchRow* BenchReport::find(const std::string& name) const {
    for (const auto& r : rows) {
        if (r.name == name) return &r;
    }
    return nullptr;
}

BenchReport bench_verification(const BenchOptions& options) {
    if (options.iterations < 1000) throw ConfigError("benchmark needs at least 1000 iterations");
    if (options.batch == 0 || options.batch > options.iterations) throw ConfigError("invalid batch size");

    Bytes message(options.message_bytes);
    for (std::size_t i = 0; i < message.size(); ++i) message[i] = static_cast<std::uint8_t>(i * 131 + 7);

    BenchReport report;
    std::vector<Primitive> prims;

    const auto expected_digest = sha512(message);
    prims.push_back({"SHA512", 0, 512, [&] {
                         auto d = sha512(message);
                         return CRYPTO_memcmp(d.data(), expected_digest.data(), d.size()) == 0;
                     }, {}});

    const SecretKey mac_key = keygen(1024);
    const Tag expected_tag = mac(mac_key, message);
    prims.push_back({"HMAC_SHA512", 1024, 512, [&] { return veri(mac_key, message, expected_tag); }, {}});

    auto ecdsa = make_ecdsa(message);
    MdCtxPtr verify_ctx(EVP_MD_CTX_new());
    if (ecdsa) {
        if (ecdsa->curve != "sect163k1") {
            report.warnings.push_back("sect163k1 unavailable; ECDSA row uses " + ecdsa->curve);
        }
        prims.push_back({"ECDSA_SHA512", ecdsa->key_bits, 2 * ecdsa->key_bits, [&] {
                             EVP_MD_CTX_reset(verify_ctx.get());
                             if (EVP_DigestVerifyInit(verify_ctx.get(), nullptr, EVP_sha512(), nullptr,
                                                      ecdsa->key.get()) != 1) {
                                 return false;
                             }
                             return EVP_DigestVerify(verify_ctx.get(), ecdsa->signature.data(),
                                                     ecdsa->signature.size(), message.data(),
                                                     message.size()) == 1;
                         }, {}});
    } else {
        report.warnings.push_back("no ECDSA implementation available; signature row omitted");
    }

    // Warm-up, and a sanity check that every verifier accepts its own input.
    for (auto& p : prims) {
        for (int i = 0; i < 50; ++i) {
            if (!p.verify_once()) throw std::runtime_error(p.name + " verification rejected a valid input");
        }
    }

    using clock = std::chrono::steady_clock;
    const std::size_t batches = options.iterations / options.batch;
    volatile bool sink = true;
    for (std::size_t b = 0; b < batches; ++b) {
        for (auto& p : prims) {
            auto t0 = clock::now();
            for (std::size_t i = 0; i < options.batch; ++i) sink = p.verify_once() && sink;
            auto t1 = clock::now();
            double ns = std::chrono::duration<double, std::nano>(t1 - t0).count();
            p.samples.push_back(ns / static_cast<double>(options.batch));
        }
    }
    (void)sink;

    double baseline = 0;
    for (auto& p : prims) {
        BenchRow row;
        row.name = p.name;
        row.key_bits = p.key_bits;
        row.output_bits = p.output_bits;
        double n = static_cast<double>(p.samples.size());
        row.mean_ns = std::accumulate(p.samples.begin(), p.samples.end(), 0.0) / n;
        double var = 0;
        for (double s : p.samples) var += (s - row.mean_ns) * (s - row.mean_ns);
        row.stddev_ns = p.samples.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
        row.median_ns = median(p.samples);
        if (baseline == 0) baseline = row.median_ns;
        row.ratio = row.median_ns / baseline;
        report.rows.push_back(row);
    }
    return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report) {
    out << "name,key_bits,output_bits,mean_ns,stddev_ns,ratio\n";
    for (const auto& r : report.rows) {
        out << r.name << ',' << r.key_bits << ',' << r.output_bits << ',' << std::fixed
            << std::setprecision(1) << r.mean_ns << ',' << r.stddev_ns << ',' << std::setprecision(4)
            << r.ratio << '\n';
        out.unsetf(std::ios::fixed);
    }
}

} // namespace bwm::crypto
