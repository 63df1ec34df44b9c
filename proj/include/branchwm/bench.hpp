#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace bwm::crypto {

struct BenchRow {
    std::string name;
    int key_bits = 0;    // 0 for the unkeyed hash baseline
    int output_bits = 0;
    double mean_ns = 0;   // per verification
    double stddev_ns = 0; // across timing batches
    double median_ns = 0;
    double ratio = 0;     // median_ns / baseline median_ns
};

struct BenchReport {
    std::vector<BenchRow> rows; // baseline first
    std::vector<std::string> warnings;

    const BenchRow* find(const std::string& name) const;
};

struct BenchOptions {
    std::size_t iterations = 2000; // >= 1000
    std::size_t message_bytes = 4096;
    std::size_t batch = 100;
};

// Times verification of SHA512, HMAC_SHA512 and ECDSA_SHA512 over the same
// message. Batches are interleaved across primitives so drift hits all rows.
BenchReport bench_verification(const BenchOptions& options = {});

// name,key_bits,output_bits,mean_ns,stddev_ns,ratio
void write_bench_csv(std::ostream& out, const BenchReport& report);

} // namespace bwm::crypto
