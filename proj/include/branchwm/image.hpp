#pragma once

// Trigger images for a classification API: the MAC of the upper seven bit
// planes is written into the least significant bits of the first tag_bits
// pixels (raster order). A detected trigger makes the API answer with the
// tag's last bit instead of its prediction.

#include "branchwm/crypto.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace bwm::image {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h, fill) {}

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Bits 7..1 of every pixel, concatenated MSB first and packed into bytes.
Bytes upper_planes(const GrayImage& image);

// Throws ConfigError when width * height < tag_bits or the pixel buffer is inconsistent.
GrayImage img_trigger_gen(const GrayImage& image, const crypto::SecretKey& key, int tag_bits = crypto::kDigestBits);
bool img_detect(const GrayImage& image, const crypto::SecretKey& key, int tag_bits = crypto::kDigestBits);
// Tag carried in the LSBs (no verification).
crypto::Tag carried_tag(const GrayImage& image, int tag_bits = crypto::kDigestBits);

int img_prove(bool triggered, int label, const crypto::Tag& tag);
bool img_verify(const crypto::SecretKey& key, const GrayImage& trigger_image, int predicted_label,
                int tag_bits = crypto::kDigestBits);

// Stand-in classifier: a hash of the pixels modulo num_classes.
class StubClassifier {
public:
    explicit StubClassifier(int num_classes, std::uint64_t seed = 0) : classes_(num_classes), seed_(seed) {}
    int classify(const GrayImage& image) const;
    int num_classes() const { return classes_; }

private:
    int classes_;
    std::uint64_t seed_;
};

// Classifier API with the detect/prove branch in front.
class WatermarkedClassifier {
public:
    WatermarkedClassifier(StubClassifier inner, crypto::SecretKey key, int tag_bits = crypto::kDigestBits)
        : inner_(inner), key_(std::move(key)), tag_bits_(tag_bits) {}
    int classify(const GrayImage& image) const;

private:
    StubClassifier inner_;
    crypto::SecretKey key_;
    int tag_bits_;
};

// Binary PGM (P5), maxval 255.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

} // namespace bwm::image
