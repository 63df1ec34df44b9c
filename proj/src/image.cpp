#include "branchwm/image.hpp"

#include "branchwm/error.hpp"
#include "branchwm/toy_lm.hpp"

#include <cctype>
#include <fstream>

namespace bwm::image {

namespace {

void check_capacity(const GrayImage& image, int tag_bits) {
    if (image.pixels.size() != image.width * image.height) throw ConfigError("pixel buffer size mismatch");
    if (tag_bits <= 0 || image.pixels.size() < static_cast<std::size_t>(tag_bits)) {
        throw ConfigError("image too small to carry a " + std::to_string(tag_bits) + "-bit tag");
    }
}

// Skips whitespace and '#' comments in a PGM header.
bool read_header_int(std::istream& in, std::size_t& value) {
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    return static_cast<bool>(in >> value);
}

} // namespace

Bytes upper_planes(const GrayImage& image) {
    Bytes out((image.pixels.size() * 7 + 7) / 8, 0);
    std::size_t bit = 0;
    for (std::uint8_t p : image.pixels) {
        for (int b = 7; b >= 1; --b, ++bit) {
            if (p >> b & 1) out[bit / 8] |= static_cast<std::uint8_t>(0x80 >> (bit % 8));
        }
    }
    return out;
}

GrayImage img_trigger_gen(const GrayImage& image, const crypto::SecretKey& key, int tag_bits) {
    check_capacity(image, tag_bits);
    const crypto::Tag sigma = crypto::mac(key, upper_planes(image), tag_bits);
    GrayImage out = image;
    for (int i = 0; i < tag_bits; ++i) {
        out.pixels[i] = static_cast<std::uint8_t>((out.pixels[i] & 0xfe) | sigma.bit(i));
    }
    return out;
}

crypto::Tag carried_tag(const GrayImage& image, int tag_bits) {
    check_capacity(image, tag_bits);
    std::vector<int> bits(tag_bits);
    for (int i = 0; i < tag_bits; ++i) bits[i] = image.pixels[i] & 1;
    return crypto::Tag::from_bits(bits);
}

bool img_detect(const GrayImage& image, const crypto::SecretKey& key, int tag_bits) {
    if (image.pixels.size() != image.width * image.height || tag_bits <= 0 ||
        image.pixels.size() < static_cast<std::size_t>(tag_bits)) {
        return false;
    }
    return crypto::veri(key, upper_planes(image), carried_tag(image, tag_bits));
}

int img_prove(bool triggered, int label, const crypto::Tag& tag) {
    if (!triggered) return label;
    return tag.bit(tag.bit_length() - 1);
}

bool img_verify(const crypto::SecretKey& key, const GrayImage& trigger_image, int predicted_label, int tag_bits) {
    if (!img_detect(trigger_image, key, tag_bits)) return false;
    const crypto::Tag tag = carried_tag(trigger_image, tag_bits);
    return predicted_label == tag.bit(tag.bit_length() - 1);
}

int StubClassifier::classify(const GrayImage& image) const {
    std::uint64_t h = lm::mix64(seed_ ^ image.width << 32 ^ image.height);
    for (std::uint8_t p : image.pixels) h = lm::mix64(h ^ p);
    return static_cast<int>(h % static_cast<std::uint64_t>(classes_));
}

int WatermarkedClassifier::classify(const GrayImage& image) const {
    const int label = inner_.classify(image);
    const bool triggered = img_detect(image, key_, tag_bits_);
    if (!triggered) return label;
    return img_prove(true, label, carried_tag(image, tag_bits_));
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read image: " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P5") throw ConfigError("not a binary PGM: " + path.string());
    std::size_t w = 0, h = 0, maxval = 0;
    if (!read_header_int(in, w) || !read_header_int(in, h) || !read_header_int(in, maxval)) {
        throw ConfigError("truncated PGM header: " + path.string());
    }
    if (maxval != 255) throw ConfigError("only maxval 255 is supported");
    if (!std::isspace(in.get())) throw ConfigError("malformed PGM header");
    GrayImage img(w, h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw ConfigError("truncated PGM data");
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write image: " + path.string());
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

} // namespace bwm::image
