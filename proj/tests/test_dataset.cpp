#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arsp/dataset.hpp"
#include "arsp/train.hpp"
#include "arsp/util.hpp"

using namespace arsp;

TEST_CASE("same seed regenerates a bit-identical dataset") {
    auto a = generate_dataset(42, 6, Preset::tiny);
    auto b = generate_dataset(42, 6, Preset::tiny);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].latent == b[i].latent);
        CHECK(a[i].gender == b[i].gender);
        CHECK(image_hash(a[i].face) == image_hash(b[i].face));
        CHECK(fnv1a64(a[i].audio.samples) == fnv1a64(b[i].audio.samples));
    }
    auto c = generate_dataset(43, 6, Preset::tiny);
    CHECK(image_hash(a[0].face) != image_hash(c[0].face));
}

TEST_CASE("distinct latents render distinct faces") {
    auto faces = generate_faces(7, 24, Preset::tiny);
    for (size_t i = 0; i < faces.size(); ++i) {
        for (size_t j = i + 1; j < faces.size(); ++j) {
            CHECK(image_hash(faces[i].face) != image_hash(faces[j].face));
        }
    }
}

TEST_CASE("both genders appear and match the latent rule") {
    auto faces = generate_faces(11, 40, Preset::tiny);
    int male = 0, female = 0;
    for (const auto& pair : faces) {
        CHECK(pair.gender == latent_gender(pair.latent));
        (pair.gender == Gender::male ? male : female) += 1;
    }
    CHECK(male > 0);
    CHECK(female > 0);
}

TEST_CASE("voices are bounded, 6 s, 16 kHz mono") {
    auto data = generate_dataset(13, 4, Preset::tiny);
    for (const auto& pair : data) {
        CHECK(pair.audio.sample_rate == kSampleRate);
        CHECK(pair.audio.channels == 1);
        CHECK(pair.audio.samples.size() == 96000);
        for (double v : pair.audio.samples) {
            CHECK(std::fabs(v) <= 1.0);
        }
    }
}

TEST_CASE("latent-to-spectrogram map has no collisions on a 100-sample probe") {
    auto data = generate_dataset(17, 100, Preset::tiny);
    std::vector<Tensor> specs;
    specs.reserve(data.size());
    for (const auto& pair : data) {
        specs.push_back(preset_spectrogram(pair.audio, Preset::tiny).values);
    }
    double min_dist = 1e300;
    for (size_t i = 0; i < specs.size(); ++i) {
        for (size_t j = i + 1; j < specs.size(); ++j) {
            double acc = 0.0;
            for (size_t k = 0; k < specs[i].numel(); ++k) {
                const double d = specs[i].at(k) - specs[j].at(k);
                acc += d * d;
            }
            min_dist = std::min(min_dist, std::sqrt(acc));
        }
    }
    CHECK(min_dist > 1e-6);
}

TEST_CASE("faces land in pixel range at both presets") {
    auto tiny = generate_faces(19, 2, Preset::tiny);
    CHECK(tiny[0].face.pixels.shape() == std::vector<int>({3, 32, 32}));
    auto full = generate_faces(19, 1, Preset::full);
    CHECK(full[0].face.pixels.shape() == std::vector<int>({3, 224, 224}));
    for (double v : full[0].face.pixels.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}
