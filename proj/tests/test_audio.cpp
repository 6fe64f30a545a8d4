#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "arsp/audio.hpp"
#include "arsp/errors.hpp"
#include "arsp/presets.hpp"
#include "arsp/util.hpp"

using namespace arsp;

namespace {

AudioClip sine(double freq, double seconds, int rate, double amp = 0.5) {
    AudioClip clip;
    clip.sample_rate = rate;
    clip.channels = 1;
    const size_t n = static_cast<size_t>(std::llround(seconds * rate));
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        clip.samples[i] = amp * std::sin(2.0 * 3.14159265358979323846 * freq * i / rate);
    }
    return clip;
}

double rms(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
}

} // namespace

TEST_CASE("normalize_clip keeps 6 s clips untouched") {
    AudioClip clip = sine(440.0, 6.0, 16000);
    AudioClip out = normalize_clip(clip);
    REQUIRE(out.samples.size() == clip.samples.size());
    for (size_t i = 0; i < out.samples.size(); ++i) {
        CHECK(out.samples[i] == clip.samples[i]);
    }
}

TEST_CASE("normalize_clip tiles short clips from the start") {
    AudioClip clip = sine(440.0, 4.0, 16000);
    AudioClip out = normalize_clip(clip);
    REQUIRE(out.samples.size() == 96000);
    // head is bit-equal to the input
    for (size_t i = 0; i < clip.samples.size(); ++i) {
        CHECK(out.samples[i] == clip.samples[i]);
    }
    // tail repeats the first two seconds
    for (size_t i = 0; i < 32000; ++i) {
        CHECK(out.samples[64000 + i] == clip.samples[i]);
    }
}

TEST_CASE("normalize_clip truncates long clips to the head") {
    AudioClip clip = sine(220.0, 10.0, 16000);
    AudioClip out = normalize_clip(clip);
    REQUIRE(out.samples.size() == 96000);
    for (size_t i = 0; i < out.samples.size(); ++i) {
        CHECK(out.samples[i] == clip.samples[i]);
    }
}

TEST_CASE("normalize_clip is idempotent and rejects empty input") {
    AudioClip clip = sine(100.0, 2.5, 8000);
    AudioClip once = normalize_clip(clip);
    AudioClip twice = normalize_clip(once);
    REQUIRE(once.samples.size() == twice.samples.size());
    for (size_t i = 0; i < once.samples.size(); ++i) {
        CHECK(once.samples[i] == twice.samples[i]);
    }
    AudioClip empty;
    empty.sample_rate = 16000;
    CHECK_THROWS_AS(normalize_clip(empty), input_error);
}

TEST_CASE("resample_mono is the identity at the target rate") {
    AudioClip clip = sine(440.0, 1.0, 16000);
    AudioClip out = resample_mono(clip, 16000);
    REQUIRE(out.samples.size() == clip.samples.size());
    for (size_t i = 0; i < out.samples.size(); ++i) {
        CHECK(out.samples[i] == clip.samples[i]);
    }
}

TEST_CASE("resample_mono preserves constants exactly") {
    AudioClip clip;
    clip.sample_rate = 44100;
    clip.channels = 1;
    clip.samples.assign(44100, 0.25);
    AudioClip out = resample_mono(clip, 16000);
    for (size_t i = 0; i < out.samples.size(); ++i) {
        CHECK(out.samples[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("resample_mono keeps a 1 kHz sine within 1% RMS") {
    AudioClip in48 = sine(1000.0, 2.0, 48000);
    AudioClip out = resample_mono(in48, 16000);
    REQUIRE(out.sample_rate == 16000);
    REQUIRE(out.samples.size() == 32000);
    const double r_in = rms(in48.samples);
    const double r_out = rms(out.samples);
    CHECK(std::fabs(r_out - r_in) / r_in < 0.01);

    // upsampling path too
    AudioClip in8 = sine(1000.0, 2.0, 8000);
    AudioClip up = resample_mono(in8, 16000);
    CHECK(std::fabs(rms(up.samples) - rms(in8.samples)) / rms(in8.samples) < 0.01);
}

TEST_CASE("resample_mono averages channels before resampling") {
    AudioClip stereo;
    stereo.sample_rate = 16000;
    stereo.channels = 2;
    stereo.samples.resize(32000);
    for (size_t f = 0; f < 16000; ++f) {
        stereo.samples[2 * f] = 0.5;
        stereo.samples[2 * f + 1] = -0.1;
    }
    AudioClip out = resample_mono(stereo, 16000);
    REQUIRE(out.channels == 1);
    REQUIRE(out.samples.size() == 16000);
    CHECK(out.samples[100] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("spectrogram default grid is 257x598") {
    AudioClip clip = sine(1000.0, 6.0, 16000);
    Spectrogram spec = spectrogram(clip, preset_config(Preset::full).stft);
    CHECK(spec.freq_bins() == 257);
    CHECK(spec.frames() == 598);
    CHECK(spec.values.shape() == std::vector<int>({1, 257, 598}));

    // 1 kHz lands on bin 32 = 1000 * 512 / 16000 in every frame
    const auto v = spec.values.data();
    for (int t = 0; t < spec.frames(); t += 97) {
        int best = 0;
        double best_v = -1.0;
        for (int f = 0; f < spec.freq_bins(); ++f) {
            const double x = v[static_cast<size_t>(f) * 598 + t];
            if (x > best_v) {
                best_v = x;
                best = f;
            }
        }
        CHECK(best == 32);
    }
}

TEST_CASE("tiny spectrogram grid matches the tiny encoder input") {
    AudioClip clip = sine(300.0, 6.0, 16000);
    Spectrogram spec = spectrogram(clip, preset_config(Preset::tiny).stft);
    CHECK(spec.freq_bins() == 33);
    CHECK(spec.frames() == 74);
}

TEST_CASE("all-zero audio maps to an all-zero spectrogram") {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.channels = 1;
    clip.samples.assign(96000, 0.0);
    Spectrogram spec = spectrogram(clip, preset_config(Preset::full).stft);
    for (double v : spec.values.data()) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("spectrogram rejects unnormalized input") {
    AudioClip clip = sine(440.0, 3.0, 16000);
    CHECK_THROWS_AS(spectrogram(clip, preset_config(Preset::full).stft), contract_error);
    AudioClip wrong_rate = sine(440.0, 6.0, 8000);
    CHECK_THROWS_AS(spectrogram(wrong_rate, preset_config(Preset::full).stft), contract_error);
}

TEST_CASE("spectrogram energy is monotone in input gain") {
    Rng rng(99);
    AudioClip noise;
    noise.sample_rate = 16000;
    noise.channels = 1;
    noise.samples.resize(96000);
    for (double& v : noise.samples) {
        v = rng.uniform(-0.2, 0.2);
    }
    auto energy = [&](double gain) {
        AudioClip scaled = noise;
        for (double& v : scaled.samples) {
            v *= gain;
        }
        Spectrogram spec = spectrogram(scaled, preset_config(Preset::full).stft);
        double acc = 0.0;
        for (double v : spec.values.data()) {
            const double mag = std::pow(v, 1.0 / spec.params.exponent);
            acc += mag * mag;
        }
        return acc;
    };
    const double e1 = energy(0.5), e2 = energy(1.0), e3 = energy(2.0);
    CHECK(e1 < e2);
    CHECK(e2 < e3);
}

TEST_CASE("wav round trip and format rejection") {
    const std::string path = "test_audio_tmp.wav";
    AudioClip clip = sine(500.0, 0.5, 16000, 0.3);
    save_wav(path, clip);
    AudioClip loaded = load_wav(path);
    REQUIRE(loaded.sample_rate == 16000);
    REQUIRE(loaded.channels == 1);
    REQUIRE(loaded.samples.size() == clip.samples.size());
    double max_diff = 0.0;
    for (size_t i = 0; i < clip.samples.size(); ++i) {
        max_diff = std::max(max_diff, std::fabs(clip.samples[i] - loaded.samples[i]));
    }
    CHECK(max_diff < 1.0 / 32000.0); // 16-bit quantization bound
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_wav("does_not_exist.wav"), io_error);
}

TEST_CASE("spectrogram binary round trip") {
    const std::string path = "test_spec_tmp.arsp";
    AudioClip clip = sine(750.0, 6.0, 16000);
    Spectrogram spec = spectrogram(clip, preset_config(Preset::tiny).stft);
    save_spectrogram(path, spec);
    Spectrogram loaded = load_spectrogram(path);
    CHECK(loaded.freq_bins() == spec.freq_bins());
    CHECK(loaded.frames() == spec.frames());
    CHECK(loaded.params.window == spec.params.window);
    CHECK(loaded.params.hop == spec.params.hop);
    CHECK(loaded.params.fft == spec.params.fft);
    CHECK(loaded.params.exponent == spec.params.exponent);
    for (size_t i = 0; i < spec.values.numel(); ++i) {
        CHECK(loaded.values.at(i) ==
              static_cast<double>(static_cast<float>(spec.values.at(i))));
    }
    std::remove(path.c_str());
}
