#pragma once

#include <string>
#include <vector>

#include "arsp/tensor.hpp"

namespace arsp {

// All spectrogram consumers run on 6 s of 16 kHz mono audio.
inline constexpr int kSampleRate = 16000;
inline constexpr double kClipSeconds = 6.0;

struct AudioClip {
    std::vector<double> samples; // interleaved when channels > 1, values in [-1,1]
    int sample_rate = 0;
    int channels = 1;

    size_t frames() const {
        return channels > 0 ? samples.size() / static_cast<size_t>(channels) : 0;
    }
    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0;
    }
};

// RIFF/WAV, 16-bit PCM or 32-bit float only; anything else is rejected.
AudioClip load_wav(const std::string& path);
// 16-bit PCM mono.
void save_wav(const std::string& path, const AudioClip& clip);

// Fixes the clip length to exactly target_seconds at its own sample rate.
// Short clips are tiled from the start, long clips keep their head.
AudioClip normalize_clip(const AudioClip& clip, double target_seconds = kClipSeconds);

// Averages channels to mono, then resamples with a Kaiser-windowed sinc
// kernel whose taps are renormalized per output sample (constants map to
// themselves exactly). Identity when already mono at the target rate.
AudioClip resample_mono(const AudioClip& clip, int target_rate = kSampleRate);

struct StftParams {
    int window = 400;        // samples (25 ms at 16 kHz)
    int hop = 160;           // samples (10 ms)
    int fft = 512;           // power of two, >= window
    double exponent = 0.3;   // magnitude compression

    int freq_bins() const { return fft / 2 + 1; }
    int frames_for(size_t num_samples) const {
        return static_cast<int>((num_samples - static_cast<size_t>(window)) /
                                static_cast<size_t>(hop)) + 1;
    }
};

struct Spectrogram {
    Tensor values; // [1, F, T], non-negative
    StftParams params;

    int freq_bins() const { return values.dim(1); }
    int frames() const { return values.dim(2); }
};

// Magnitude STFT with power-law compression, Hann window. The clip must
// already be normalized (6 s, 16 kHz, mono); contract_error otherwise.
Spectrogram spectrogram(const AudioClip& clip, const StftParams& params);

// Self-describing binary: magic "ARSP", u32 version, u32 F, u32 T,
// F*T little-endian f32 row-major, then window/hop/fft/exponent as four f64.
void save_spectrogram(const std::string& path, const Spectrogram& spec);
Spectrogram load_spectrogram(const std::string& path);

// In-place iterative radix-2 FFT; n must be a power of two.
void fft_complex(std::vector<double>& re, std::vector<double>& im);

} // namespace arsp
