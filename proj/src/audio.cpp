#include "arsp/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "arsp/errors.hpp"

namespace arsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename T>
T read_le(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

template <typename T>
void write_le(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

double bessel_i0(double x) {
    // Power series; converges fast for the argument range a Kaiser window uses.
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-18 * sum) {
            break;
        }
    }
    return sum;
}

double sinc(double x) {
    if (x == 0.0) {
        return 1.0;
    }
    const double px = kPi * x;
    return std::sin(px) / px;
}

} // namespace

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------

AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open wav file: " + path);
    }
    char tag[4];
    in.read(tag, 4);
    if (std::memcmp(tag, "RIFF", 4) != 0) {
        throw io_error("not a RIFF file: " + path);
    }
    read_le<uint32_t>(in); // riff size
    in.read(tag, 4);
    if (std::memcmp(tag, "WAVE", 4) != 0) {
        throw io_error("not a WAVE file: " + path);
    }

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    std::vector<char> payload;
    bool have_fmt = false, have_data = false;
    while (in.read(tag, 4)) {
        uint32_t size = read_le<uint32_t>(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_le<uint16_t>(in);
            channels = read_le<uint16_t>(in);
            rate = read_le<uint32_t>(in);
            read_le<uint32_t>(in); // byte rate
            read_le<uint16_t>(in); // block align
            bits = read_le<uint16_t>(in);
            if (size > 16) {
                in.seekg(size - 16, std::ios::cur);
            }
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            payload.resize(size);
            in.read(payload.data(), size);
            have_data = true;
        } else {
            in.seekg(size + (size & 1u), std::ios::cur);
        }
        if (have_fmt && have_data) {
            break;
        }
    }
    if (!have_fmt || !have_data) {
        throw io_error("wav file missing fmt or data chunk: " + path);
    }
    if (channels == 0 || rate == 0) {
        throw io_error("wav file has zero channels or sample rate: " + path);
    }

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.channels = static_cast<int>(channels);
    if (format == 1 && bits == 16) {
        const size_t n = payload.size() / 2;
        clip.samples.resize(n);
        const int16_t* p = reinterpret_cast<const int16_t*>(payload.data());
        for (size_t i = 0; i < n; ++i) {
            clip.samples[i] = static_cast<double>(p[i]) / 32768.0;
        }
    } else if (format == 3 && bits == 32) {
        const size_t n = payload.size() / 4;
        clip.samples.resize(n);
        const float* p = reinterpret_cast<const float*>(payload.data());
        for (size_t i = 0; i < n; ++i) {
            clip.samples[i] = std::clamp(static_cast<double>(p[i]), -1.0, 1.0);
        }
    } else {
        throw io_error("unsupported wav encoding (want 16-bit PCM or 32-bit float): " + path);
    }
    return clip;
}

void save_wav(const std::string& path, const AudioClip& clip) {
    if (clip.channels != 1) {
        throw contract_error("save_wav writes mono clips only");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot open for writing: " + path);
    }
    const uint32_t n = static_cast<uint32_t>(clip.samples.size());
    const uint32_t data_bytes = n * 2;
    out.write("RIFF", 4);
    write_le<uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<uint32_t>(out, 16);
    write_le<uint16_t>(out, 1); // PCM
    write_le<uint16_t>(out, 1); // mono
    write_le<uint32_t>(out, static_cast<uint32_t>(clip.sample_rate));
    write_le<uint32_t>(out, static_cast<uint32_t>(clip.sample_rate) * 2);
    write_le<uint16_t>(out, 2);
    write_le<uint16_t>(out, 16);
    out.write("data", 4);
    write_le<uint32_t>(out, data_bytes);
    for (double v : clip.samples) {
        const double c = std::clamp(v, -1.0, 1.0);
        const int32_t q = static_cast<int32_t>(std::lrint(c * 32767.0));
        write_le<int16_t>(out, static_cast<int16_t>(q));
    }
    if (!out) {
        throw io_error("write failed: " + path);
    }
}

// ---------------------------------------------------------------------------
// normalize / resample
// ---------------------------------------------------------------------------

AudioClip normalize_clip(const AudioClip& clip, double target_seconds) {
    if (clip.samples.empty()) {
        throw input_error("normalize_clip: empty audio");
    }
    if (clip.sample_rate <= 0) {
        throw input_error("normalize_clip: invalid sample rate");
    }
    const size_t ch = static_cast<size_t>(clip.channels);
    const size_t frames = clip.frames();
    const size_t target =
        static_cast<size_t>(std::llround(target_seconds * clip.sample_rate));

    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.channels = clip.channels;
    out.samples.resize(target * ch);
    for (size_t f = 0; f < target; ++f) {
        const size_t src = f % frames; // tiles short clips, truncates long ones
        for (size_t c = 0; c < ch; ++c) {
            out.samples[f * ch + c] = clip.samples[src * ch + c];
        }
    }
    return out;
}

AudioClip resample_mono(const AudioClip& clip, int target_rate) {
    if (clip.samples.empty()) {
        throw input_error("resample_mono: empty audio");
    }
    if (clip.sample_rate <= 0 || target_rate <= 0) {
        throw input_error("resample_mono: invalid sample rate");
    }

    AudioClip mono;
    mono.sample_rate = clip.sample_rate;
    mono.channels = 1;
    if (clip.channels == 1) {
        mono.samples = clip.samples;
    } else {
        const size_t ch = static_cast<size_t>(clip.channels);
        const size_t frames = clip.frames();
        mono.samples.resize(frames);
        for (size_t f = 0; f < frames; ++f) {
            double acc = 0.0;
            for (size_t c = 0; c < ch; ++c) {
                acc += clip.samples[f * ch + c];
            }
            mono.samples[f] = acc / static_cast<double>(ch);
        }
    }
    if (clip.sample_rate == target_rate) {
        return mono;
    }

    // Kaiser-windowed sinc, beta 10, 64 source-side taps, cutoff at 94% of
    // the narrower Nyquist band. Tap sums are renormalized per output sample.
    const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
    const double fc = 0.5 * std::min(1.0, ratio) * 0.94;
    const int taps = 64;
    const double beta = 10.0;
    const double i0_beta = bessel_i0(beta);
    const size_t n_in = mono.samples.size();
    const size_t n_out = static_cast<size_t>(std::floor(static_cast<double>(n_in) * ratio));

    AudioClip out;
    out.sample_rate = target_rate;
    out.channels = 1;
    out.samples.resize(n_out);
    for (size_t i = 0; i < n_out; ++i) {
        const double p = static_cast<double>(i) / ratio;
        const long m0 = std::max<long>(0, static_cast<long>(std::ceil(p)) - taps);
        const long m1 =
            std::min<long>(static_cast<long>(n_in) - 1, static_cast<long>(std::floor(p)) + taps);
        double acc = 0.0, wsum = 0.0;
        for (long m = m0; m <= m1; ++m) {
            const double t = static_cast<double>(m) - p;
            const double u = t / taps;
            const double win = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
            const double w = sinc(2.0 * fc * t) * win;
            acc += mono.samples[static_cast<size_t>(m)] * w;
            wsum += w;
        }
        out.samples[i] = std::clamp(acc / wsum, -1.0, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// STFT
// ---------------------------------------------------------------------------

void fft_complex(std::vector<double>& re, std::vector<double>& im) {
    const size_t n = re.size();
    if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
        throw parameter_error("fft_complex: length must be a power of two");
    }
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (size_t k = 0; k < len / 2; ++k) {
                const size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

Spectrogram spectrogram(const AudioClip& clip, const StftParams& params) {
    if (clip.channels != 1 || clip.sample_rate != kSampleRate ||
        clip.frames() != static_cast<size_t>(std::llround(kClipSeconds * kSampleRate))) {
        throw contract_error("spectrogram: clip must be normalized to 6 s, 16 kHz, mono");
    }
    if (params.fft <= 0 || (params.fft & (params.fft - 1)) != 0) {
        throw parameter_error("spectrogram: fft size must be a power of two");
    }
    if (params.window <= 0 || params.window > params.fft) {
        throw parameter_error("spectrogram: window must be in (0, fft]");
    }
    if (params.hop <= 0) {
        throw parameter_error("spectrogram: hop must be positive");
    }

    const int F = params.freq_bins();
    const int T = params.frames_for(clip.samples.size());
    if (T <= 0) {
        throw parameter_error("spectrogram: window longer than the clip");
    }

    // periodic Hann
    std::vector<double> hann(static_cast<size_t>(params.window));
    for (int i = 0; i < params.window; ++i) {
        hann[static_cast<size_t>(i)] =
            0.5 * (1.0 - std::cos(2.0 * kPi * i / static_cast<double>(params.window)));
    }

    std::vector<double> values(static_cast<size_t>(F) * T);
    std::vector<double> re(static_cast<size_t>(params.fft)), im(static_cast<size_t>(params.fft));
    for (int t = 0; t < T; ++t) {
        const size_t start = static_cast<size_t>(t) * params.hop;
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
        for (int i = 0; i < params.window; ++i) {
            re[static_cast<size_t>(i)] = clip.samples[start + static_cast<size_t>(i)] *
                                         hann[static_cast<size_t>(i)];
        }
        fft_complex(re, im);
        for (int f = 0; f < F; ++f) {
            const double mag = std::hypot(re[static_cast<size_t>(f)], im[static_cast<size_t>(f)]);
            values[static_cast<size_t>(f) * T + t] = std::pow(mag, params.exponent);
        }
    }

    Spectrogram spec;
    spec.values = Tensor({1, F, T}, std::move(values));
    spec.params = params;
    check_finite(*spec.values.impl(), "spectrogram");
    return spec;
}

// ---------------------------------------------------------------------------
// ARSP binary
// ---------------------------------------------------------------------------

void save_spectrogram(const std::string& path, const Spectrogram& spec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot open for writing: " + path);
    }
    out.write("ARSP", 4);
    write_le<uint32_t>(out, 1);
    write_le<uint32_t>(out, static_cast<uint32_t>(spec.freq_bins()));
    write_le<uint32_t>(out, static_cast<uint32_t>(spec.frames()));
    for (double v : spec.values.data()) {
        write_le<float>(out, static_cast<float>(v));
    }
    write_le<double>(out, static_cast<double>(spec.params.window));
    write_le<double>(out, static_cast<double>(spec.params.hop));
    write_le<double>(out, static_cast<double>(spec.params.fft));
    write_le<double>(out, spec.params.exponent);
    if (!out) {
        throw io_error("write failed: " + path);
    }
}

Spectrogram load_spectrogram(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open spectrogram file: " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "ARSP", 4) != 0) {
        throw io_error("bad spectrogram magic: " + path);
    }
    const uint32_t version = read_le<uint32_t>(in);
    if (version != 1) {
        throw io_error("unsupported spectrogram version: " + path);
    }
    const uint32_t F = read_le<uint32_t>(in);
    const uint32_t T = read_le<uint32_t>(in);
    std::vector<double> values(static_cast<size_t>(F) * T);
    for (double& v : values) {
        v = static_cast<double>(read_le<float>(in));
    }
    Spectrogram spec;
    spec.params.window = static_cast<int>(read_le<double>(in));
    spec.params.hop = static_cast<int>(read_le<double>(in));
    spec.params.fft = static_cast<int>(read_le<double>(in));
    spec.params.exponent = read_le<double>(in);
    if (!in) {
        throw io_error("truncated spectrogram file: " + path);
    }
    spec.values = Tensor({1, static_cast<int>(F), static_cast<int>(T)}, std::move(values));
    return spec;
}

} // namespace arsp
