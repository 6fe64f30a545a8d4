#include "arsp/dataset.hpp"

#include <cmath>

#include "arsp/errors.hpp"
#include "arsp/presets.hpp"
#include "arsp/util.hpp"

namespace arsp {

namespace {

constexpr double kTau = 2.0 * 3.14159265358979323846;

double smoothstep01(double t) {
    if (t <= 0.0) {
        return 0.0;
    }
    if (t >= 1.0) {
        return 1.0;
    }
    return t * t * (3.0 - 2.0 * t);
}

// soft-edged ellipse coverage at normalized point (u,v)
double ellipse_alpha(double u, double v, double cx, double cy, double rx, double ry,
                     double soft = 0.12) {
    const double du = (u - cx) / rx;
    const double dv = (v - cy) / ry;
    const double e = du * du + dv * dv;
    return smoothstep01((1.0 - e) / soft);
}

struct Rgb {
    double r, g, b;
};

void blend(Rgb& dst, const Rgb& src, double alpha) {
    dst.r += (src.r - dst.r) * alpha;
    dst.g += (src.g - dst.g) * alpha;
    dst.b += (src.b - dst.b) * alpha;
}

} // namespace

std::vector<std::array<double, 8>> sample_latents(uint64_t seed, int n) {
    if (n < 1) {
        throw input_error("sample_latents: n must be >= 1");
    }
    Rng rng(seed);
    std::vector<std::array<double, 8>> out(static_cast<size_t>(n));
    for (auto& latent : out) {
        for (double& v : latent) {
            v = rng.uniform();
        }
    }
    return out;
}

Gender latent_gender(const std::array<double, 8>& latent) {
    return latent[0] < 0.5 ? Gender::male : Gender::female;
}

FaceImage render_face(const std::array<double, 8>& latent, Preset preset) {
    const int s = preset_config(preset).image_size;
    const bool male = latent_gender(latent) == Gender::male;

    const Rgb bg_top{0.10 + 0.25 * latent[7], 0.14 + 0.20 * latent[7], 0.22 + 0.15 * latent[7]};
    const double tone = 0.72 + 0.26 * latent[3];
    const Rgb skin{0.78 * tone, 0.62 * tone, 0.52 * tone};
    const Rgb hair{0.12 + 0.10 * latent[3], 0.08 + 0.06 * latent[3], 0.06};
    const Rgb eye{0.08, 0.08, 0.12};
    const Rgb mouth{0.55 + 0.25 * latent[3], 0.22, 0.25};

    const double head_rx = 0.24 + 0.05 * latent[1] + (male ? 0.05 : 0.0);
    const double head_ry = 0.32 + 0.05 * latent[2];
    const double eye_sep = 0.09 + 0.05 * latent[4];
    const double eye_y = 0.40 + 0.05 * latent[5];
    const double eye_r = 0.030 + 0.015 * latent[6];
    const double mouth_w = 0.06 + 0.05 * latent[6];
    const double mouth_y = 0.60 + 0.04 * latent[4];
    const double hair_len = male ? 0.10 : 0.22 + 0.08 * latent[5];

    std::vector<double> px(3ull * s * s);
    for (int y = 0; y < s; ++y) {
        const double v = (y + 0.5) / s;
        for (int x = 0; x < s; ++x) {
            const double u = (x + 0.5) / s;
            Rgb c{bg_top.r + 0.10 * v, bg_top.g + 0.08 * v, bg_top.b + 0.05 * v};

            // hair cap behind the head
            blend(c, hair,
                  ellipse_alpha(u, v, 0.5, 0.40, head_rx * 1.18, head_ry * 1.05 + hair_len * 0.3));
            // face
            const double face_alpha = ellipse_alpha(u, v, 0.5, 0.48, head_rx, head_ry);
            blend(c, skin, face_alpha);
            // forehead hairline
            if (v < 0.30 + hair_len * 0.25) {
                blend(c, hair, face_alpha * smoothstep01((0.30 + hair_len * 0.25 - v) / 0.05));
            }
            // eyes
            blend(c, eye, ellipse_alpha(u, v, 0.5 - eye_sep, eye_y, eye_r, eye_r, 0.5));
            blend(c, eye, ellipse_alpha(u, v, 0.5 + eye_sep, eye_y, eye_r, eye_r, 0.5));
            // mouth
            blend(c, mouth, ellipse_alpha(u, v, 0.5, mouth_y, mouth_w, 0.016 + 0.010 * latent[2], 0.5));

            const size_t i = static_cast<size_t>(y) * s + x;
            px[i] = std::clamp(c.r, 0.0, 1.0);
            px[static_cast<size_t>(s) * s + i] = std::clamp(c.g, 0.0, 1.0);
            px[2ull * s * s + i] = std::clamp(c.b, 0.0, 1.0);
        }
    }
    return FaceImage{Tensor({3, s, s}, std::move(px))};
}

AudioClip synth_voice(const std::array<double, 8>& latent) {
    const bool male = latent_gender(latent) == Gender::male;
    const double in_class = male ? latent[0] * 2.0 : (latent[0] - 0.5) * 2.0;
    const double f0 = male ? 100.0 + 70.0 * in_class : 190.0 + 110.0 * in_class;
    const double tilt = male ? 1.6 : 0.8;

    constexpr int kPartials = 8;
    double amps[kPartials];
    double total = 0.0;
    for (int k = 0; k < kPartials; ++k) {
        const double shape = k < 7 ? latent[static_cast<size_t>(k + 1)] : 0.5 * (latent[1] + latent[2]);
        amps[k] = (0.3 + 0.7 * shape) * std::pow(static_cast<double>(k + 1), -tilt);
        total += amps[k];
    }
    for (double& a : amps) {
        a /= total;
    }

    const size_t n = static_cast<size_t>(std::llround(kClipSeconds * kSampleRate));
    AudioClip clip;
    clip.sample_rate = kSampleRate;
    clip.channels = 1;
    clip.samples.resize(n);
    for (size_t t = 0; t < n; ++t) {
        const double time = static_cast<double>(t) / kSampleRate;
        double v = 0.0;
        for (int k = 0; k < kPartials; ++k) {
            v += amps[k] * std::sin(kTau * f0 * (k + 1) * time);
        }
        clip.samples[t] = 0.45 * v;
    }
    return clip;
}

std::vector<SyntheticPair> generate_dataset(uint64_t seed, int n, Preset preset) {
    auto latents = sample_latents(seed, n);
    std::vector<SyntheticPair> out;
    out.reserve(latents.size());
    for (const auto& latent : latents) {
        SyntheticPair pair;
        pair.latent = latent;
        pair.gender = latent_gender(latent);
        pair.face = render_face(latent, preset);
        pair.audio = synth_voice(latent);
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<SyntheticPair> generate_faces(uint64_t seed, int n, Preset preset) {
    auto latents = sample_latents(seed, n);
    std::vector<SyntheticPair> out;
    out.reserve(latents.size());
    for (const auto& latent : latents) {
        SyntheticPair pair;
        pair.latent = latent;
        pair.gender = latent_gender(latent);
        pair.face = render_face(latent, preset);
        out.push_back(std::move(pair));
    }
    return out;
}

} // namespace arsp
