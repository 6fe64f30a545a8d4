#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "arsp/audio.hpp"
#include "arsp/image.hpp"
#include "arsp/prior.hpp"

namespace arsp {

// Procedural face/voice pair. One 8-d latent drives both the rendered face
// and the harmonic stack of the voice, so the audio genuinely carries the
// face-controlling factors. Regeneration from (seed, latent) is
// bit-identical.
struct SyntheticPair {
    std::array<double, 8> latent{};
    Gender gender = Gender::male;
    FaceImage face;
    AudioClip audio;
};

std::vector<std::array<double, 8>> sample_latents(uint64_t seed, int n);

// latent[0] splits the population: < 0.5 male, >= 0.5 female.
Gender latent_gender(const std::array<double, 8>& latent);

// Smooth geometric face on a gradient background; gender shifts the head
// proportions so the cohort priors differ.
FaceImage render_face(const std::array<double, 8>& latent, Preset preset);

// 6 s / 16 kHz harmonic voice. The gender half-space controls fundamental
// range and spectral tilt; the remaining latents shape partial amplitudes.
AudioClip synth_voice(const std::array<double, 8>& latent);

std::vector<SyntheticPair> generate_dataset(uint64_t seed, int n, Preset preset);

// Faces and labels only (for prior construction; skips audio synthesis).
std::vector<SyntheticPair> generate_faces(uint64_t seed, int n, Preset preset);

} // namespace arsp
