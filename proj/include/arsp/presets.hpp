#pragma once

#include "arsp/audio.hpp"
#include "arsp/network.hpp"

namespace arsp {

// Scale presets. `full` carries the reference dimensions used for shape
// conformance; `tiny` preserves every layer kind and its order at roughly
// one-eighth the channel widths and is what training and gradient checks run
// on. Audio stays 6 s / 16 kHz in both; only the STFT grid changes.
struct PresetConfig {
    Preset preset;
    int feature_dim;          // face/speech feature width
    int spec_freq_bins;       // F
    int spec_frames;          // T
    StftParams stft;
    int image_size;           // square RGB face images
    int fd_fc1_dim;           // decoder first fc output
    int fd_seed_channels;     // reshape target C
    int fd_seed_hw;           // reshape target H = W
    int embed_fc3_dim;        // identity-head width on the frozen embedder
    int cbam_reduction;
    int cbam_spatial_kernel;
};

const PresetConfig& preset_config(Preset p);

// Speech-encoder stack: five convs, three max pools (the last one
// asymmetric), CBAM, a 1x1 conv feature lift, global average pooling and a
// final fully connected fusion layer.
NetworkSpec se_spec(Preset p);

// Face-decoder stack: two fc layers resize the feature into a seed map,
// eleven transposed convs plus one extra stride-2 upsampling stage restore
// the full image extent, CBAM sits after the deepest mid-resolution block,
// and a sigmoid 1x1 conv emits RGB.
NetworkSpec fd_spec(Preset p);

// Frozen toy embedder: three strided convs, global average pooling, two fc
// layers to the feature width. The fc3 identity head hangs off the feature.
NetworkSpec embedder_spec(Preset p);

// Voice gender classifier: five convs, three max pools, two fc layers.
NetworkSpec gender_net_spec(Preset p);

// Fixed seed of the frozen embedder; shared everywhere so features, priors
// and losses agree across processes.
inline constexpr uint64_t kEmbedderSeed = 0x5EEDFACEull;

} // namespace arsp
