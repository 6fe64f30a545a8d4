#pragma once

#include "arsp/image.hpp"
#include "arsp/network.hpp"
#include "arsp/presets.hpp"

namespace arsp {

// Frozen face-to-feature CNN plus an auxiliary identity head (fc3). Built
// once from a fixed seed; parameters never change, so features are stable
// across processes. Gradients still flow through it to its *input* (the
// generated image) where a loss needs them.
class FaceEmbedder {
  public:
    explicit FaceEmbedder(Preset preset, uint64_t seed = kEmbedderSeed);

    // [N,3,S,S] -> [N,D]
    Tensor embed(const Tensor& images) const;
    // Single image -> [D]
    Tensor embed_one(const FaceImage& image) const;

    const LinearLayer& fc3() const { return fc3_; }
    Preset preset() const { return net_.preset(); }
    int feature_dim() const;
    uint64_t params_hash() const;
    const Network& net() const { return net_; }

  private:
    Network net_;
    LinearLayer fc3_;
};

} // namespace arsp
