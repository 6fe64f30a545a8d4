#pragma once

#include "arsp/image.hpp"
#include "arsp/network.hpp"
#include "arsp/presets.hpp"

namespace arsp {

// Feature-to-image decoder. The final 1x1 conv is sigmoid-bounded, so pixels
// land strictly inside (0,1).
class FaceDecoder {
  public:
    FaceDecoder(Preset preset, uint64_t seed, bool trainable = true);

    // [N,D] -> [N,3,S,S]
    Tensor forward(const Tensor& feat_batch) const;

    // Single feature [D] -> face image.
    FaceImage fd_forward(const Tensor& feat) const;

    // Affine handle of the first fc layer (the hidden-feature tap used by
    // the encoder loss).
    LinearLayer fc1_layer() const { return net_.linear_layer("fc1"); }

    Preset preset() const { return net_.preset(); }
    Network& net() { return net_; }
    const Network& net() const { return net_; }

    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }

  private:
    Network net_;
    bool trained_ = false;
};

// Per-layer output dims of the decoder stack (symbolic, no allocation).
std::vector<std::vector<int>> fd_shape_trace(Preset preset);

} // namespace arsp
