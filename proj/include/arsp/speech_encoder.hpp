#pragma once

#include <cstdint>
#include <optional>

#include "arsp/audio.hpp"
#include "arsp/network.hpp"
#include "arsp/presets.hpp"
#include "arsp/prior.hpp"

namespace arsp {

// How the encoder output and the prior face feature combine into the final
// face feature. sum_fc feeds the sum through a trainable fc layer.
enum class FusionMode { none, sum, sum_fc };

std::string fusion_mode_name(FusionMode m);
FusionMode fusion_mode_from_name(const std::string& name);

// Residual fusion. prior may be null only in mode none; the fusion layer is
// required (and used) only in mode sum_fc.
Tensor fuse_prior(const Tensor& s_f, const PriorFeature* prior, FusionMode mode,
                  const LinearLayer* fusion_fc);

class SpeechEncoder {
  public:
    SpeechEncoder(Preset preset, uint64_t seed, FusionMode mode = FusionMode::none,
                  bool trainable = true);

    // [N,1,F,T] -> [N,D]
    Tensor forward(const Tensor& spec_batch) const;

    // Single spectrogram -> raw speech feature [D] (before fusion).
    Tensor se_forward(const Spectrogram& spec) const;

    // Applies this model's fusion mode (and fc, when present).
    Tensor fuse(const Tensor& s_f, const PriorFeature* prior) const;

    FusionMode fusion_mode() const { return mode_; }
    Preset preset() const { return net_.preset(); }
    Network& net() { return net_; }
    const Network& net() const { return net_; }

    // Present iff mode == sum_fc. Near-identity initialization: the layer
    // starts as a light perturbation of a pass-through.
    LinearLayer* fusion_fc();
    const LinearLayer* fusion_fc() const;
    void set_fusion_fc(const Tensor& weight, const Tensor& bias); // sum_fc only
    std::vector<Param*> trainable_params();

    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }

  private:
    Network net_;
    FusionMode mode_;
    std::optional<Param> fusion_weight_, fusion_bias_;
    mutable LinearLayer fusion_view_;
    bool trained_ = false;
};

// Per-layer output dims for the encoder stack (symbolic, no allocation).
std::vector<std::vector<int>> se_shape_trace(Preset preset);

} // namespace arsp
