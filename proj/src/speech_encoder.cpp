#include "arsp/speech_encoder.hpp"

#include <cmath>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"

namespace arsp {

std::string fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::none:
            return "none";
        case FusionMode::sum:
            return "sum";
        case FusionMode::sum_fc:
            return "sum_fc";
    }
    return "none";
}

FusionMode fusion_mode_from_name(const std::string& name) {
    if (name == "none") {
        return FusionMode::none;
    }
    if (name == "sum") {
        return FusionMode::sum;
    }
    if (name == "sum_fc") {
        return FusionMode::sum_fc;
    }
    throw input_error("unknown fusion mode: " + name);
}

Tensor fuse_prior(const Tensor& s_f, const PriorFeature* prior, FusionMode mode,
                  const LinearLayer* fusion_fc) {
    if (mode == FusionMode::none) {
        return s_f;
    }
    if (prior == nullptr) {
        throw state_error("fuse_prior: mode " + fusion_mode_name(mode) + " requires a prior");
    }
    if (prior->vec.numel() != s_f.numel()) {
        throw dimension_error("fuse_prior: prior dim " + std::to_string(prior->vec.numel()) +
                              " does not match feature dim " + std::to_string(s_f.numel()));
    }
    Tensor merged = add(s_f, prior->vec);
    if (mode == FusionMode::sum) {
        return merged;
    }
    if (fusion_fc == nullptr) {
        throw state_error("fuse_prior: mode sum_fc requires a fusion layer");
    }
    const int d = static_cast<int>(s_f.numel());
    Tensor row = reshape(merged, {1, d});
    return reshape(apply_linear(*fusion_fc, row), {d});
}

namespace {

// Identity plus small He-scaled noise; a fusion adapter should start close
// to a pass-through so the residual path is live from step one.
Tensor near_identity(Rng& rng, int d, bool trainable) {
    const double limit = 0.05 * std::sqrt(6.0 / d);
    std::vector<double> w(static_cast<size_t>(d) * d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            double v = rng.uniform(-limit, limit);
            if (i == j) {
                v += 1.0;
            }
            w[static_cast<size_t>(i) * d + j] = quantized(v);
        }
    }
    return Tensor({d, d}, std::move(w), trainable);
}

} // namespace

SpeechEncoder::SpeechEncoder(Preset preset, uint64_t seed, FusionMode mode, bool trainable)
    : net_(se_spec(preset), seed, trainable), mode_(mode) {
    if (mode_ == FusionMode::sum_fc) {
        const int d = preset_config(preset).feature_dim;
        Rng rng(seed ^ 0xF05100FCull);
        fusion_weight_ = Param{"fusion_fc.weight", near_identity(rng, d, trainable), !trainable};
        fusion_bias_ = Param{"fusion_fc.bias", Tensor::zeros({d}, trainable), !trainable};
    }
}

Tensor SpeechEncoder::forward(const Tensor& spec_batch) const {
    const PresetConfig& cfg = preset_config(preset());
    if (spec_batch.rank() != 4 || spec_batch.dim(1) != 1 ||
        spec_batch.dim(2) != cfg.spec_freq_bins || spec_batch.dim(3) != cfg.spec_frames) {
        throw dimension_error("speech encoder expects [N,1," + std::to_string(cfg.spec_freq_bins) +
                              "," + std::to_string(cfg.spec_frames) + "] input");
    }
    return net_.forward(spec_batch);
}

Tensor SpeechEncoder::se_forward(const Spectrogram& spec) const {
    Tensor batch = reshape(spec.values, {1, 1, spec.freq_bins(), spec.frames()});
    const int d = preset_config(preset()).feature_dim;
    return reshape(forward(batch), {d});
}

Tensor SpeechEncoder::fuse(const Tensor& s_f, const PriorFeature* prior) const {
    return fuse_prior(s_f, prior, mode_, fusion_fc());
}

LinearLayer* SpeechEncoder::fusion_fc() {
    if (!fusion_weight_) {
        return nullptr;
    }
    fusion_view_ = {fusion_weight_->value, fusion_bias_->value};
    return &fusion_view_;
}

const LinearLayer* SpeechEncoder::fusion_fc() const {
    return const_cast<SpeechEncoder*>(this)->fusion_fc();
}

void SpeechEncoder::set_fusion_fc(const Tensor& weight, const Tensor& bias) {
    if (mode_ != FusionMode::sum_fc) {
        throw state_error("set_fusion_fc: encoder fusion mode is not sum_fc");
    }
    const bool rg = fusion_weight_->value.requires_grad();
    fusion_weight_->value = Tensor(weight.shape(),
                                   {weight.data().begin(), weight.data().end()}, rg);
    fusion_bias_->value = Tensor(bias.shape(), {bias.data().begin(), bias.data().end()}, rg);
}

std::vector<Param*> SpeechEncoder::trainable_params() {
    std::vector<Param*> out;
    for (Param& p : net_.params()) {
        out.push_back(&p);
    }
    if (fusion_weight_) {
        out.push_back(&*fusion_weight_);
        out.push_back(&*fusion_bias_);
    }
    return out;
}

std::vector<std::vector<int>> se_shape_trace(Preset preset) {
    const PresetConfig& cfg = preset_config(preset);
    return shape_trace(se_spec(preset), {1, cfg.spec_freq_bins, cfg.spec_frames});
}

} // namespace arsp
