#include "arsp/face_decoder.hpp"

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"

namespace arsp {

FaceDecoder::FaceDecoder(Preset preset, uint64_t seed, bool trainable)
    : net_(fd_spec(preset), seed, trainable) {}

Tensor FaceDecoder::forward(const Tensor& feat_batch) const {
    const PresetConfig& cfg = preset_config(preset());
    if (feat_batch.rank() != 2 || feat_batch.dim(1) != cfg.feature_dim) {
        throw dimension_error("face decoder expects [N," + std::to_string(cfg.feature_dim) +
                              "] features");
    }
    return net_.forward(feat_batch);
}

FaceImage FaceDecoder::fd_forward(const Tensor& feat) const {
    const PresetConfig& cfg = preset_config(preset());
    if (feat.rank() != 1 || feat.dim(0) != cfg.feature_dim) {
        throw dimension_error("fd_forward expects a feature of dim " +
                              std::to_string(cfg.feature_dim));
    }
    Tensor batch = reshape(feat, {1, cfg.feature_dim});
    Tensor out = forward(batch);
    Tensor pixels = reshape(out, {3, cfg.image_size, cfg.image_size});
    return FaceImage{pixels};
}

std::vector<std::vector<int>> fd_shape_trace(Preset preset) {
    const PresetConfig& cfg = preset_config(preset);
    return shape_trace(fd_spec(preset), {cfg.feature_dim});
}

} // namespace arsp
