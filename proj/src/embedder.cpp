#include "arsp/embedder.hpp"

#include <cmath>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"

namespace arsp {

namespace {

LinearLayer make_fc3(Preset preset, uint64_t seed) {
    const PresetConfig& cfg = preset_config(preset);
    Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
    const double limit = std::sqrt(6.0 / cfg.feature_dim);
    std::vector<double> w(static_cast<size_t>(cfg.feature_dim) * cfg.embed_fc3_dim);
    for (double& v : w) {
        v = quantized(rng.uniform(-limit, limit));
    }
    return {Tensor({cfg.feature_dim, cfg.embed_fc3_dim}, std::move(w), false),
            Tensor::zeros({cfg.embed_fc3_dim}, false)};
}

} // namespace

FaceEmbedder::FaceEmbedder(Preset preset, uint64_t seed)
    : net_(embedder_spec(preset), seed, /*trainable=*/false), fc3_(make_fc3(preset, seed)) {}

Tensor FaceEmbedder::embed(const Tensor& images) const {
    const PresetConfig& cfg = preset_config(preset());
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg.image_size ||
        images.dim(3) != cfg.image_size) {
        throw dimension_error("embed: images must be [N,3," + std::to_string(cfg.image_size) +
                              "," + std::to_string(cfg.image_size) + "]");
    }
    return net_.forward(images);
}

Tensor FaceEmbedder::embed_one(const FaceImage& image) const {
    Tensor batch = reshape(image.pixels, {1, 3, image.height(), image.width()});
    return reshape(embed(batch), {feature_dim()});
}

int FaceEmbedder::feature_dim() const { return preset_config(preset()).feature_dim; }

uint64_t FaceEmbedder::params_hash() const {
    uint64_t h = net_.params_hash();
    h = fnv1a64(fc3_.weight.data().data(), fc3_.weight.numel() * sizeof(double), h);
    h = fnv1a64(fc3_.bias.data().data(), fc3_.bias.numel() * sizeof(double), h);
    return h;
}

} // namespace arsp
