#pragma once

#include <vector>

#include "arsp/embedder.hpp"
#include "arsp/image.hpp"
#include "arsp/network.hpp"
#include "arsp/tensor.hpp"

namespace arsp {

// Training-objective constants. alpha mixes MS-SSIM against the
// Gaussian-weighted l1 term; the lambdas balance the tri-item encoder loss
// so the per-term gradients live on a similar scale.
struct LossWeights {
    double alpha = 0.84;
    double lambda1 = 1.0;
    double lambda2 = 0.04;
    double lambda3 = 1.2;
    std::vector<double> scale_weights; // per MS-SSIM scale, sums to 1
    std::vector<double> scale_sigmas;  // Gaussian sigma per scale
    int window = 11;                   // odd Gaussian window extent

    static LossWeights defaults(Preset preset);
    void validate() const; // parameter_error on any violation
};

// Multi-scale structural similarity, scalar in [0,1]; 1 exactly for
// identical images. Images are [3,H,W] or [N,3,H,W] with matching shapes;
// every halving must keep the extent >= window (parameter_error otherwise).
Tensor ms_ssim(const Tensor& x, const Tensor& y, const LossWeights& w);

// alpha * (1 - ms_ssim) + (1 - alpha) * mean(G (x) |x-y|) where G is the
// finest-scale Gaussian window applied as a normalized same-size filter.
Tensor image_loss(const Tensor& x, const Tensor& y, const LossWeights& w);

// 1 - a.b/(|a||b|), scalar in [0,2]. Zero vectors are input errors.
Tensor cosine_loss(const Tensor& a, const Tensor& b);

// Row-wise mean of cosine losses over [N,D] pairs.
Tensor cosine_loss_rows(const Tensor& a, const Tensor& b);

struct FdLossParts {
    Tensor image;
    Tensor cs;
    Tensor total;
};

// Joint decoder objective on batches [N,3,S,S]: image loss plus the cosine
// loss between embedded generated and original faces. The embedder must be
// frozen; gradients reach `gen` only.
FdLossParts fd_total_loss_parts(const Tensor& gen, const Tensor& orig,
                                const FaceEmbedder& embedder, const LossWeights& w);

Tensor fd_total_loss(const FaceImage& gen, const FaceImage& orig, const FaceEmbedder& embedder,
                     const LossWeights& w);

struct TriLossParts {
    Tensor unit_l2;   // squared l2 between unitized features
    Tensor hidden_l1; // l1 between decoder-fc1 taps
    Tensor id_cos;    // cosine loss between identity-head outputs
    Tensor total;     // lambda-weighted sum
};

// Tri-item encoder objective between the target face feature and the final
// (fused) speech feature. decoder_fc1 and embed_fc3 must be frozen; the
// target side is detached, so gradients reach s_f only.
TriLossParts se_tri_loss_parts(const Tensor& f_f, const Tensor& s_f,
                               const LinearLayer& decoder_fc1, const LinearLayer& embed_fc3,
                               const LossWeights& w);

Tensor se_tri_loss(const Tensor& f_f, const Tensor& s_f, const LinearLayer& decoder_fc1,
                   const LinearLayer& embed_fc3, const LossWeights& w);

// Normalized Gaussian window as a [1,1,win,win] kernel (no grad).
Tensor gaussian_kernel(int window, double sigma);

} // namespace arsp
