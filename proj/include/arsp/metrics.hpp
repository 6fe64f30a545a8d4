#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arsp/embedder.hpp"
#include "arsp/face_decoder.hpp"
#include "arsp/image.hpp"
#include "arsp/prior.hpp"
#include "arsp/speech_encoder.hpp"
#include "arsp/tensor.hpp"

namespace arsp {

// Raw (non-unitized) distances by default; cos_deg is invariant under
// positive rescaling either way.
double l1_distance(const Tensor& a, const Tensor& b);
double l2_distance(const Tensor& a, const Tensor& b);
// arccos of the clamped cosine similarity, in degrees. Zero vectors are
// input errors (l1/l2 stay defined).
double cos_degrees(const Tensor& a, const Tensor& b);

struct FeatureMetrics {
    double l1 = 0.0;
    double l2 = 0.0;
    double cos_deg = 0.0;
};

FeatureMetrics feature_metrics(const Tensor& a, const Tensor& b, bool unitized = false);

struct MetricsReport {
    std::string model_tag;
    // speech-side features against ground-truth face features
    std::optional<FeatureMetrics> se;
    // features of regenerated faces against ground-truth face features
    std::optional<FeatureMetrics> regen;
    int sample_count = 0;
};

std::string metrics_csv_header(); // model,l1,l2,cos_deg,l1p,l2p,cos_deg_p,n
std::string metrics_csv_row(const MetricsReport& report);

// Embed each image, decode the feature back to a face, re-embed, and
// compare against the original feature. Fills the regenerated-side columns;
// there is no speech side. state_error on an untrained decoder.
MetricsReport face_to_face_benchmark(const FaceEmbedder& embedder, const FaceDecoder& decoder,
                                     const std::vector<FaceImage>& images);

struct EvalSample {
    Spectrogram spec;
    FaceImage face;
    std::optional<Gender> gender;
};

struct AblationModel {
    std::string tag;
    const SpeechEncoder* encoder = nullptr;
    const PriorFeature* prior = nullptr; // null for fusion mode none
};

// Evaluates one model over the samples: fused speech features against
// ground-truth features, plus the regenerated-face comparison through the
// decoder.
MetricsReport evaluate_model(const AblationModel& model, const FaceDecoder& decoder,
                             const FaceEmbedder& embedder, const std::vector<EvalSample>& samples,
                             bool unitized = false);

// One CSV row per model, column layout fixed by metrics_csv_header().
// contract_error when the models disagree on preset.
std::string ablation_report(const std::vector<AblationModel>& models, const FaceDecoder& decoder,
                            const FaceEmbedder& embedder, const std::vector<EvalSample>& samples,
                            bool unitized = false);

} // namespace arsp
