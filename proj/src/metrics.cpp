#include "arsp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"
#include "arsp/util.hpp"

namespace arsp {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

void require_same_length(const Tensor& a, const Tensor& b, const char* op) {
    if (a.numel() != b.numel()) {
        throw dimension_error(std::string(op) + ": vector lengths differ");
    }
}

std::vector<double> unitize(const Tensor& t) {
    double n2 = 0.0;
    for (double v : t.data()) {
        n2 += v * v;
    }
    if (n2 == 0.0) {
        throw input_error("unitize: zero vector");
    }
    const double inv = 1.0 / std::sqrt(n2);
    std::vector<double> out(t.data().begin(), t.data().end());
    for (double& v : out) {
        v *= inv;
    }
    return out;
}

} // namespace

double l1_distance(const Tensor& a, const Tensor& b) {
    require_same_length(a, b, "l1_distance");
    double acc = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        acc += std::fabs(a.at(i) - b.at(i));
    }
    return acc;
}

double l2_distance(const Tensor& a, const Tensor& b) {
    require_same_length(a, b, "l2_distance");
    double acc = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        const double d = a.at(i) - b.at(i);
        acc += d * d;
    }
    return std::sqrt(acc);
}

double cos_degrees(const Tensor& a, const Tensor& b) {
    require_same_length(a, b, "cos_degrees");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        dot += a.at(i) * b.at(i);
        na += a.at(i) * a.at(i);
        nb += b.at(i) * b.at(i);
    }
    if (na == 0.0 || nb == 0.0) {
        throw input_error("cos_degrees: zero vector");
    }
    const double c = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return std::acos(c) * kRadToDeg;
}

FeatureMetrics feature_metrics(const Tensor& a, const Tensor& b, bool unitized) {
    FeatureMetrics m;
    if (unitized) {
        std::vector<double> ua = unitize(a), ub = unitize(b);
        Tensor ta({static_cast<int>(ua.size())}, std::move(ua));
        Tensor tb({static_cast<int>(ub.size())}, std::move(ub));
        m.l1 = l1_distance(ta, tb);
        m.l2 = l2_distance(ta, tb);
        m.cos_deg = cos_degrees(ta, tb);
        return m;
    }
    m.l1 = l1_distance(a, b);
    m.l2 = l2_distance(a, b);
    m.cos_deg = cos_degrees(a, b);
    return m;
}

std::string metrics_csv_header() { return "model,l1,l2,cos_deg,l1p,l2p,cos_deg_p,n"; }

std::string metrics_csv_row(const MetricsReport& report) {
    auto triple = [](const std::optional<FeatureMetrics>& m) {
        if (!m.has_value()) {
            return std::string(",,");
        }
        return format_double(m->l1) + "," + format_double(m->l2) + "," +
               format_double(m->cos_deg);
    };
    return report.model_tag + "," + triple(report.se) + "," + triple(report.regen) + "," +
           std::to_string(report.sample_count);
}

MetricsReport face_to_face_benchmark(const FaceEmbedder& embedder, const FaceDecoder& decoder,
                                     const std::vector<FaceImage>& images) {
    if (!decoder.trained()) {
        throw state_error("face_to_face_benchmark: decoder has not been trained");
    }
    if (images.empty()) {
        throw input_error("face_to_face_benchmark: no images");
    }
    NoGradGuard ng;
    FeatureMetrics acc;
    for (const FaceImage& img : images) {
        Tensor f = embedder.embed_one(img);
        FaceImage regen = decoder.fd_forward(f);
        Tensor f2 = embedder.embed_one(regen);
        FeatureMetrics m = feature_metrics(f2, f);
        acc.l1 += m.l1;
        acc.l2 += m.l2;
        acc.cos_deg += m.cos_deg;
    }
    const double inv = 1.0 / static_cast<double>(images.size());
    MetricsReport report;
    report.model_tag = "face-to-face";
    report.regen = FeatureMetrics{acc.l1 * inv, acc.l2 * inv, acc.cos_deg * inv};
    report.sample_count = static_cast<int>(images.size());
    return report;
}

MetricsReport evaluate_model(const AblationModel& model, const FaceDecoder& decoder,
                             const FaceEmbedder& embedder, const std::vector<EvalSample>& samples,
                             bool unitized) {
    if (model.encoder == nullptr) {
        throw input_error("evaluate_model: missing encoder");
    }
    if (samples.empty()) {
        throw input_error("evaluate_model: no samples");
    }
    NoGradGuard ng;
    FeatureMetrics se_acc, regen_acc;
    for (const EvalSample& sample : samples) {
        Tensor target = embedder.embed_one(sample.face);
        Tensor s_f = model.encoder->se_forward(sample.spec);
        Tensor final_feat = model.encoder->fuse(s_f, model.prior);

        FeatureMetrics se_m = feature_metrics(final_feat, target, unitized);
        se_acc.l1 += se_m.l1;
        se_acc.l2 += se_m.l2;
        se_acc.cos_deg += se_m.cos_deg;

        FaceImage regen = decoder.fd_forward(final_feat);
        Tensor regen_feat = embedder.embed_one(regen);
        FeatureMetrics re_m = feature_metrics(regen_feat, target, unitized);
        regen_acc.l1 += re_m.l1;
        regen_acc.l2 += re_m.l2;
        regen_acc.cos_deg += re_m.cos_deg;
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    MetricsReport report;
    report.model_tag = model.tag;
    report.se = FeatureMetrics{se_acc.l1 * inv, se_acc.l2 * inv, se_acc.cos_deg * inv};
    report.regen = FeatureMetrics{regen_acc.l1 * inv, regen_acc.l2 * inv, regen_acc.cos_deg * inv};
    report.sample_count = static_cast<int>(samples.size());
    return report;
}

std::string ablation_report(const std::vector<AblationModel>& models, const FaceDecoder& decoder,
                            const FaceEmbedder& embedder, const std::vector<EvalSample>& samples,
                            bool unitized) {
    if (models.empty()) {
        throw input_error("ablation_report: no models");
    }
    for (const AblationModel& m : models) {
        if (m.encoder == nullptr) {
            throw input_error("ablation_report: model '" + m.tag + "' has no encoder");
        }
        if (m.encoder->preset() != decoder.preset() ||
            m.encoder->preset() != embedder.preset()) {
            throw contract_error("ablation_report: preset mismatch for model '" + m.tag + "'");
        }
    }
    std::string csv = metrics_csv_header() + "\n";
    for (const AblationModel& m : models) {
        csv += metrics_csv_row(evaluate_model(m, decoder, embedder, samples, unitized)) + "\n";
    }
    return csv;
}

} // namespace arsp
