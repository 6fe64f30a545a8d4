#include "arsp/prior.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"
#include "arsp/presets.hpp"
#include "arsp/util.hpp"

namespace arsp {

std::string prior_kind_name(PriorKind k) {
    switch (k) {
        case PriorKind::neutral:
            return "neutral";
        case PriorKind::male:
            return "male";
        case PriorKind::female:
            return "female";
    }
    return "neutral";
}

PriorFeature compute_prior(const std::vector<Tensor>& features, PriorKind kind) {
    if (features.empty()) {
        throw input_error("compute_prior: empty feature list");
    }
    const size_t dim = features.front().numel();
    std::vector<double> acc(dim, 0.0);
    for (const Tensor& f : features) {
        if (f.numel() != dim || f.rank() != 1) {
            throw dimension_error("compute_prior: features must share one 1-d shape");
        }
        const auto d = f.data();
        for (size_t i = 0; i < dim; ++i) {
            acc[i] += d[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(features.size());
    for (double& v : acc) {
        v *= inv;
    }
    PriorFeature prior;
    prior.vec = Tensor({static_cast<int>(dim)}, std::move(acc));
    prior.kind = kind;
    prior.n_samples = features.size();
    return prior;
}

bool PriorBank::has(PriorKind k) const {
    switch (k) {
        case PriorKind::neutral:
            return neutral.has_value();
        case PriorKind::male:
            return male.has_value();
        case PriorKind::female:
            return female.has_value();
    }
    return false;
}

const PriorFeature& PriorBank::get(PriorKind k) const {
    if (!has(k)) {
        throw state_error("prior bank is missing the " + prior_kind_name(k) + " prior");
    }
    switch (k) {
        case PriorKind::neutral:
            return *neutral;
        case PriorKind::male:
            return *male;
        default:
            return *female;
    }
}

PriorBank build_prior_bank(const FaceEmbedder& embedder, const std::vector<FaceImage>& images,
                           const std::vector<Gender>& labels) {
    if (images.empty() || images.size() != labels.size()) {
        throw input_error("build_prior_bank: images and labels must be non-empty and aligned");
    }
    NoGradGuard ng;
    std::vector<Tensor> all, males, females;
    all.reserve(images.size());
    for (size_t i = 0; i < images.size(); ++i) {
        Tensor f = embedder.embed_one(images[i]);
        all.push_back(f);
        (labels[i] == Gender::male ? males : females).push_back(f);
    }
    PriorBank bank;
    bank.neutral = compute_prior(all, PriorKind::neutral);
    if (!males.empty()) {
        bank.male = compute_prior(males, PriorKind::male);
    }
    if (!females.empty()) {
        bank.female = compute_prior(females, PriorKind::female);
    }
    return bank;
}

const PriorFeature& select_prior(const PriorBank& bank, PriorMode mode,
                                 std::optional<Gender> gender_pred) {
    if (mode == PriorMode::neutral) {
        return bank.get(PriorKind::neutral);
    }
    if (!gender_pred.has_value()) {
        throw input_error("select_prior: gender mode needs a gender prediction");
    }
    return bank.get(*gender_pred == Gender::male ? PriorKind::male : PriorKind::female);
}

// ---------------------------------------------------------------------------
// convergence table
// ---------------------------------------------------------------------------

namespace {

double l1_distance_raw(const Tensor& a, const Tensor& b) {
    const auto da = a.data(), db = b.data();
    double acc = 0.0;
    for (size_t i = 0; i < da.size(); ++i) {
        acc += std::fabs(da[i] - db[i]);
    }
    return acc;
}

void append_cohort_rows(std::vector<ConvergenceRow>& rows, const std::string& cohort,
                        const std::vector<Tensor>& features, const std::vector<int>& ns) {
    std::vector<PriorFeature> priors;
    priors.reserve(ns.size());
    for (int n : ns) {
        std::vector<Tensor> head(features.begin(), features.begin() + n);
        priors.push_back(compute_prior(head, PriorKind::neutral));
    }
    for (size_t i = 0; i + 1 < ns.size(); ++i) {
        ConvergenceRow row;
        row.cohort = cohort;
        row.n1 = ns[i + 1];
        row.n2 = ns[i];
        row.l1 = l1_distance_raw(priors[i + 1].vec, priors[i].vec);
        rows.push_back(row);
    }
}

} // namespace

std::vector<ConvergenceRow> prior_convergence_table(const std::vector<Tensor>& embeddings,
                                                    const std::vector<Gender>& labels,
                                                    const std::vector<int>& ns) {
    if (ns.size() < 2) {
        throw input_error("prior_convergence_table: need at least two ladder points");
    }
    for (size_t i = 0; i + 1 < ns.size(); ++i) {
        if (ns[i] <= 0 || ns[i] >= ns[i + 1]) {
            throw input_error("prior_convergence_table: ladder must be positive and increasing");
        }
    }
    if (embeddings.size() != labels.size()) {
        throw input_error("prior_convergence_table: embeddings and labels must align");
    }
    const int max_n = ns.back();
    std::vector<Tensor> males, females;
    for (size_t i = 0; i < embeddings.size(); ++i) {
        (labels[i] == Gender::male ? males : females).push_back(embeddings[i]);
    }
    // Every cohort walks the same ladder over its own sample stream.
    if (static_cast<int>(males.size()) < max_n || static_cast<int>(females.size()) < max_n) {
        throw input_error("prior_convergence_table: dataset too small for the ladder (need " +
                          std::to_string(max_n) + " samples per gender)");
    }

    std::vector<ConvergenceRow> rows;
    append_cohort_rows(rows, "neutral", embeddings, ns);
    append_cohort_rows(rows, "male", males, ns);
    append_cohort_rows(rows, "female", females, ns);
    return rows;
}

std::vector<ConvergenceRow> prior_convergence_table(const FaceEmbedder& embedder,
                                                    const std::vector<FaceImage>& images,
                                                    const std::vector<Gender>& labels,
                                                    const std::vector<int>& ns) {
    NoGradGuard ng;
    std::vector<Tensor> embeddings;
    embeddings.reserve(images.size());
    for (const FaceImage& img : images) {
        embeddings.push_back(embedder.embed_one(img));
    }
    return prior_convergence_table(embeddings, labels, ns);
}

std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
    std::string out = "cohort,n1,n2,l1\n";
    for (const ConvergenceRow& r : rows) {
        out += r.cohort + "," + std::to_string(r.n1) + "," + std::to_string(r.n2) + "," +
               format_double(r.l1) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// ARPF binary
// ---------------------------------------------------------------------------

void save_prior(const std::string& path, const PriorFeature& prior) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot open for writing: " + path);
    }
    out.write("ARPF", 4);
    const uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const uint8_t kind = static_cast<uint8_t>(prior.kind);
    out.write(reinterpret_cast<const char*>(&kind), 1);
    const uint32_t dim = static_cast<uint32_t>(prior.vec.numel());
    out.write(reinterpret_cast<const char*>(&dim), 4);
    const uint64_t n = prior.n_samples;
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(prior.vec.data().data()),
              static_cast<std::streamsize>(dim * sizeof(double)));
    if (!out) {
        throw io_error("write failed: " + path);
    }
}

PriorFeature load_prior(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open prior file: " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "ARPF", 4) != 0) {
        throw io_error("bad prior magic: " + path);
    }
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1) {
        throw io_error("unsupported prior version: " + path);
    }
    uint8_t kind = 0;
    in.read(reinterpret_cast<char*>(&kind), 1);
    uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), 4);
    uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<double> values(dim);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) {
        throw io_error("truncated prior file: " + path);
    }
    PriorFeature prior;
    prior.vec = Tensor({static_cast<int>(dim)}, std::move(values));
    prior.kind = static_cast<PriorKind>(kind);
    prior.n_samples = n;
    return prior;
}

// ---------------------------------------------------------------------------
// gender classifier
// ---------------------------------------------------------------------------

GenderClassifier::GenderClassifier(Preset preset, uint64_t seed)
    : net_(gender_net_spec(preset), seed, /*trainable=*/true) {}

Tensor GenderClassifier::logits(const Tensor& spec_batch) const {
    return net_.forward(spec_batch);
}

GenderPrediction GenderClassifier::classify(const Spectrogram& spec) const {
    if (!trained_) {
        throw state_error("gender classifier has not been trained");
    }
    NoGradGuard ng;
    Tensor batch = reshape(spec.values, {1, 1, spec.freq_bins(), spec.frames()});
    Tensor out = logits(batch);
    std::vector<double> probs = softmax_rows(out);
    GenderPrediction pred;
    // ties resolve to male
    if (probs[0] >= probs[1]) {
        pred.gender = Gender::male;
        pred.confidence = probs[0];
    } else {
        pred.gender = Gender::female;
        pred.confidence = probs[1];
    }
    return pred;
}

} // namespace arsp
