#pragma once

#include <optional>
#include <string>
#include <vector>

#include "arsp/audio.hpp"
#include "arsp/embedder.hpp"
#include "arsp/image.hpp"
#include "arsp/network.hpp"

namespace arsp {

enum class Gender { male, female };

enum class PriorKind { neutral, male, female };

std::string prior_kind_name(PriorKind k);

// Elementwise mean of a feature cohort. vec is exactly the arithmetic mean
// of its source set.
struct PriorFeature {
    Tensor vec;
    PriorKind kind = PriorKind::neutral;
    uint64_t n_samples = 0;
};

PriorFeature compute_prior(const std::vector<Tensor>& features, PriorKind kind);

struct PriorBank {
    std::optional<PriorFeature> neutral, male, female;

    bool has(PriorKind k) const;
    const PriorFeature& get(PriorKind k) const; // state_error when missing
};

// Builds all three cohort priors from embedded faces and their labels.
PriorBank build_prior_bank(const FaceEmbedder& embedder, const std::vector<FaceImage>& images,
                           const std::vector<Gender>& labels);

enum class PriorMode { neutral, gender };

// neutral mode ignores the prediction; gender mode picks the matching kind.
const PriorFeature& select_prior(const PriorBank& bank, PriorMode mode,
                                 std::optional<Gender> gender_pred);

// One row of the prior-convergence analysis: L1 distance between cohort
// means taken over the first n2 and first n1 samples.
struct ConvergenceRow {
    std::string cohort;
    int n1 = 0; // larger sample count
    int n2 = 0; // smaller sample count
    double l1 = 0.0;
};

// Core form over precomputed embeddings; rows are emitted per cohort
// (neutral, then male, then female) over consecutive ladder pairs.
std::vector<ConvergenceRow> prior_convergence_table(const std::vector<Tensor>& embeddings,
                                                    const std::vector<Gender>& labels,
                                                    const std::vector<int>& ns);

// Embeds the images first, then delegates to the core form.
std::vector<ConvergenceRow> prior_convergence_table(const FaceEmbedder& embedder,
                                                    const std::vector<FaceImage>& images,
                                                    const std::vector<Gender>& labels,
                                                    const std::vector<int>& ns);

// CSV schema: cohort,n1,n2,l1
std::string convergence_csv(const std::vector<ConvergenceRow>& rows);

// Binary prior format: magic "ARPF", u32 version, u8 kind, u32 dim,
// u64 n_samples, dim x f64.
void save_prior(const std::string& path, const PriorFeature& prior);
PriorFeature load_prior(const std::string& path);

// ---------------------------------------------------------------------------
// voice gender classifier
// ---------------------------------------------------------------------------

struct GenderPrediction {
    Gender gender = Gender::male;
    double confidence = 0.0; // softmax probability of the predicted class
};

class GenderClassifier {
  public:
    GenderClassifier(Preset preset, uint64_t seed);

    // state_error until the classifier has been trained (or loaded).
    // Exact logit ties resolve to male.
    GenderPrediction classify(const Spectrogram& spec) const;

    Tensor logits(const Tensor& spec_batch) const; // [N,2]

    Network& net() { return net_; }
    const Network& net() const { return net_; }
    bool trained() const { return trained_; }
    void mark_trained() { trained_ = true; }

  private:
    Network net_;
    bool trained_ = false;
};

} // namespace arsp
