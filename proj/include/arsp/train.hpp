#pragma once

#include <map>
#include <string>
#include <vector>

#include "arsp/checkpoint.hpp"
#include "arsp/dataset.hpp"
#include "arsp/embedder.hpp"
#include "arsp/face_decoder.hpp"
#include "arsp/losses.hpp"
#include "arsp/prior.hpp"
#include "arsp/speech_encoder.hpp"

namespace arsp {

// Which prior feeds the residual fusion during encoder training.
enum class TrainPrior { neutral, gender, male, female };

std::string train_prior_name(TrainPrior p);
TrainPrior train_prior_from_name(const std::string& name);

struct TrainConfig {
    Preset preset = Preset::tiny;
    double lr = 0.001;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-4;
    double lr_decay = 0.9;
    int lr_decay_every = 2; // epochs
    int epochs = 50;
    int batch_size = 16;
    uint64_t seed = 1;
    FusionMode fusion = FusionMode::none;
    TrainPrior prior = TrainPrior::neutral;
    ScalarMode precision = ScalarMode::f32;

    void validate() const;
};

// lr(epoch) = lr * decay^floor(epoch / every), epochs counted from 0.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Key=value config files; '#' starts a comment line.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv);

// Adam over rebindable parameter slots. Tensors themselves stay immutable:
// a step binds fresh value tensors into the slots and clears their grads.
class AdamOptimizer {
  public:
    AdamOptimizer(std::vector<Param*> params, const TrainConfig& cfg);

    void step(double lr);
    size_t step_count() const { return t_; }
    const std::vector<Param*>& params() const { return params_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

  private:
    std::vector<Param*> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    size_t t_ = 0;
};

struct FdLossRow {
    long step = 0;
    double l_image = 0.0;
    double l_cs = 0.0;
    double l_total = 0.0; // always the sum of the two columns
};

struct SeLossRow {
    long step = 0;
    double unit_l2 = 0.0;   // lambda1-weighted
    double hidden_l1 = 0.0; // lambda2-weighted
    double id_cos = 0.0;    // lambda3-weighted
    double total = 0.0;     // sum of the three columns
};

std::string fd_loss_csv(const std::vector<FdLossRow>& rows);
std::string se_loss_csv(const std::vector<SeLossRow>& rows);

struct TrainFdResult {
    FaceDecoder decoder;
    Checkpoint checkpoint;
    std::vector<FdLossRow> rows;
    std::vector<double> epoch_lr;
    std::vector<double> epoch_mean_loss;
};

// Stage one: decoder reconstructs faces from frozen-embedder features.
// Aborts with numeric_error on a non-finite loss.
TrainFdResult train_fd(const TrainConfig& cfg, const std::vector<SyntheticPair>& data,
                       const FaceEmbedder& embedder);

struct TrainSeResult {
    SpeechEncoder encoder;
    Checkpoint checkpoint;
    std::vector<SeLossRow> rows;
    std::vector<double> epoch_lr;
    std::vector<double> epoch_mean_loss;
    uint64_t fd_hash_before = 0;
    uint64_t fd_hash_after = 0;
};

// Stage two: encoder training against frozen decoder and embedder. The
// decoder is reconstructed from its checkpoint with frozen flags set and is
// verified bit-identical afterwards (contract_error on mutation). The bank
// may be null only for fusion mode none.
TrainSeResult train_se(const TrainConfig& cfg, const std::vector<SyntheticPair>& data,
                       const Checkpoint& fd_checkpoint, const PriorBank* bank,
                       const FaceEmbedder& embedder);

struct GenderTrainResult {
    GenderClassifier classifier;
    double train_accuracy = 0.0;
    double holdout_accuracy = 0.0;
};

GenderTrainResult train_gender_classifier(const TrainConfig& cfg,
                                          const std::vector<SyntheticPair>& train_data,
                                          const std::vector<SyntheticPair>& holdout_data);

// Spectrogram of one clip under the preset's STFT grid.
Spectrogram preset_spectrogram(const AudioClip& audio, Preset preset);

} // namespace arsp
