#include "arsp/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "arsp/errors.hpp"
#include "arsp/ops.hpp"
#include "arsp/util.hpp"

namespace arsp {

std::string train_prior_name(TrainPrior p) {
    switch (p) {
        case TrainPrior::neutral:
            return "neutral";
        case TrainPrior::gender:
            return "gender";
        case TrainPrior::male:
            return "male";
        case TrainPrior::female:
            return "female";
    }
    return "neutral";
}

TrainPrior train_prior_from_name(const std::string& name) {
    if (name == "neutral") return TrainPrior::neutral;
    if (name == "gender") return TrainPrior::gender;
    if (name == "male") return TrainPrior::male;
    if (name == "female") return TrainPrior::female;
    throw input_error("unknown prior kind: " + name);
}

void TrainConfig::validate() const {
    if (lr <= 0.0 || beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0 ||
        eps <= 0.0) {
        throw parameter_error("train config: optimizer hyperparameters must be positive");
    }
    if (lr_decay <= 0.0 || lr_decay > 1.0 || lr_decay_every <= 0) {
        throw parameter_error("train config: invalid learning-rate schedule");
    }
    if (epochs <= 0 || batch_size <= 0) {
        throw parameter_error("train config: epochs and batch size must be positive");
    }
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_every));
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open config file: " + path);
    }
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') {
            continue;
        }
        const size_t eq = line.find('=', start);
        if (eq == std::string::npos) {
            throw input_error("config line without '=': " + line);
        }
        auto trim = [](std::string s) {
            const size_t a = s.find_first_not_of(" \t\r");
            const size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "preset") {
            cfg.preset = preset_from_name(value);
        } else if (key == "lr") {
            cfg.lr = std::stod(value);
        } else if (key == "beta1") {
            cfg.beta1 = std::stod(value);
        } else if (key == "beta2") {
            cfg.beta2 = std::stod(value);
        } else if (key == "eps") {
            cfg.eps = std::stod(value);
        } else if (key == "lr_decay") {
            cfg.lr_decay = std::stod(value);
        } else if (key == "lr_decay_every") {
            cfg.lr_decay_every = std::stoi(value);
        } else if (key == "epochs") {
            cfg.epochs = std::stoi(value);
        } else if (key == "batch_size") {
            cfg.batch_size = std::stoi(value);
        } else if (key == "seed") {
            cfg.seed = std::stoull(value);
        } else if (key == "fusion") {
            cfg.fusion = fusion_mode_from_name(value);
        } else if (key == "prior") {
            cfg.prior = train_prior_from_name(value);
        } else if (key == "precision") {
            if (value == "f32") {
                cfg.precision = ScalarMode::f32;
            } else if (value == "f64") {
                cfg.precision = ScalarMode::f64;
            } else {
                throw input_error("unknown precision: " + value);
            }
        } else {
            throw input_error("unknown config key: " + key);
        }
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::vector<Param*> params, const TrainConfig& cfg)
    : params_(std::move(params)), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps) {
    for (Param* p : params_) {
        if (p->frozen || !p->value.requires_grad()) {
            throw contract_error("optimizer given a frozen parameter: " + p->name);
        }
        m_.emplace_back(p->value.numel(), 0.0);
        v_.emplace_back(p->value.numel(), 0.0);
    }
}

void AdamOptimizer::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        std::vector<double> next(p.value.data().begin(), p.value.data().end());
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < next.size(); ++j) {
            const double g = p.value.grad_at(j);
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            next[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
        quantize_inplace(next);
        if (scalar_mode() == ScalarMode::f32) {
            quantize_inplace(m);
            quantize_inplace(v);
        }
        p.value = Tensor(p.value.shape(), std::move(next), true);
    }
}

// ---------------------------------------------------------------------------
// loss CSV
// ---------------------------------------------------------------------------

std::string fd_loss_csv(const std::vector<FdLossRow>& rows) {
    std::string out = "step,l_image,l_cs,l_total\n";
    for (const FdLossRow& r : rows) {
        out += std::to_string(r.step) + "," + format_double(r.l_image) + "," +
               format_double(r.l_cs) + "," + format_double(r.l_total) + "\n";
    }
    return out;
}

std::string se_loss_csv(const std::vector<SeLossRow>& rows) {
    std::string out = "step,unit_l2,hidden_l1,id_cos,total\n";
    for (const SeLossRow& r : rows) {
        out += std::to_string(r.step) + "," + format_double(r.unit_l2) + "," +
               format_double(r.hidden_l1) + "," + format_double(r.id_cos) + "," +
               format_double(r.total) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

namespace {

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed, int epoch) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed * 0x9E3779B97F4A7C15ull + static_cast<uint64_t>(epoch) + 1);
    rng.shuffle(idx);
    return idx;
}

// [B, ...dims] raw batch from per-sample tensors (no grad participation).
Tensor stack_rows(const std::vector<Tensor>& rows, const std::vector<size_t>& idx, size_t begin,
                  size_t end) {
    const Tensor& first = rows[idx[begin]];
    std::vector<int> shape;
    shape.push_back(static_cast<int>(end - begin));
    for (int d : first.shape()) {
        shape.push_back(d);
    }
    std::vector<double> data;
    data.reserve((end - begin) * first.numel());
    for (size_t i = begin; i < end; ++i) {
        const auto src = rows[idx[i]].data();
        data.insert(data.end(), src.begin(), src.end());
    }
    return Tensor(std::move(shape), std::move(data));
}

void append_optimizer_records(Checkpoint& ckpt, const AdamOptimizer& opt) {
    const auto& params = opt.params();
    for (size_t i = 0; i < params.size(); ++i) {
        CheckpointRecord m;
        m.name = "__opt__/m/" + params[i]->name;
        m.shape = {static_cast<int>(opt.first_moments()[i].size())};
        for (double v : opt.first_moments()[i]) {
            m.data.push_back(static_cast<float>(v));
        }
        ckpt.records.push_back(std::move(m));
        CheckpointRecord v;
        v.name = "__opt__/v/" + params[i]->name;
        v.shape = {static_cast<int>(opt.second_moments()[i].size())};
        for (double x : opt.second_moments()[i]) {
            v.data.push_back(static_cast<float>(x));
        }
        ckpt.records.push_back(std::move(v));
    }
    CheckpointRecord state;
    state.name = "__train__/state";
    state.shape = {1};
    state.data = {static_cast<float>(opt.step_count())};
    ckpt.records.push_back(std::move(state));
}

} // namespace

Spectrogram preset_spectrogram(const AudioClip& audio, Preset preset) {
    return spectrogram(audio, preset_config(preset).stft);
}

// ---------------------------------------------------------------------------
// stage one: decoder
// ---------------------------------------------------------------------------

TrainFdResult train_fd(const TrainConfig& cfg, const std::vector<SyntheticPair>& data,
                       const FaceEmbedder& embedder) {
    cfg.validate();
    if (data.empty()) {
        throw input_error("train_fd: empty dataset");
    }
    if (embedder.preset() != cfg.preset) {
        throw contract_error("train_fd: embedder preset does not match config");
    }
    ScalarModeGuard precision(cfg.precision);
    const LossWeights weights = LossWeights::defaults(cfg.preset);

    // Frozen-embedder features and raw pixel tensors, computed once.
    std::vector<Tensor> features, faces;
    features.reserve(data.size());
    faces.reserve(data.size());
    {
        NoGradGuard ng;
        for (const SyntheticPair& pair : data) {
            features.push_back(embedder.embed_one(pair.face));
            faces.push_back(pair.face.pixels);
        }
    }

    TrainFdResult result{FaceDecoder(cfg.preset, cfg.seed, /*trainable=*/true), {}, {}, {}, {}};
    std::vector<Param*> trainable;
    for (Param& p : result.decoder.net().params()) {
        trainable.push_back(&p);
    }
    AdamOptimizer adam(trainable, cfg);
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        result.epoch_lr.push_back(lr);
        const auto idx = shuffled_indices(data.size(), cfg.seed, epoch);
        double epoch_loss = 0.0;
        size_t epoch_batches = 0;
        for (size_t begin = 0; begin < idx.size(); begin += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(idx.size(), begin + static_cast<size_t>(cfg.batch_size));
            GradTape::active().clear();
            Tensor feat_batch = stack_rows(features, idx, begin, end);
            Tensor face_batch = stack_rows(faces, idx, begin, end);
            Tensor gen = result.decoder.forward(feat_batch);
            FdLossParts parts = fd_total_loss_parts(gen, face_batch, embedder, weights);

            FdLossRow row;
            row.step = step;
            row.l_image = parts.image.value();
            row.l_cs = parts.cs.value();
            row.l_total = row.l_image + row.l_cs;
            if (!std::isfinite(row.l_total)) {
                throw numeric_error("train_fd: non-finite loss at step " + std::to_string(step));
            }
            result.rows.push_back(row);
            epoch_loss += row.l_total;
            ++epoch_batches;

            backward(parts.total);
            adam.step(lr);
            ++step;
        }
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_batches));
    }

    result.decoder.mark_trained();
    result.checkpoint = checkpoint_from_network(result.decoder.net());
    append_optimizer_records(result.checkpoint, adam);
    return result;
}

// ---------------------------------------------------------------------------
// stage two: encoder against the frozen decoder
// ---------------------------------------------------------------------------

TrainSeResult train_se(const TrainConfig& cfg, const std::vector<SyntheticPair>& data,
                       const Checkpoint& fd_checkpoint, const PriorBank* bank,
                       const FaceEmbedder& embedder) {
    cfg.validate();
    if (data.empty()) {
        throw input_error("train_se: empty dataset");
    }
    if (fd_checkpoint.records.empty()) {
        throw state_error("train_se: face-decoder checkpoint is empty");
    }
    if (fd_checkpoint.preset != cfg.preset) {
        throw contract_error("train_se: decoder checkpoint preset does not match config");
    }
    if (cfg.fusion != FusionMode::none && bank == nullptr) {
        throw state_error("train_se: fusion mode " + fusion_mode_name(cfg.fusion) +
                          " requires a prior bank");
    }
    ScalarModeGuard precision(cfg.precision);
    const LossWeights weights = LossWeights::defaults(cfg.preset);

    // Rebuild the decoder from its checkpoint and freeze it.
    FaceDecoder decoder(cfg.preset, cfg.seed, /*trainable=*/false);
    apply_checkpoint(decoder.net(), fd_checkpoint);
    decoder.net().set_frozen(true);
    decoder.mark_trained();
    const uint64_t fd_before = decoder.net().params_hash();
    const uint64_t embed_before = embedder.params_hash();
    const LinearLayer decoder_fc1 = decoder.fc1_layer();
    const LinearLayer& embed_fc3 = embedder.fc3();

    // Per-sample priors resolved up front.
    std::vector<const PriorFeature*> priors(data.size(), nullptr);
    if (cfg.fusion != FusionMode::none) {
        for (size_t i = 0; i < data.size(); ++i) {
            switch (cfg.prior) {
                case TrainPrior::neutral:
                    priors[i] = &bank->get(PriorKind::neutral);
                    break;
                case TrainPrior::gender:
                    priors[i] = &bank->get(data[i].gender == Gender::male ? PriorKind::male
                                                                          : PriorKind::female);
                    break;
                case TrainPrior::male:
                    priors[i] = &bank->get(PriorKind::male);
                    break;
                case TrainPrior::female:
                    priors[i] = &bank->get(PriorKind::female);
                    break;
            }
        }
    }

    // Spectrograms and target features, computed once.
    std::vector<Tensor> specs, targets;
    specs.reserve(data.size());
    targets.reserve(data.size());
    {
        NoGradGuard ng;
        for (const SyntheticPair& pair : data) {
            Spectrogram sp = preset_spectrogram(pair.audio, cfg.preset);
            specs.push_back(reshape(sp.values, {1, 1, sp.freq_bins(), sp.frames()}));
            targets.push_back(embedder.embed_one(pair.face));
        }
    }

    const int d = preset_config(cfg.preset).feature_dim;
    TrainSeResult result{SpeechEncoder(cfg.preset, cfg.seed, cfg.fusion, /*trainable=*/true),
                         {}, {}, {}, {}, fd_before, fd_before};
    // Parameter slots must come from their final home; the fusion fc lives
    // inline in the encoder object.
    AdamOptimizer adam(result.encoder.trainable_params(), cfg);
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        result.epoch_lr.push_back(lr);
        const auto idx = shuffled_indices(data.size(), cfg.seed, epoch);
        double epoch_loss = 0.0;
        size_t epoch_batches = 0;
        for (size_t begin = 0; begin < idx.size(); begin += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(idx.size(), begin + static_cast<size_t>(cfg.batch_size));
            GradTape::active().clear();

            Tensor batch_total;
            SeLossRow row;
            for (size_t i = begin; i < end; ++i) {
                const size_t k = idx[i];
                Tensor s_f = reshape(result.encoder.forward(specs[k]), {d});
                Tensor final_feat = result.encoder.fuse(s_f, priors[k]);
                TriLossParts parts =
                    se_tri_loss_parts(targets[k], final_feat, decoder_fc1, embed_fc3, weights);
                row.unit_l2 += weights.lambda1 * parts.unit_l2.value();
                row.hidden_l1 += weights.lambda2 * parts.hidden_l1.value();
                row.id_cos += weights.lambda3 * parts.id_cos.value();
                batch_total = batch_total.defined() ? add(batch_total, parts.total) : parts.total;
            }
            const double inv = 1.0 / static_cast<double>(end - begin);
            Tensor loss = mul_scalar(batch_total, inv);
            row.step = step;
            row.unit_l2 *= inv;
            row.hidden_l1 *= inv;
            row.id_cos *= inv;
            row.total = row.unit_l2 + row.hidden_l1 + row.id_cos;
            if (!std::isfinite(row.total)) {
                throw numeric_error("train_se: non-finite loss at step " + std::to_string(step));
            }
            result.rows.push_back(row);
            epoch_loss += row.total;
            ++epoch_batches;

            backward(loss);
            adam.step(lr);
            ++step;
        }
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_batches));
    }

    result.fd_hash_after = decoder.net().params_hash();
    if (result.fd_hash_after != fd_before) {
        throw contract_error("train_se: frozen decoder parameters mutated during training");
    }
    if (embedder.params_hash() != embed_before) {
        throw contract_error("train_se: frozen embedder parameters mutated during training");
    }

    result.encoder.mark_trained();
    result.checkpoint = checkpoint_from_network(result.encoder.net());
    if (const LinearLayer* fc = result.encoder.fusion_fc()) {
        result.checkpoint.records.push_back(
            record_from_tensor("fusion_fc.weight", fc->weight, false));
        result.checkpoint.records.push_back(record_from_tensor("fusion_fc.bias", fc->bias, false));
    }
    append_optimizer_records(result.checkpoint, adam);
    return result;
}

// ---------------------------------------------------------------------------
// gender classifier
// ---------------------------------------------------------------------------

namespace {

double classifier_accuracy(const GenderClassifier& clf, const std::vector<Tensor>& specs,
                           const std::vector<int>& labels) {
    NoGradGuard ng;
    int hits = 0;
    for (size_t i = 0; i < specs.size(); ++i) {
        Tensor out = clf.logits(specs[i]);
        const std::vector<double> probs = softmax_rows(out);
        const int pred = probs[0] >= probs[1] ? 0 : 1;
        if (pred == labels[i]) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(specs.size());
}

} // namespace

GenderTrainResult train_gender_classifier(const TrainConfig& cfg,
                                          const std::vector<SyntheticPair>& train_data,
                                          const std::vector<SyntheticPair>& holdout_data) {
    cfg.validate();
    if (train_data.empty() || holdout_data.empty()) {
        throw input_error("train_gender_classifier: empty dataset");
    }
    ScalarModeGuard precision(cfg.precision);

    auto to_specs = [&](const std::vector<SyntheticPair>& ds, std::vector<Tensor>& specs,
                        std::vector<int>& labels) {
        NoGradGuard ng;
        for (const SyntheticPair& pair : ds) {
            Spectrogram sp = preset_spectrogram(pair.audio, cfg.preset);
            specs.push_back(reshape(sp.values, {1, 1, sp.freq_bins(), sp.frames()}));
            labels.push_back(pair.gender == Gender::male ? 0 : 1);
        }
    };
    std::vector<Tensor> train_specs, holdout_specs;
    std::vector<int> train_labels, holdout_labels;
    to_specs(train_data, train_specs, train_labels);
    to_specs(holdout_data, holdout_specs, holdout_labels);

    GenderTrainResult result{GenderClassifier(cfg.preset, cfg.seed), 0.0, 0.0};
    std::vector<Param*> trainable;
    for (Param& p : result.classifier.net().params()) {
        trainable.push_back(&p);
    }
    AdamOptimizer adam(trainable, cfg);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        const auto idx = shuffled_indices(train_specs.size(), cfg.seed, epoch);
        for (size_t begin = 0; begin < idx.size(); begin += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(idx.size(), begin + static_cast<size_t>(cfg.batch_size));
            GradTape::active().clear();
            Tensor batch = stack_rows(train_specs, idx, begin, end);
            batch = reshape(batch, {static_cast<int>(end - begin), batch.dim(2), batch.dim(3),
                                    batch.dim(4)});
            std::vector<int> labels;
            for (size_t i = begin; i < end; ++i) {
                labels.push_back(train_labels[idx[i]]);
            }
            Tensor loss = softmax_cross_entropy(result.classifier.logits(batch), labels);
            if (!std::isfinite(loss.value())) {
                throw numeric_error("train_gender_classifier: non-finite loss");
            }
            backward(loss);
            adam.step(lr);
        }
    }

    result.classifier.mark_trained();
    result.train_accuracy = classifier_accuracy(result.classifier, train_specs, train_labels);
    result.holdout_accuracy =
        classifier_accuracy(result.classifier, holdout_specs, holdout_labels);
    return result;
}

} // namespace arsp
