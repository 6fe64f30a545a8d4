// arsp: speech portrait toolkit.
//
// Generates synthetic face/voice data, trains the face decoder and the
// residual speech encoder in two stages, builds prior face features, and
// evaluates feature-space similarity metrics.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "arsp/checkpoint.hpp"
#include "arsp/dataset.hpp"
#include "arsp/embedder.hpp"
#include "arsp/errors.hpp"
#include "arsp/face_decoder.hpp"
#include "arsp/image.hpp"
#include "arsp/metrics.hpp"
#include "arsp/prior.hpp"
#include "arsp/speech_encoder.hpp"
#include "arsp/train.hpp"
#include "arsp/util.hpp"

namespace fs = std::filesystem;
using namespace arsp;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> preset;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<double> lr;
    std::optional<std::string> fusion;
    std::optional<std::string> prior;
};

TrainConfig resolve_config(const GlobalOpts& g) {
    TrainConfig cfg;
    if (!g.config_path.empty()) {
        apply_config(cfg, parse_config_file(g.config_path));
    }
    if (g.seed) cfg.seed = *g.seed;
    if (g.preset) cfg.preset = preset_from_name(*g.preset);
    if (g.epochs) cfg.epochs = *g.epochs;
    if (g.batch_size) cfg.batch_size = *g.batch_size;
    if (g.lr) cfg.lr = *g.lr;
    if (g.fusion) cfg.fusion = fusion_mode_from_name(*g.fusion);
    if (g.prior) cfg.prior = train_prior_from_name(*g.prior);
    cfg.validate();
    return cfg;
}

FaceDecoder load_decoder(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    FaceDecoder decoder(ckpt.preset, 0, /*trainable=*/false);
    apply_checkpoint(decoder.net(), ckpt);
    decoder.net().set_frozen(true);
    decoder.mark_trained();
    return decoder;
}

SpeechEncoder load_encoder(const std::string& path, FusionMode mode) {
    Checkpoint ckpt = load_checkpoint(path);
    // the fusion fc rides alongside the encoder stack in the same file
    Checkpoint net_only;
    net_only.preset = ckpt.preset;
    const CheckpointRecord* w = nullptr;
    const CheckpointRecord* b = nullptr;
    for (const CheckpointRecord& r : ckpt.records) {
        if (r.name == "fusion_fc.weight") {
            w = &r;
        } else if (r.name == "fusion_fc.bias") {
            b = &r;
        } else {
            net_only.records.push_back(r);
        }
    }
    SpeechEncoder encoder(ckpt.preset, 0, mode, /*trainable=*/false);
    apply_checkpoint(encoder.net(), net_only);
    if (mode == FusionMode::sum_fc) {
        if (!w || !b) {
            throw state_error("encoder checkpoint lacks the fusion fc expected by sum_fc");
        }
        encoder.set_fusion_fc(tensor_from_record(*w, false), tensor_from_record(*b, false));
    }
    encoder.mark_trained();
    return encoder;
}

PriorBank bank_from_dataset(const FaceEmbedder& embedder,
                            const std::vector<SyntheticPair>& data) {
    std::vector<FaceImage> images;
    std::vector<Gender> labels;
    for (const auto& pair : data) {
        images.push_back(pair.face);
        labels.push_back(pair.gender);
    }
    return build_prior_bank(embedder, images, labels);
}

std::vector<EvalSample> eval_samples(const std::vector<SyntheticPair>& data, Preset preset) {
    std::vector<EvalSample> samples;
    samples.reserve(data.size());
    for (const auto& pair : data) {
        EvalSample s;
        s.spec = preset_spectrogram(pair.audio, preset);
        s.face = pair.face;
        s.gender = pair.gender;
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<SyntheticPair> filter_gender(std::vector<SyntheticPair> data, TrainPrior prior) {
    if (prior != TrainPrior::male && prior != TrainPrior::female) {
        return data;
    }
    const Gender keep = prior == TrainPrior::male ? Gender::male : Gender::female;
    std::vector<SyntheticPair> out;
    for (auto& pair : data) {
        if (pair.gender == keep) {
            out.push_back(std::move(pair));
        }
    }
    if (out.empty()) {
        throw input_error("no samples left after gender filtering");
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"arsp: residual speech portrait toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may follow the subcommand

    GlobalOpts g;
    app.add_option("--config", g.config_path, "key=value config file");
    app.add_option("--seed", g.seed, "training / model seed");
    app.add_option("--preset", g.preset, "scale preset: full | tiny");
    app.add_option("--epochs", g.epochs, "training epochs");
    app.add_option("--batch-size", g.batch_size, "batch size");
    app.add_option("--lr", g.lr, "learning rate");
    app.add_option("--fusion", g.fusion, "fusion mode: none | sum | sum_fc");
    app.add_option("--prior", g.prior, "prior kind: neutral | gender | male | female");

    int n_samples = 200;
    uint64_t data_seed = 1234;
    app.add_option("--n", n_samples, "synthetic sample count")->capture_default_str();
    app.add_option("--data-seed", data_seed, "synthetic dataset seed")->capture_default_str();

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "write synthetic wav/png pairs");
    std::string gen_out = "data";
    gen->add_option("--out", gen_out, "output directory")->capture_default_str();

    // train-fd
    auto* tfd = app.add_subcommand("train-fd", "train the face decoder");
    std::string tfd_out = "runs/fd";
    tfd->add_option("--out", tfd_out, "output directory")->capture_default_str();

    // train-se
    auto* tse = app.add_subcommand("train-se", "train the speech encoder (frozen decoder)");
    std::string tse_fd = "runs/fd/fd.arck";
    std::string tse_out = "runs/se";
    tse->add_option("--fd", tse_fd, "face-decoder checkpoint")->capture_default_str();
    tse->add_option("--out", tse_out, "output directory")->capture_default_str();

    // prior-build
    auto* pbuild = app.add_subcommand("prior-build", "compute and persist prior face features");
    std::string pbuild_out = "priors";
    pbuild->add_option("--out", pbuild_out, "output directory")->capture_default_str();

    // prior-table
    auto* ptable = app.add_subcommand("prior-table", "prior convergence analysis CSV");
    std::string ptable_out = "prior_table.csv";
    std::string ladder = "10,50,100,500,1000,5000,10000";
    ptable->add_option("--out", ptable_out, "output CSV path")->capture_default_str();
    ptable->add_option("--ladder", ladder, "comma-separated sample ladder")
        ->capture_default_str();

    // face-to-face
    auto* f2f = app.add_subcommand("face-to-face", "decoder round-trip benchmark");
    std::string f2f_fd = "runs/fd/fd.arck";
    std::string f2f_out = "face_to_face.csv";
    f2f->add_option("--fd", f2f_fd, "face-decoder checkpoint")->capture_default_str();
    f2f->add_option("--out", f2f_out, "output CSV path")->capture_default_str();

    // eval
    auto* ev = app.add_subcommand("eval", "feature-similarity metrics for one model");
    std::string ev_fd = "runs/fd/fd.arck";
    std::string ev_se = "runs/se/se.arck";
    std::string ev_tag = "model";
    std::string ev_prior_file;
    std::string ev_out = "metrics.csv";
    bool ev_unitized = false;
    ev->add_option("--fd", ev_fd, "face-decoder checkpoint")->capture_default_str();
    ev->add_option("--se", ev_se, "speech-encoder checkpoint")->capture_default_str();
    ev->add_option("--tag", ev_tag, "row label")->capture_default_str();
    ev->add_option("--prior-file", ev_prior_file, "prior feature (.arpf) for fused modes");
    ev->add_option("--out", ev_out, "output CSV path")->capture_default_str();
    ev->add_flag("--unitized", ev_unitized, "compare unit-normalized features");

    // infer
    auto* inf = app.add_subcommand("infer", "audio file to face image");
    std::string inf_audio;
    std::string inf_fd = "runs/fd/fd.arck";
    std::string inf_se = "runs/se/se.arck";
    std::string inf_prior_file;
    std::string inf_out = "face.png";
    std::string inf_spec_out;
    inf->add_option("--audio", inf_audio, "input wav file")->required();
    inf->add_option("--fd", inf_fd, "face-decoder checkpoint")->capture_default_str();
    inf->add_option("--se", inf_se, "speech-encoder checkpoint")->capture_default_str();
    inf->add_option("--prior-file", inf_prior_file, "prior feature (.arpf) for fused modes");
    inf->add_option("--out", inf_out, "output png path")->capture_default_str();
    inf->add_option("--save-spectrogram", inf_spec_out, "also dump the spectrogram (.arsp)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    TrainConfig cfg = resolve_config(g);

    if (gen->parsed()) {
        fs::create_directories(gen_out);
        auto data = generate_dataset(data_seed, n_samples, cfg.preset);
        std::string manifest = "id,gender,f0_latent\n";
        for (size_t i = 0; i < data.size(); ++i) {
            char base[32];
            std::snprintf(base, sizeof(base), "%04zu", i);
            save_wav(gen_out + "/" + base + ".wav", data[i].audio);
            save_png(gen_out + "/" + base + ".png", data[i].face);
            manifest += std::string(base) + "," +
                        (data[i].gender == Gender::male ? "male" : "female") + "," +
                        format_double(data[i].latent[0]) + "\n";
        }
        write_text_file(gen_out + "/manifest.csv", manifest);
        std::cout << "wrote " << data.size() << " pairs to " << gen_out << "\n";
        return 0;
    }

    if (tfd->parsed()) {
        fs::create_directories(tfd_out);
        FaceEmbedder embedder(cfg.preset);
        auto data = generate_dataset(data_seed, n_samples, cfg.preset);
        TrainFdResult result = train_fd(cfg, data, embedder);
        save_checkpoint(tfd_out + "/fd.arck", result.checkpoint);
        write_text_file(tfd_out + "/fd_loss.csv", fd_loss_csv(result.rows));
        std::cout << "decoder trained: epoch loss " << format_double(result.epoch_mean_loss.front())
                  << " -> " << format_double(result.epoch_mean_loss.back()) << "\n"
                  << "checkpoint: " << tfd_out << "/fd.arck\n";
        return 0;
    }

    if (tse->parsed()) {
        fs::create_directories(tse_out);
        FaceEmbedder embedder(cfg.preset);
        auto data = filter_gender(generate_dataset(data_seed, n_samples, cfg.preset), cfg.prior);
        Checkpoint fd_ckpt = load_checkpoint(tse_fd);
        std::optional<PriorBank> bank;
        if (cfg.fusion != FusionMode::none) {
            bank = bank_from_dataset(embedder, data);
        }
        TrainSeResult result =
            train_se(cfg, data, fd_ckpt, bank ? &*bank : nullptr, embedder);
        save_checkpoint(tse_out + "/se.arck", result.checkpoint);
        write_text_file(tse_out + "/se_loss.csv", se_loss_csv(result.rows));
        std::cout << "encoder trained: epoch loss " << format_double(result.epoch_mean_loss.front())
                  << " -> " << format_double(result.epoch_mean_loss.back()) << "\n"
                  << "checkpoint: " << tse_out << "/se.arck\n";
        return 0;
    }

    if (pbuild->parsed()) {
        fs::create_directories(pbuild_out);
        FaceEmbedder embedder(cfg.preset);
        auto faces = generate_faces(data_seed, n_samples, cfg.preset);
        PriorBank bank = bank_from_dataset(embedder, faces);
        save_prior(pbuild_out + "/neutral.arpf", bank.get(PriorKind::neutral));
        if (bank.has(PriorKind::male)) {
            save_prior(pbuild_out + "/male.arpf", bank.get(PriorKind::male));
        }
        if (bank.has(PriorKind::female)) {
            save_prior(pbuild_out + "/female.arpf", bank.get(PriorKind::female));
        }
        std::cout << "priors written to " << pbuild_out << "\n";
        return 0;
    }

    if (ptable->parsed()) {
        std::vector<int> ns;
        size_t pos = 0;
        while (pos < ladder.size()) {
            size_t next = ladder.find(',', pos);
            if (next == std::string::npos) next = ladder.size();
            ns.push_back(std::stoi(ladder.substr(pos, next - pos)));
            pos = next + 1;
        }
        FaceEmbedder embedder(cfg.preset);
        // each gender cohort needs the full ladder on its own
        auto faces = generate_faces(data_seed, 2 * ns.back() + 64, cfg.preset);
        std::vector<FaceImage> images;
        std::vector<Gender> labels;
        for (const auto& pair : faces) {
            images.push_back(pair.face);
            labels.push_back(pair.gender);
        }
        auto rows = prior_convergence_table(embedder, images, labels, ns);
        write_text_file(ptable_out, convergence_csv(rows));
        std::cout << "convergence table written to " << ptable_out << "\n";
        return 0;
    }

    if (f2f->parsed()) {
        FaceDecoder decoder = load_decoder(f2f_fd);
        FaceEmbedder embedder(decoder.preset());
        auto faces = generate_faces(data_seed, n_samples, decoder.preset());
        std::vector<FaceImage> images;
        for (const auto& pair : faces) {
            images.push_back(pair.face);
        }
        MetricsReport report = face_to_face_benchmark(embedder, decoder, images);
        write_text_file(f2f_out, metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
        std::cout << metrics_csv_header() << "\n" << metrics_csv_row(report) << "\n";
        return 0;
    }

    if (ev->parsed()) {
        FaceDecoder decoder = load_decoder(ev_fd);
        SpeechEncoder encoder = load_encoder(ev_se, cfg.fusion);
        FaceEmbedder embedder(decoder.preset());
        std::optional<PriorFeature> prior;
        if (cfg.fusion != FusionMode::none) {
            if (ev_prior_file.empty()) {
                throw input_error("eval: fused modes need --prior-file");
            }
            prior = load_prior(ev_prior_file);
        }
        auto data = generate_dataset(data_seed, n_samples, decoder.preset());
        auto samples = eval_samples(data, decoder.preset());
        AblationModel model{ev_tag, &encoder, prior ? &*prior : nullptr};
        MetricsReport report = evaluate_model(model, decoder, embedder, samples, ev_unitized);
        write_text_file(ev_out, metrics_csv_header() + "\n" + metrics_csv_row(report) + "\n");
        std::cout << metrics_csv_header() << "\n" << metrics_csv_row(report) << "\n";
        return 0;
    }

    if (inf->parsed()) {
        FaceDecoder decoder = load_decoder(inf_fd);
        SpeechEncoder encoder = load_encoder(inf_se, cfg.fusion);
        std::optional<PriorFeature> prior;
        if (cfg.fusion != FusionMode::none) {
            if (inf_prior_file.empty()) {
                throw input_error("infer: fused modes need --prior-file");
            }
            prior = load_prior(inf_prior_file);
        }
        AudioClip raw = load_wav(inf_audio);
        AudioClip normalized = normalize_clip(resample_mono(raw));
        Spectrogram spec = preset_spectrogram(normalized, decoder.preset());
        if (!inf_spec_out.empty()) {
            save_spectrogram(inf_spec_out, spec);
        }
        NoGradGuard ng;
        Tensor s_f = encoder.se_forward(spec);
        Tensor feat = encoder.fuse(s_f, prior ? &*prior : nullptr);
        FaceImage face = decoder.fd_forward(feat);
        save_png(inf_out, face);
        std::cout << "face written to " << inf_out << "\n";
        return 0;
    }

    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
