#include "arsp/presets.hpp"

namespace arsp {

const PresetConfig& preset_config(Preset p) {
    static const PresetConfig full{
        Preset::full,
        4096,              // feature_dim
        257, 598,          // spectrogram F x T
        {400, 160, 512, 0.3},
        224,               // image_size
        1000,              // fd_fc1_dim
        512, 7,            // fd seed map 512 x 7 x 7
        2622,              // embed_fc3_dim
        16, 7,             // cbam reduction / spatial kernel
    };
    static const PresetConfig tiny{
        Preset::tiny,
        512,
        33, 74,            // F = 64/2+1, T = (96000-64)/1300 + 1
        {64, 1300, 64, 0.3},
        32,
        128,
        32, 4,             // fd seed map 32 x 4 x 4
        328,
        2, 3,
    };
    return p == Preset::full ? full : tiny;
}

namespace {

LayerDesc conv(std::string name, int cin, int cout, std::pair<int, int> k,
               std::pair<int, int> s, std::pair<int, int> pad, Act act) {
    LayerDesc l;
    l.kind = LayerKind::conv;
    l.name = std::move(name);
    l.in_channels = cin;
    l.out_channels = cout;
    l.kernel = k;
    l.stride = s;
    l.padding = pad;
    l.act = act;
    return l;
}

LayerDesc convt(std::string name, int cin, int cout, int k, int s, int pad, int opad, Act act) {
    LayerDesc l;
    l.kind = LayerKind::conv_transpose;
    l.name = std::move(name);
    l.in_channels = cin;
    l.out_channels = cout;
    l.kernel = {k, k};
    l.stride = {s, s};
    l.padding = {pad, pad};
    l.out_padding = {opad, opad};
    l.act = act;
    return l;
}

LayerDesc max_pool(std::string name, std::pair<int, int> k, std::pair<int, int> s) {
    LayerDesc l;
    l.kind = LayerKind::max_pool;
    l.name = std::move(name);
    l.kernel = k;
    l.stride = s;
    return l;
}

LayerDesc avg_global(std::string name) {
    LayerDesc l;
    l.kind = LayerKind::avg_pool_global;
    l.name = std::move(name);
    return l;
}

LayerDesc flatten(std::string name) {
    LayerDesc l;
    l.kind = LayerKind::flatten;
    l.name = std::move(name);
    return l;
}

LayerDesc linear(std::string name, int din, int dout, Act act) {
    LayerDesc l;
    l.kind = LayerKind::linear;
    l.name = std::move(name);
    l.in_features = din;
    l.out_features = dout;
    l.act = act;
    return l;
}

LayerDesc reshape_to(std::string name, int c, int h, int w) {
    LayerDesc l;
    l.kind = LayerKind::reshape;
    l.name = std::move(name);
    l.target_chw = {c, h, w};
    return l;
}

LayerDesc cbam_layer(std::string name, int channels, int reduction, int spatial_kernel) {
    LayerDesc l;
    l.kind = LayerKind::cbam;
    l.name = std::move(name);
    l.in_channels = channels;
    l.reduction = reduction;
    l.spatial_kernel = spatial_kernel;
    return l;
}

} // namespace

NetworkSpec se_spec(Preset p) {
    const PresetConfig& cfg = preset_config(p);
    const bool full = p == Preset::full;
    const int c1 = full ? 64 : 8;
    const int c2 = full ? 128 : 16;
    const int c3 = full ? 256 : 32;
    const int c4 = full ? 512 : 64;
    const int c5 = full ? 512 : 64;
    // The tiny grid is too small for the full 5x3 pool; a 1x3 window at
    // stride 1x2 keeps the row (and its asymmetry) while staying legal.
    const std::pair<int, int> pool3_k = full ? std::pair{5, 3} : std::pair{1, 3};
    const std::pair<int, int> pool3_s = full ? std::pair{3, 2} : std::pair{1, 2};

    NetworkSpec spec;
    spec.preset = p;
    spec.tag = "se";
    spec.layers = {
        conv("conv1", 1, c1, {7, 7}, {2, 2}, {1, 1}, Act::relu),
        max_pool("maxpool1", {3, 3}, {2, 2}),
        conv("conv2", c1, c2, {5, 5}, {2, 2}, {1, 1}, Act::relu),
        max_pool("maxpool2", {3, 3}, {2, 2}),
        conv("conv3", c2, c3, {3, 3}, {1, 1}, {1, 1}, Act::relu),
        conv("conv4", c3, c4, {3, 3}, {1, 1}, {1, 1}, Act::relu),
        conv("conv5", c4, c5, {3, 3}, {1, 1}, {1, 1}, Act::relu),
        max_pool("maxpool3", pool3_k, pool3_s),
        cbam_layer("cbam", c5, cfg.cbam_reduction, cfg.cbam_spatial_kernel),
        // "Fc1" lifts channels with a 1x1 conv before pooling away the
        // remaining time-frequency extent; "Fc2" is the fc fusion layer.
        conv("fc1", c5, cfg.feature_dim, {1, 1}, {1, 1}, {0, 0}, Act::relu),
        avg_global("avgpool1"),
        flatten("flatten"),
        linear("fc2", cfg.feature_dim, cfg.feature_dim, Act::none),
    };
    return spec;
}

NetworkSpec fd_spec(Preset p) {
    const PresetConfig& cfg = preset_config(p);
    const bool full = p == Preset::full;
    const int c512 = full ? 512 : 32;
    const int c256 = full ? 256 : 16;
    const int c64 = full ? 64 : 4;
    const int c32 = full ? 32 : 2;
    const int cup = full ? 64 : 4; // extra upsampling stage output
    // The tiny grid starts at 4x4 and reaches 32 with three doublings, so
    // the last two rows run at stride 1 there; keeping 5x5 kernels on a
    // sub-4x4 map would starve the signal.
    const int s11 = full ? 2 : 1, op11 = full ? 1 : 0;
    const int s12 = full ? 2 : 1, op12 = full ? 1 : 0;

    NetworkSpec spec;
    spec.preset = p;
    spec.tag = "fd";
    spec.layers = {
        linear("fc1", cfg.feature_dim, cfg.fd_fc1_dim, Act::relu),
        linear("fc2", cfg.fd_fc1_dim, cfg.fd_seed_channels * cfg.fd_seed_hw * cfg.fd_seed_hw,
               Act::relu),
        reshape_to("reshape", cfg.fd_seed_channels, cfg.fd_seed_hw, cfg.fd_seed_hw),
        convt("convtrans1", c512, c512, 5, 2, 2, 1, Act::relu),
        convt("convtrans2", c512, c512, 5, 1, 2, 0, Act::relu),
        convt("convtrans3", c512, c512, 5, 1, 2, 0, Act::relu),
        convt("convtrans4", c512, c512, 5, 1, 2, 0, Act::relu),
        convt("convtrans5", c512, c512, 5, 1, 2, 0, Act::relu),
        convt("convtrans6", c512, c256, 5, 2, 2, 1, Act::relu),
        convt("convtrans7", c256, c256, 5, 1, 2, 0, Act::relu),
        convt("convtrans8", c256, c256, 5, 1, 2, 0, Act::relu),
        cbam_layer("cbam", c256, cfg.cbam_reduction, cfg.cbam_spatial_kernel),
        convt("convtrans9", c256, c64, 5, 2, 2, 1, Act::relu),
        convt("convtrans10", c64, c64, 5, 1, 2, 0, Act::relu),
        convt("convtrans11", c64, c32, 5, s11, 2, op11, Act::relu),
        // The four stride-2 rows above stop at half the image extent; this
        // extra stage restores the full-size pre-RGB map.
        convt("convtrans12", c32, cup, 5, s12, 2, op12, Act::relu),
        conv("conv_out", cup, 3, {1, 1}, {1, 1}, {0, 0}, Act::sigmoid),
    };
    return spec;
}

NetworkSpec embedder_spec(Preset p) {
    const PresetConfig& cfg = preset_config(p);
    const bool full = p == Preset::full;

    NetworkSpec spec;
    spec.preset = p;
    spec.tag = "embedder";
    if (full) {
        spec.layers = {
            conv("conv1", 3, 16, {7, 7}, {4, 4}, {3, 3}, Act::relu),   // 224 -> 56
            conv("conv2", 16, 32, {5, 5}, {4, 4}, {2, 2}, Act::relu),  // 56 -> 14
            conv("conv3", 32, 64, {3, 3}, {2, 2}, {1, 1}, Act::relu),  // 14 -> 7
            avg_global("avgpool"),
            flatten("flatten"),
            linear("fc1", 64, 512, Act::relu),
            linear("fc2", 512, cfg.feature_dim, Act::none),
        };
    } else {
        spec.layers = {
            conv("conv1", 3, 8, {5, 5}, {2, 2}, {2, 2}, Act::relu),    // 32 -> 16
            conv("conv2", 8, 16, {3, 3}, {2, 2}, {1, 1}, Act::relu),   // 16 -> 8
            conv("conv3", 16, 32, {3, 3}, {2, 2}, {1, 1}, Act::relu),  // 8 -> 4
            avg_global("avgpool"),
            flatten("flatten"),
            linear("fc1", 32, 64, Act::relu),
            linear("fc2", 64, cfg.feature_dim, Act::none),
        };
    }
    return spec;
}

NetworkSpec gender_net_spec(Preset p) {
    const bool full = p == Preset::full;
    const int c1 = full ? 16 : 4;
    const int c2 = full ? 32 : 8;
    const int c3 = full ? 64 : 16;
    const std::pair<int, int> pool3_k = full ? std::pair{5, 3} : std::pair{1, 3};
    const std::pair<int, int> pool3_s = full ? std::pair{3, 2} : std::pair{1, 2};

    NetworkSpec spec;
    spec.preset = p;
    spec.tag = "gender";
    spec.layers = {
        conv("conv1", 1, c1, {7, 7}, {2, 2}, {1, 1}, Act::relu),
        max_pool("maxpool1", {3, 3}, {2, 2}),
        conv("conv2", c1, c2, {5, 5}, {2, 2}, {1, 1}, Act::relu),
        max_pool("maxpool2", {3, 3}, {2, 2}),
        conv("conv3", c2, c3, {3, 3}, {1, 1}, {1, 1}, Act::relu),
        conv("conv4", c3, c3, {3, 3}, {1, 1}, {1, 1}, Act::relu),
        conv("conv5", c3, c3, {3, 3}, {1, 1}, {1, 1}, Act::relu),
        max_pool("maxpool3", pool3_k, pool3_s),
        avg_global("avgpool"),
        flatten("flatten"),
        linear("fc1", c3, c3, Act::relu),
        linear("fc2", c3, 2, Act::none),
    };
    return spec;
}

} // namespace arsp
