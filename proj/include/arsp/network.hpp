#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "arsp/cbam.hpp"
#include "arsp/tensor.hpp"
#include "arsp/util.hpp"

namespace arsp {

enum class Preset { full, tiny };

std::string preset_name(Preset p);
Preset preset_from_name(const std::string& name);

enum class Act { none, relu, sigmoid };

enum class LayerKind { conv, conv_transpose, max_pool, avg_pool_global, flatten, linear, reshape,
                       cbam };

// One table row. Only the fields relevant to `kind` are meaningful.
struct LayerDesc {
    LayerKind kind;
    std::string name;
    Act act = Act::none;
    int in_channels = 0, out_channels = 0;
    std::pair<int, int> kernel{1, 1};
    std::pair<int, int> stride{1, 1};
    std::pair<int, int> padding{0, 0};
    std::pair<int, int> out_padding{0, 0};
    int in_features = 0, out_features = 0;      // linear
    std::array<int, 3> target_chw{0, 0, 0};     // reshape
    int reduction = 0, spatial_kernel = 0;      // cbam
};

struct NetworkSpec {
    Preset preset = Preset::tiny;
    std::string tag;
    std::vector<LayerDesc> layers;
};

// Symbolic per-layer output dims (excluding the batch axis): {C,H,W} rows for
// spatial layers, {D} rows after flatten/linear. Never allocates activations.
// Illegal compositions raise dimension_error naming the layer.
std::vector<std::vector<int>> shape_trace(const NetworkSpec& spec,
                                          const std::vector<int>& input_dims);

long long param_count(const NetworkSpec& spec);

struct Param {
    std::string name;
    Tensor value;
    bool frozen = false;
};

// Affine layer handle used where a single fc layer participates in a loss.
struct LinearLayer {
    Tensor weight; // [D, E]
    Tensor bias;   // [E]
};

Tensor apply_linear(const LinearLayer& layer, const Tensor& x);

// A sequential stack realizing one NetworkSpec. Parameters are created He
// uniform (fan-in) from the seed, biases zero; construction order is fixed
// so a seed pins every weight bit-exactly.
class Network {
  public:
    Network(NetworkSpec spec, uint64_t seed, bool trainable);

    // x: [N,C,H,W] for spatial stacks, [N,D] for linear-first stacks.
    Tensor forward(const Tensor& x) const;

    const NetworkSpec& spec() const { return spec_; }
    Preset preset() const { return spec_.preset; }

    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }
    Param& param(const std::string& name);
    const Param& param(const std::string& name) const;

    // weight/bias pair of a linear layer, by layer name.
    LinearLayer linear_layer(const std::string& layer_name) const;

    // Freezing clears requires_grad and marks every record frozen.
    void set_frozen(bool frozen);
    bool frozen() const { return frozen_; }

    uint64_t params_hash() const;

  private:
    CbamParams cbam_view(size_t layer_index) const;

    NetworkSpec spec_;
    std::vector<Param> params_;
    std::vector<size_t> layer_param_offset_; // first param index per layer
    bool frozen_ = false;
};

} // namespace arsp
