#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dvk::cnn {

// Activation geometry. Fully-connected stages use height = width = 1.
struct TensorShape {
  int height = 1;
  int width = 1;
  int channels = 1;

  long long size() const { return static_cast<long long>(height) * width * channels; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

enum class LayerKind { kConv, kRelu, kLrn, kMaxPool, kFullyConnected, kDropout, kSoftmax };

std::string_view to_string(LayerKind kind);

// Cross-channel local response normalisation:
//   b_c = a_c / (bias + alpha * sum_{|c'-c| <= size/2} a_c'^2)^beta
struct LrnParams {
  int size = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double bias = 2.0;

  friend bool operator==(const LrnParams&, const LrnParams&) = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  // conv: filters x kernel x kernel, stride, pad. maxpool: kernel, stride.
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  // fully_connected
  int out_dim = 0;
  // dropout
  double rate = 0.0;
  LrnParams lrn;

  bool has_weights() const { return kind == LayerKind::kConv || kind == LayerKind::kFullyConnected; }
  void validate() const;

  static LayerSpec conv(std::string name, int filters, int kernel, int stride, int pad);
  static LayerSpec relu(std::string name);
  static LayerSpec lrn_layer(std::string name, LrnParams params = {});
  static LayerSpec max_pool(std::string name, int window, int stride);
  static LayerSpec fully_connected(std::string name, int out_dim);
  static LayerSpec dropout(std::string name, double rate = 0.5);
  static LayerSpec softmax(std::string name);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ArchitectureSpec {
  std::string name;
  TensorShape input{224, 224, 3};
  std::vector<LayerSpec> layers;
  int num_classes = 1000;

  int find_layer(std::string_view layer_name) const;
  /// Index of the last fully-connected layer (class scores, before softmax).
  int score_layer() const;
  /// Index of the layer whose output is the image descriptor (ReLU after full7).
  int feature_layer() const;
  int feature_dim() const;
};

/// CNN-F, CNN-M, CNN-S, and CNN-M-2048 / -1024 / -128.
ArchitectureSpec build_architecture(std::string_view name, int num_classes = 1000);

// Same layer sequence with conv filters and hidden fc widths divided by
// `width_divisor`, a square input of side `input_size`, and `num_classes` outputs.
ArchitectureSpec scaled_architecture(const ArchitectureSpec& base, int width_divisor, int input_size,
                                     int num_classes, int input_channels = 3);

/// Output extent; spatial extent is floor((in + 2 pad - kernel) / stride) + 1.
TensorShape output_shape(const LayerSpec& layer, const TensorShape& input);

/// Shapes after every layer; throws naming the first layer that does not fit.
std::vector<TensorShape> shape_pipeline(const ArchitectureSpec& spec);

/// Returns a copy with the score layer replaced by one with `num_classes` outputs.
ArchitectureSpec with_num_classes(const ArchitectureSpec& spec, int num_classes);

}  // namespace dvk::cnn
