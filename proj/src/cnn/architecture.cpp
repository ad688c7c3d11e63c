#include "dvk/cnn/architecture.hpp"

#include <algorithm>

#include "dvk/error.hpp"

namespace dvk::cnn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kLrn: return "lrn";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFullyConnected: return "fully_connected";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

void LayerSpec::validate() const {
  auto fail = [&](const std::string& what) { throw DataError("layer '" + name + "': " + what); };
  if (stride < 1) fail("stride must be >= 1");
  if (pad < 0) fail("pad must be >= 0");
  switch (kind) {
    case LayerKind::kConv:
      if (filters < 1 || kernel < 1) fail("conv needs filters >= 1 and kernel >= 1");
      break;
    case LayerKind::kMaxPool:
      if (kernel < 1) fail("pool window must be >= 1");
      break;
    case LayerKind::kFullyConnected:
      if (out_dim < 1) fail("out_dim must be >= 1");
      break;
    case LayerKind::kDropout:
      if (rate < 0.0 || rate >= 1.0) fail("dropout rate must lie in [0, 1)");
      break;
    case LayerKind::kLrn:
      if (lrn.size < 1 || lrn.bias <= 0) fail("invalid LRN parameters");
      break;
    default:
      break;
  }
}

LayerSpec LayerSpec::conv(std::string name, int filters, int kernel, int stride, int pad) {
  LayerSpec l;
  l.kind = LayerKind::kConv;
  l.name = std::move(name);
  l.filters = filters;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::kRelu;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::lrn_layer(std::string name, LrnParams params) {
  LayerSpec l;
  l.kind = LayerKind::kLrn;
  l.name = std::move(name);
  l.lrn = params;
  return l;
}

LayerSpec LayerSpec::max_pool(std::string name, int window, int stride) {
  LayerSpec l;
  l.kind = LayerKind::kMaxPool;
  l.name = std::move(name);
  l.kernel = window;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::fully_connected(std::string name, int out_dim) {
  LayerSpec l;
  l.kind = LayerKind::kFullyConnected;
  l.name = std::move(name);
  l.out_dim = out_dim;
  return l;
}

LayerSpec LayerSpec::dropout(std::string name, double rate) {
  LayerSpec l;
  l.kind = LayerKind::kDropout;
  l.name = std::move(name);
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::softmax(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::kSoftmax;
  l.name = std::move(name);
  return l;
}

int ArchitectureSpec::find_layer(std::string_view layer_name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == layer_name) return static_cast<int>(i);
  }
  return -1;
}

int ArchitectureSpec::score_layer() const {
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    if (layers[i].kind == LayerKind::kFullyConnected) return i;
  }
  throw DataError(name + ": no fully-connected layer");
}

int ArchitectureSpec::feature_layer() const {
  const int scores = score_layer();
  for (int i = scores - 1; i >= 0; --i) {
    if (layers[i].kind == LayerKind::kFullyConnected) {
      // The ReLU right after the penultimate fc layer, if present.
      if (i + 1 < scores && layers[i + 1].kind == LayerKind::kRelu) return i + 1;
      return i;
    }
  }
  throw DataError(name + ": no penultimate fully-connected layer");
}

int ArchitectureSpec::feature_dim() const {
  const int f = feature_layer();
  for (int i = f; i >= 0; --i) {
    if (layers[i].kind == LayerKind::kFullyConnected) return layers[i].out_dim;
  }
  return 0;
}

namespace {

struct ConvRow {
  int filters, kernel, stride, pad;
  bool lrn;
  int pool;  // max-pooling factor, 0 = none
};

ArchitectureSpec assemble(std::string name, const std::vector<ConvRow>& convs, int full6, int full7,
                          int num_classes) {
  ArchitectureSpec spec;
  spec.name = std::move(name);
  spec.num_classes = num_classes;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const ConvRow& r = convs[i];
    const std::string id = std::to_string(i + 1);
    spec.layers.push_back(LayerSpec::conv("conv" + id, r.filters, r.kernel, r.stride, r.pad));
    spec.layers.push_back(LayerSpec::relu("relu" + id));
    if (r.lrn) spec.layers.push_back(LayerSpec::lrn_layer("norm" + id));
    if (r.pool > 0) spec.layers.push_back(LayerSpec::max_pool("pool" + id, r.pool, r.pool));
  }
  spec.layers.push_back(LayerSpec::fully_connected("full6", full6));
  spec.layers.push_back(LayerSpec::relu("relu6"));
  spec.layers.push_back(LayerSpec::dropout("drop6"));
  spec.layers.push_back(LayerSpec::fully_connected("full7", full7));
  spec.layers.push_back(LayerSpec::relu("relu7"));
  spec.layers.push_back(LayerSpec::dropout("drop7"));
  spec.layers.push_back(LayerSpec::fully_connected("full8", num_classes));
  spec.layers.push_back(LayerSpec::softmax("prob"));
  return spec;
}

}  // namespace

ArchitectureSpec build_architecture(std::string_view name, int num_classes) {
  if (num_classes < 1) throw DataError("build_architecture: num_classes must be >= 1");
  const std::vector<ConvRow> fast = {
      {64, 11, 4, 0, true, 2}, {256, 5, 1, 2, true, 2}, {256, 3, 1, 1, false, 0},
      {256, 3, 1, 1, false, 0}, {256, 3, 1, 1, false, 2}};
  const std::vector<ConvRow> medium = {
      {96, 7, 2, 0, true, 2}, {256, 5, 2, 1, true, 2}, {512, 3, 1, 1, false, 0},
      {512, 3, 1, 1, false, 0}, {512, 3, 1, 1, false, 2}};
  const std::vector<ConvRow> slow = {
      {96, 7, 2, 0, true, 3}, {256, 5, 1, 1, false, 2}, {512, 3, 1, 1, false, 0},
      {512, 3, 1, 1, false, 0}, {512, 3, 1, 1, false, 3}};
  if (name == "CNN-F") return assemble("CNN-F", fast, 4096, 4096, num_classes);
  if (name == "CNN-M") return assemble("CNN-M", medium, 4096, 4096, num_classes);
  if (name == "CNN-S") return assemble("CNN-S", slow, 4096, 4096, num_classes);
  if (name == "CNN-M-2048") return assemble("CNN-M-2048", medium, 4096, 2048, num_classes);
  if (name == "CNN-M-1024") return assemble("CNN-M-1024", medium, 4096, 1024, num_classes);
  if (name == "CNN-M-128") return assemble("CNN-M-128", medium, 4096, 128, num_classes);
  throw DataError("build_architecture: unknown architecture '" + std::string(name) + "'");
}

ArchitectureSpec scaled_architecture(const ArchitectureSpec& base, int width_divisor, int input_size,
                                     int num_classes, int input_channels) {
  if (width_divisor < 1 || input_size < 1 || num_classes < 1) {
    throw DataError("scaled_architecture: invalid scaling");
  }
  ArchitectureSpec spec = base;
  spec.name = base.name + "/" + std::to_string(width_divisor) + "@" + std::to_string(input_size);
  spec.input = {input_size, input_size, input_channels};
  spec.num_classes = num_classes;
  const int scores = base.score_layer();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::kConv) l.filters = std::max(1, l.filters / width_divisor);
    if (l.kind == LayerKind::kFullyConnected) {
      l.out_dim = static_cast<int>(i) == scores ? num_classes : std::max(1, l.out_dim / width_divisor);
    }
  }
  return spec;
}

TensorShape output_shape(const LayerSpec& layer, const TensorShape& input) {
  layer.validate();
  auto spatial = [&](int in) {
    const int span = in + 2 * layer.pad - layer.kernel;
    if (span < 0) {
      throw DataError("layer '" + layer.name + "': kernel exceeds input (" + std::to_string(layer.kernel) +
                      " > " + std::to_string(in + 2 * layer.pad) + ")");
    }
    return span / layer.stride + 1;
  };
  switch (layer.kind) {
    case LayerKind::kConv:
      return {spatial(input.height), spatial(input.width), layer.filters};
    case LayerKind::kMaxPool:
      return {spatial(input.height), spatial(input.width), input.channels};
    case LayerKind::kFullyConnected:
      return {1, 1, layer.out_dim};
    default:
      return input;
  }
}

std::vector<TensorShape> shape_pipeline(const ArchitectureSpec& spec) {
  std::vector<TensorShape> shapes;
  shapes.reserve(spec.layers.size());
  TensorShape cur = spec.input;
  for (const LayerSpec& l : spec.layers) {
    cur = output_shape(l, cur);
    shapes.push_back(cur);
  }
  return shapes;
}

ArchitectureSpec with_num_classes(const ArchitectureSpec& spec, int num_classes) {
  if (num_classes < 1) throw DataError("with_num_classes: num_classes must be >= 1");
  ArchitectureSpec out = spec;
  out.num_classes = num_classes;
  out.layers[out.score_layer()].out_dim = num_classes;
  return out;
}

}  // namespace dvk::cnn
