#include "cfsdcn/network.hpp"

#include <map>
#include <stdexcept>

#include "cfsdcn/hsc_io.hpp"
#include "serialize.hpp"
#include "tensor_blob.hpp"

namespace cfsdcn {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (bands < 1) fail("bands must be >= 1");
  if (base_channels < 4 || base_channels % 4 != 0) fail("base_channels must be a positive multiple of 4");
  if (depth < 0 || depth > 6) fail("depth must be in [0, 6]");
  if (encoder_blocks < 1 || decoder_blocks < 1 || bottleneck_blocks < 1) {
    fail("block counts must be >= 1");
  }
  if (lcs_kernel < 1 || lcs_kernel % 2 == 0) fail("lcs_kernel must be odd and positive");
  if (ffn_expansion < 1) fail("ffn_expansion must be >= 1");
  if (deform_groups < 0) fail("deform_groups must be >= 0");
  if (deform_groups > 0 && base_channels % deform_groups != 0) {
    fail("base_channels " + std::to_string(base_channels) + " not divisible by deform_groups " +
         std::to_string(deform_groups));
  }
}

int ModelConfig::level_groups(int level) const {
  return deform_groups > 0 ? deform_groups : auto_deform_groups(level_channels(level));
}

BlockOptions ModelConfig::block_options(int level) const {
  BlockOptions o;
  o.lcs_kernel = lcs_kernel;
  o.deform_groups = level_groups(level);
  o.ffn_expansion = ffn_expansion;
  o.use_cfsab = !disable_cfsab;
  o.use_dcb = !disable_dcb;
  o.sample_from_coarse = sample_from_coarse;
  return o;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  c.variant = name;
  // Budget-tuned at 256x256x28: depth 2 leaves the bottleneck as the only
  // level cheap enough in FLOPs per parameter to carry most of the weights.
  if (name == "S") {
    c.base_channels = 20;
    c.bottleneck_blocks = 11;
  } else if (name == "M") {
    c.base_channels = 24;
    c.bottleneck_blocks = 18;
  } else if (name == "L") {
    c.base_channels = 36;
    c.bottleneck_blocks = 12;
  } else if (name == "tiny") {
    c.bands = 8;
    c.base_channels = 16;
    c.depth = 2;
  } else {
    throw std::invalid_argument("unknown model preset '" + name + "' (expected S, M, L or tiny)");
  }
  return c;
}

HsiCube shift_back_baseline(const Measurement& y, const DispersionSpec& spec) {
  HsiCube h = shift_back(y, spec);
  const float s = 2.0f / static_cast<float>(spec.bands);
  for (float& v : h.data) v *= s;
  return h;
}

Array4<float> build_network_input(const Measurement& y, const Mask3D& mask3d,
                                  const DispersionSpec& spec) {
  const HsiCube h = shift_back_baseline(y, spec);
  if (mask3d.h != h.h || mask3d.w != h.w || mask3d.bands != h.bands) {
    throw ShapeError("network input: shift-back is " + std::to_string(h.bands) + "x" +
                     std::to_string(h.h) + "x" + std::to_string(h.w) + ", mask3d is " +
                     std::to_string(mask3d.bands) + "x" + std::to_string(mask3d.h) + "x" +
                     std::to_string(mask3d.w));
  }
  Array4<float> out(Shape4{1, 2 * h.bands, h.h, h.w});
  const std::size_t plane = static_cast<std::size_t>(h.h) * h.w;
  std::copy(h.data.begin(), h.data.end(), out.ptr());
  std::copy(mask3d.data.begin(), mask3d.data.end(), out.ptr() + plane * h.bands);
  return out;
}

template <typename T>
CfsdcnModel<T>::CfsdcnModel(const ModelConfig& config) : config_(config) {
  config.validate();
  Rng rng(config.seed);
  const int n = config.bands;
  const int c0 = config.base_channels;
  fusion = PointwiseConv<T>(2 * n, n, true, rng);
  embedding = Conv2d<T>(n, c0, 3, ConvOptions{1, 1, 1}, true, rng);
  for (int l = 0; l < config.depth; ++l) {
    const int c = config.level_channels(l);
    std::vector<Cfsdcb<T>> stage;
    for (int b = 0; b < config.encoder_blocks; ++b) stage.emplace_back(c, config.block_options(l), rng);
    encoder.push_back(std::move(stage));
    downsample.emplace_back(c, 2 * c, 4, ConvOptions{2, 1, 1}, false, rng);
  }
  const int cb = config.level_channels(config.depth);
  for (int b = 0; b < config.bottleneck_blocks; ++b) {
    bottleneck.emplace_back(cb, config.block_options(config.depth), rng);
  }
  decoder.resize(config.depth);
  upsample.resize(config.depth);
  skip_fusion.resize(config.depth);
  for (int l = config.depth - 1; l >= 0; --l) {
    const int c = config.level_channels(l);
    upsample[l] = Upsample2x<T>(2 * c, c, rng);
    skip_fusion[l] = PointwiseConv<T>(2 * c, c, false, rng);
    for (int b = 0; b < config.decoder_blocks; ++b) {
      decoder[l].emplace_back(c, config.block_options(l), rng);
    }
  }
  output = Conv2d<T>(c0, n, 3, ConvOptions{1, 1, 1}, true, rng);
  output.weight.mutable_value().fill(T{0});
  output.bias.mutable_value().fill(T{0});
}

template <typename T>
Tensor<T> CfsdcnModel<T>::initialize_input(const Tensor<T>& input) const {
  if (input.shape().c != 2 * config_.bands) {
    throw ShapeError("model input needs " + std::to_string(2 * config_.bands) + " channels, got " +
                     std::to_string(input.shape().c));
  }
  return fusion(input);
}

template <typename T>
ForwardTrace<T> CfsdcnModel<T>::forward_trace(const Tensor<T>& input) const {
  const int factor = 1 << config_.depth;
  const Shape4 s = input.shape();
  if (s.h % factor != 0 || s.w % factor != 0) {
    throw ShapeError("spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                     " not divisible by " + std::to_string(factor));
  }
  ForwardTrace<T> t;
  t.initial = initialize_input(input);
  Tensor<T> f = embedding(t.initial);
  std::vector<Tensor<T>> skips;
  for (int l = 0; l < config_.depth; ++l) {
    for (const auto& block : encoder[l]) f = block(f);
    skips.push_back(f);
    f = downsample[l](f);
  }
  for (const auto& block : bottleneck) f = block(f);
  for (int l = config_.depth - 1; l >= 0; --l) {
    f = skip_fusion[l](concat_channels(upsample[l](f), skips[l]));
    for (const auto& block : decoder[l]) f = block(f);
  }
  t.residual = output(f);
  t.output = add(t.initial, t.residual);
  return t;
}

template <typename T>
Tensor<T> CfsdcnModel<T>::forward(const Tensor<T>& input) const {
  return forward_trace(input).output;
}

template <typename T>
std::vector<NamedParameter<T>> CfsdcnModel<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  fusion.collect("fusion", out);
  embedding.collect("embedding", out);
  for (int l = 0; l < config_.depth; ++l) {
    const std::string stage = "encoder." + std::to_string(l);
    for (std::size_t b = 0; b < encoder[l].size(); ++b) {
      encoder[l][b].collect(stage + ".block" + std::to_string(b), out);
    }
    downsample[l].collect(stage + ".down", out);
  }
  for (std::size_t b = 0; b < bottleneck.size(); ++b) {
    bottleneck[b].collect("bottleneck.block" + std::to_string(b), out);
  }
  for (int l = config_.depth - 1; l >= 0; --l) {
    const std::string stage = "decoder." + std::to_string(l);
    upsample[l].collect(stage + ".up", out);
    skip_fusion[l].collect(stage + ".skip", out);
    for (std::size_t b = 0; b < decoder[l].size(); ++b) {
      decoder[l][b].collect(stage + ".block" + std::to_string(b), out);
    }
  }
  output.collect("output", out);
  return out;
}

template <typename T>
std::int64_t CfsdcnModel<T>::count_params() const {
  std::int64_t total = 0;
  for (const auto& p : parameters()) total += static_cast<std::int64_t>(p.tensor.shape().numel());
  return total;
}

template <typename T>
CostLedger CfsdcnModel<T>::cost(Shape4 input) const {
  CostLedger ledger;
  const Shape4 x = fusion.account("fusion", input, ledger);
  Shape4 f = embedding.account("embedding", x, ledger);
  std::vector<Shape4> skips;
  for (int l = 0; l < config_.depth; ++l) {
    const std::string stage = "encoder." + std::to_string(l);
    for (std::size_t b = 0; b < encoder[l].size(); ++b) {
      f = encoder[l][b].account(stage + ".block" + std::to_string(b), f, ledger);
    }
    skips.push_back(f);
    f = downsample[l].account(stage + ".down", f, ledger);
  }
  for (std::size_t b = 0; b < bottleneck.size(); ++b) {
    f = bottleneck[b].account("bottleneck.block" + std::to_string(b), f, ledger);
  }
  for (int l = config_.depth - 1; l >= 0; --l) {
    const std::string stage = "decoder." + std::to_string(l);
    f = upsample[l].account(stage + ".up", f, ledger);
    f.c += skips[l].c;
    f = skip_fusion[l].account(stage + ".skip", f, ledger);
    for (std::size_t b = 0; b < decoder[l].size(); ++b) {
      f = decoder[l][b].account(stage + ".block" + std::to_string(b), f, ledger);
    }
  }
  output.account("output", f, ledger);
  return ledger;
}

double model_gflops(const ModelConfig& config, int h, int w) {
  NoGradGuard guard;
  const CfsdcnModel<float> model(config);
  return static_cast<double>(model.cost(Shape4{1, 2 * config.bands, h, w}).flops()) / 1e9;
}

std::int64_t model_params(const ModelConfig& config) {
  NoGradGuard guard;
  return CfsdcnModel<float>(config).count_params();
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const CfsdcnModel<T>& model,
                     const CassiConfig& cassi) {
  std::vector<detail::BlobTensor> tensors;
  for (const auto& p : model.parameters()) {
    const Shape4 s = p.tensor.shape();
    detail::BlobTensor t{p.name, {s.n, s.c, s.h, s.w}, {}};
    t.values.reserve(s.numel());
    for (T v : p.tensor.value().data()) t.values.push_back(static_cast<float>(v));
    tensors.push_back(std::move(t));
  }
  nlohmann::json header = {{"format", kCheckpointFormat},
                           {"version", kCheckpointVersion},
                           {"model", detail::to_json(model.config())},
                           {"cassi", detail::to_json(cassi)}};
  detail::write_blob(path, std::move(header), tensors);
}

template <typename T>
LoadedModel<T> load_checkpoint(const std::filesystem::path& path) {
  std::vector<detail::BlobTensor> tensors;
  const nlohmann::json header = detail::read_blob(path, kCheckpointFormat, tensors);
  if (header.value("version", 0) != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      header.value("version", nlohmann::json(0)).dump());
  }
  if (!header.contains("model")) throw FormatError(path.string() + ": missing model config");
  const ModelConfig config = detail::model_config_from_json(header["model"]);
  const CassiConfig cassi = header.contains("cassi")
                                ? detail::cassi_config_from_json(header["cassi"])
                                : CassiConfig{};
  LoadedModel<T> loaded{CfsdcnModel<T>(config), cassi};
  std::map<std::string, const detail::BlobTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  const auto params = loaded.model.parameters();
  if (params.size() != tensors.size()) {
    throw FormatError(path.string() + ": checkpoint holds " + std::to_string(tensors.size()) +
                      " tensors, model has " + std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError(path.string() + ": missing tensor '" + p.name + "'");
    const Shape4 s = p.tensor.shape();
    if (it->second->shape != std::vector<int>{s.n, s.c, s.h, s.w} ||
        it->second->values.size() != s.numel()) {
      throw FormatError(path.string() + ": shape mismatch for '" + p.name + "'");
    }
    Tensor<T> t = p.tensor;
    auto dst = t.mutable_value().data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->values[i]);
  }
  return loaded;
}

template class CfsdcnModel<float>;
template class CfsdcnModel<double>;
template void save_checkpoint(const std::filesystem::path&, const CfsdcnModel<float>&,
                              const CassiConfig&);
template void save_checkpoint(const std::filesystem::path&, const CfsdcnModel<double>&,
                              const CassiConfig&);
template LoadedModel<float> load_checkpoint(const std::filesystem::path&);
template LoadedModel<double> load_checkpoint(const std::filesystem::path&);

}  // namespace cfsdcn
