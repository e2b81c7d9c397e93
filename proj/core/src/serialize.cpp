#include "serialize.hpp"

#include <set>
#include <stdexcept>

#include "cfsdcn/hsc_io.hpp"

namespace cfsdcn::detail {

using nlohmann::json;

namespace {
void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw FormatError(std::string("unknown ") + what + " key '" + key + "'");
  }
}

template <typename V>
void read_into(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad value for '") + key + "': " + e.what());
  }
}
}  // namespace

json to_json(const ModelConfig& c) {
  return {{"variant", c.variant},
          {"bands", c.bands},
          {"base_channels", c.base_channels},
          {"depth", c.depth},
          {"encoder_blocks", c.encoder_blocks},
          {"decoder_blocks", c.decoder_blocks},
          {"bottleneck_blocks", c.bottleneck_blocks},
          {"lcs_kernel", c.lcs_kernel},
          {"deform_groups", c.deform_groups},
          {"ffn_expansion", c.ffn_expansion},
          {"disable_dcb", c.disable_dcb},
          {"disable_cfsab", c.disable_cfsab},
          {"sample_from_coarse", c.sample_from_coarse},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  reject_unknown(j,
                 {"variant", "bands", "base_channels", "depth", "encoder_blocks", "decoder_blocks",
                  "bottleneck_blocks", "lcs_kernel", "deform_groups", "ffn_expansion",
                  "disable_dcb", "disable_cfsab", "sample_from_coarse", "seed"},
                 "model");
  ModelConfig c;
  read_into(j, "variant", c.variant);
  read_into(j, "bands", c.bands);
  read_into(j, "base_channels", c.base_channels);
  read_into(j, "depth", c.depth);
  read_into(j, "encoder_blocks", c.encoder_blocks);
  read_into(j, "decoder_blocks", c.decoder_blocks);
  read_into(j, "bottleneck_blocks", c.bottleneck_blocks);
  read_into(j, "lcs_kernel", c.lcs_kernel);
  read_into(j, "deform_groups", c.deform_groups);
  read_into(j, "ffn_expansion", c.ffn_expansion);
  read_into(j, "disable_dcb", c.disable_dcb);
  read_into(j, "disable_cfsab", c.disable_cfsab);
  read_into(j, "sample_from_coarse", c.sample_from_coarse);
  read_into(j, "seed", c.seed);
  return c;
}

std::string mask3d_mode_name(Mask3DMode mode) {
  return mode == Mask3DMode::Shift ? "shift" : "replicate";
}

Mask3DMode parse_mask3d_mode(const std::string& text) {
  if (text == "shift") return Mask3DMode::Shift;
  if (text == "replicate") return Mask3DMode::Replicate;
  throw std::invalid_argument("unknown mask3d mode '" + text + "' (expected shift or replicate)");
}

json to_json(const CassiConfig& c) {
  return {{"step", c.step}, {"mask3d", mask3d_mode_name(c.mask3d)}, {"noise", c.noise.describe()}};
}

CassiConfig cassi_config_from_json(const json& j) {
  reject_unknown(j, {"step", "mask3d", "noise"}, "cassi");
  CassiConfig c;
  read_into(j, "step", c.step);
  std::string mode = mask3d_mode_name(c.mask3d);
  read_into(j, "mask3d", mode);
  std::string noise = c.noise.describe();
  read_into(j, "noise", noise);
  try {
    c.mask3d = parse_mask3d_mode(mode);
    c.noise = NoiseSpec::parse(noise);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return c;
}

}  // namespace cfsdcn::detail
