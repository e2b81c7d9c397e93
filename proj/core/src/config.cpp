#include "cfsdcn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "serialize.hpp"

namespace cfsdcn {

double TrainConfig::lr_at(int epoch) const {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  return lr * std::pow(lr_decay_factor, epoch / lr_decay_every);
}

void TrainConfig::validate(int depth) const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (!(lr >= 0) || !std::isfinite(lr)) fail("lr must be finite and >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (lr_decay_every < 1) fail("lr_decay_every must be >= 1");
  if (!(lr_decay_factor > 0) || lr_decay_factor > 1) fail("lr_decay_factor must be in (0, 1]");
  if (batch < 1) fail("batch must be >= 1");
  if (crops_per_scene < 1) fail("crops_per_scene must be >= 1");
  const int factor = 1 << depth;
  if (crop < factor || crop % factor != 0) {
    fail("crop " + std::to_string(crop) + " must be a positive multiple of " + std::to_string(factor));
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("betas must be in [0, 1)");
  if (!(eps > 0)) fail("eps must be > 0");
  if (max_steps < 0) fail("max_steps must be >= 0");
}

std::string loss_kind_name(LossKind kind) { return kind == LossKind::Mse ? "mse" : "l1"; }

LossKind parse_loss_kind(const std::string& text) {
  if (text == "mse") return LossKind::Mse;
  if (text == "l1") return LossKind::L1;
  throw std::invalid_argument("unknown loss '" + text + "' (expected mse or l1)");
}

void RunConfig::validate() const {
  model.validate();
  train.validate(model.depth);
  if (cassi.step < 0) throw std::invalid_argument("cassi config: step must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V>
V parse_number(const std::string& text) {
  V v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("'" + text + "' is not a valid number");
  }
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  throw std::invalid_argument("'" + text + "' is not a boolean");
}

template <typename V>
std::string number_text(V v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

template <typename V>
Key number_key(V ModelConfig::*field) {
  return {[field](RunConfig& c, const std::string& v) { c.model.*field = parse_number<V>(v); },
          [field](const RunConfig& c) { return number_text(c.model.*field); }};
}

template <typename V>
Key train_number(V TrainConfig::*field) {
  return {[field](RunConfig& c, const std::string& v) { c.train.*field = parse_number<V>(v); },
          [field](const RunConfig& c) { return number_text(c.train.*field); }};
}

Key model_flag(bool ModelConfig::*field) {
  return {[field](RunConfig& c, const std::string& v) { c.model.*field = parse_bool(v); },
          [field](const RunConfig& c) { return std::string(c.model.*field ? "true" : "false"); }};
}

Key train_flag(bool TrainConfig::*field) {
  return {[field](RunConfig& c, const std::string& v) { c.train.*field = parse_bool(v); },
          [field](const RunConfig& c) { return std::string(c.train.*field ? "true" : "false"); }};
}

// Ordered: format_config writes keys in this order.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>>& schema() {
  static const auto table = [] {
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, Key>>>> t;
    t.push_back({"model",
                 {{"variant",
                   {[](RunConfig& c, const std::string& v) {
                      if (v == "S" || v == "M" || v == "L" || v == "tiny") {
                        c.model = ModelConfig::preset(v);
                      } else {
                        c.model.variant = v;
                      }
                    },
                    [](const RunConfig& c) { return c.model.variant; }}},
                  {"bands", number_key(&ModelConfig::bands)},
                  {"base_channels", number_key(&ModelConfig::base_channels)},
                  {"depth", number_key(&ModelConfig::depth)},
                  {"encoder_blocks", number_key(&ModelConfig::encoder_blocks)},
                  {"decoder_blocks", number_key(&ModelConfig::decoder_blocks)},
                  {"bottleneck_blocks", number_key(&ModelConfig::bottleneck_blocks)},
                  {"lcs_kernel", number_key(&ModelConfig::lcs_kernel)},
                  {"deform_groups", number_key(&ModelConfig::deform_groups)},
                  {"ffn_expansion", number_key(&ModelConfig::ffn_expansion)},
                  {"disable_dcb", model_flag(&ModelConfig::disable_dcb)},
                  {"disable_cfsab", model_flag(&ModelConfig::disable_cfsab)},
                  {"sample_from_coarse", model_flag(&ModelConfig::sample_from_coarse)},
                  {"seed", number_key(&ModelConfig::seed)}}});
    t.push_back({"cassi",
                 {{"step",
                   {[](RunConfig& c, const std::string& v) { c.cassi.step = parse_number<int>(v); },
                    [](const RunConfig& c) { return number_text(c.cassi.step); }}},
                  {"mask3d",
                   {[](RunConfig& c, const std::string& v) {
                      c.cassi.mask3d = detail::parse_mask3d_mode(v);
                    },
                    [](const RunConfig& c) { return detail::mask3d_mode_name(c.cassi.mask3d); }}},
                  {"noise",
                   {[](RunConfig& c, const std::string& v) { c.cassi.noise = NoiseSpec::parse(v); },
                    [](const RunConfig& c) { return c.cassi.noise.describe(); }}}}});
    t.push_back({"train",
                 {{"epochs", train_number(&TrainConfig::epochs)},
                  {"lr", train_number(&TrainConfig::lr)},
                  {"lr_decay_every", train_number(&TrainConfig::lr_decay_every)},
                  {"lr_decay_factor", train_number(&TrainConfig::lr_decay_factor)},
                  {"batch", train_number(&TrainConfig::batch)},
                  {"crop", train_number(&TrainConfig::crop)},
                  {"crops_per_scene", train_number(&TrainConfig::crops_per_scene)},
                  {"rotate", train_flag(&TrainConfig::rotate)},
                  {"flip", train_flag(&TrainConfig::flip)},
                  {"loss",
                   {[](RunConfig& c, const std::string& v) { c.train.loss = parse_loss_kind(v); },
                    [](const RunConfig& c) { return loss_kind_name(c.train.loss); }}},
                  {"beta1", train_number(&TrainConfig::beta1)},
                  {"beta2", train_number(&TrainConfig::beta2)},
                  {"eps", train_number(&TrainConfig::eps)},
                  {"max_steps", train_number(&TrainConfig::max_steps)},
                  {"seed", train_number(&TrainConfig::seed)}}});
    return t;
  }();
  return table;
}

const Key* find_key(const std::string& section, const std::string& key) {
  for (const auto& [name, keys] : schema()) {
    if (name != section) continue;
    for (const auto& [k, entry] : keys) {
      if (k == key) return &entry;
    }
  }
  return nullptr;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::set<std::string> seen;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "cassi" && section != "train") {
        fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value', got '" + line + "'");
    if (section.empty()) fail("key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* entry = find_key(section, key);
    if (!entry) fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) fail("duplicate key '" + key + "'");
    if (section == "model" && key == "variant" && seen.size() > 1 &&
        std::any_of(seen.begin(), seen.end(),
                    [](const std::string& s) { return s.rfind("model.", 0) == 0 && s != "model.variant"; })) {
      fail("'variant' must precede the other [model] keys");
    }
    try {
      entry->set(config, value);
    } catch (const std::invalid_argument& e) {
      fail(section + "." + key + ": " + e.what());
    }
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string format_config(const RunConfig& config) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : schema()) {
    if (!first) out << "\n";
    first = false;
    out << "[" << section << "]\n";
    for (const auto& [key, entry] : keys) out << key << " = " << entry.get(config) << "\n";
  }
  return out.str();
}

}  // namespace cfsdcn
