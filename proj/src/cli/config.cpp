#include <algorithm>
#include <fstream>
#include <sstream>

#include "mgnet/cli.hpp"
#include "mgnet/errors.hpp"

namespace mgnet::cli {

const std::vector<KeySpec>& CliConfig::keys() {
  static const std::vector<KeySpec> kKeys = {
      {"num_grids", "5", "number of grid levels J"},
      {"smoothing_iters", "2", "smoothing steps per level (one value or one per level)"},
      {"feature_channels", "128", "channels of u"},
      {"data_channels", "128", "channels of f"},
      {"input_channels", "1", "channels of the input volume"},
      {"num_classes", "2", "output classes"},
      {"use_avg_pool", "true", "average-pool u after each restriction"},
      {"share_smoothers", "true", "reuse one B kernel for all smoothing steps of a level"},
      {"learning_rate", "0.0001", "SGD learning rate"},
      {"batch_size", "2", "mini-batch size"},
      {"epochs", "10", "training epochs"},
      {"log_every", "1", "report running train metrics every N epochs (0 = never)"},
      {"normalize", "true", "z-score each volume on load"},
      {"aggregation", "scan", "metric granularity: scan or subject"},
      {"seed_model", "0", "parameter initialisation seed"},
      {"seed_train", "0", "mini-batch shuffling seed"},
      {"seed_split", "0", "fold assignment seed"},
      {"seed_data", "0", "synthetic data seed"},
      {"k", "10", "cross-validation folds"},
      {"fold", "0", "held-out fold index"},
      {"threads", "1", "worker threads"},
      {"simd", "auto", "kernel set: auto, scalar or avx2"},
      {"manifest", "", "manifest CSV path"},
      {"folds", "", "fold assignment CSV path"},
      {"checkpoint", "", "MGN3 checkpoint path"},
      {"out", ".", "output directory"},
      {"subjects_per_class", "20", "synthetic subjects per class"},
      {"scans_per_subject", "2", "synthetic scans per subject"},
      {"volume_size", "16", "synthetic volume extent: N or D,H,W"},
      {"effect_size", "1.0", "synthetic intensity drop inside the class-1 region"},
      {"noise_std", "0.1", "synthetic per-scan noise"},
  };
  return kKeys;
}

CliConfig::CliConfig() {
  for (const KeySpec& k : keys()) values_[k.name] = k.default_value;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void CliConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void CliConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ConfigError("unknown configuration key `" + key + "`");
  values_[key] = value;
  explicit_.insert(key);
}

const std::string& CliConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key `" + key + "`");
  return it->second;
}

std::uint64_t CliConfig::u64(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return n;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got `" + v + "`");
  }
}

std::size_t CliConfig::size(const std::string& key) const {
  return static_cast<std::size_t>(u64(key));
}

double CliConfig::real(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got `" + v + "`");
  }
}

bool CliConfig::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got `" + v + "`");
}

std::vector<std::size_t> CliConfig::size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      std::size_t used = 0;
      if (item.empty() || item[0] == '-') throw std::invalid_argument("bad");
      out.push_back(std::stoul(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected comma-separated integers, got `" + str(key) + "`");
    }
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

MgNetConfig CliConfig::model_config() const {
  MgNetConfig c;
  c.num_grids = size("num_grids");
  c.smoothing_iters = size_list("smoothing_iters");
  c.feature_channels = size("feature_channels");
  c.data_channels = size("data_channels");
  c.input_channels = size("input_channels");
  c.num_classes = size("num_classes");
  c.use_avg_pool = flag("use_avg_pool");
  c.share_smoothers = flag("share_smoothers");
  c.seed = u64("seed_model");
  c.validate();
  return c;
}

TrainConfig CliConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = real("learning_rate");
  t.batch_size = size("batch_size");
  t.epochs = size("epochs");
  t.seed = u64("seed_train");
  t.log_every = size("log_every");
  t.validate();
  return t;
}

SynthSpec CliConfig::synth_spec() const {
  SynthSpec s;
  s.subjects_per_class = size("subjects_per_class");
  s.scans_per_subject = size("scans_per_subject");
  const auto extents = size_list("volume_size");
  if (extents.size() != 1 && extents.size() != 3) {
    throw ConfigError("volume_size must be N or D,H,W");
  }
  s.geometry = {size("input_channels"), extents[0], extents[extents.size() == 3 ? 1 : 0],
                extents[extents.size() == 3 ? 2 : 0]};
  s.effect_size = real("effect_size");
  s.noise_std = real("noise_std");
  s.seed = u64("seed_data");
  return s;
}

Aggregation CliConfig::aggregation() const {
  const std::string& v = str("aggregation");
  if (v == "scan") return Aggregation::kScan;
  if (v == "subject") return Aggregation::kSubject;
  throw ConfigError("aggregation must be scan or subject, got `" + v + "`");
}

std::string CliConfig::seed_header() const {
  std::string out;
  for (const char* key : {"seed_model", "seed_train", "seed_split"}) {
    out += std::string(key) + "=" + str(key) + (is_set(key) ? "" : " # default") + "\n";
  }
  return out;
}

}  // namespace mgnet::cli
