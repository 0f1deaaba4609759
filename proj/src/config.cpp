#include "qbe/config.hpp"

#include <fstream>

#include "qbe/errors.hpp"

namespace qbe::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& RunConfig::defaults() {
  static const std::map<std::string, std::string> kDefaults = {
      {"seed", "12345"},
      {"threads", "0"},
      {"paths.archive", ""},
      {"paths.alignments", ""},
      {"paths.queries", ""},
      {"paths.model", ""},
      {"paths.history", ""},
      {"paths.embeddings", ""},
      {"paths.index", ""},
      {"paths.segments", ""},
      {"paths.hits", ""},
      {"paths.report", ""},
      {"paths.sweep", ""},
      {"paths.sweep_long", ""},
      {"synth.n_types", "20"},
      {"synth.examples_per_type", "10"},
      {"synth.proto_len_min", "40"},
      {"synth.proto_len_max", "80"},
      {"synth.warp_factor_max", "0.3"},
      {"synth.noise_sigma", "0.3"},
      {"synth.filler_len_min", "30"},
      {"synth.filler_len_max", "90"},
      {"synth.feature_dim", "39"},
      {"synth.words_per_recording", "8"},
      // Desk-scale architecture defaults; the full-scale reference setting
      // (3 layers, 256 hidden, 100 epochs) is a config away.
      {"train.layers", "1"},
      {"train.hidden", "32"},
      {"train.margin", "0.5"},
      {"train.negatives", "10"},
      {"train.batch_size", "32"},
      {"train.learning_rate", "0.001"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.999"},
      {"train.epsilon", "1e-8"},
      {"train.dropout", "0.3"},
      {"train.epochs", "10"},
      {"train.negative_rule", "min"},
      {"train.dev", "none"},
      {"window.min_len", "40"},
      {"window.max_len", "100"},
      {"window.len_step", "10"},
      {"window.stride", "5"},
      {"index.embedder", "nawe"},
      {"index.bits", "1024"},
      {"index.permutations", "16"},
      {"template.per_type", "1"},
      {"template.metric", "cosine"},
      {"query.beamwidth", "2000"},
      {"query.top_k", "10"},
      {"query.score_mode", "exact"},
      {"query.overlap_threshold", "0.5"},
      {"eval.beta", "999.9"},
      {"sweep.bits", ""},
      {"sweep.permutations", ""},
      {"sweep.beamwidths", ""},
  };
  return kDefaults;
}

RunConfig RunConfig::load(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  cfg.values_ = defaults();

  auto set_checked = [&cfg](const std::string& key, const std::string& value,
                            const std::string& origin) {
    if (cfg.values_.find(key) == cfg.values_.end())
      throw UsageError(origin + ": unknown configuration key '" + key + "'");
    cfg.values_[key] = value;
    cfg.explicitly_set_[key] = true;
  };

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config file " + config_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw UsageError(config_path + ":" + std::to_string(line_no) +
                         ": expected key=value");
      set_checked(trim(t.substr(0, eq)), trim(t.substr(eq + 1)),
                  config_path + ":" + std::to_string(line_no));
    }
  }
  for (const auto& [key, value] : overrides)
    set_checked(key, value, "command line");
  return cfg;
}

bool RunConfig::is_set(const std::string& key) const {
  auto it = explicitly_set_.find(key);
  return it != explicitly_set_.end() && it->second;
}

std::string RunConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw UsageError("unknown configuration key '" + key + "'");
  return it->second;
}

std::string RunConfig::require_path(const std::string& key) const {
  std::string v = get_string(key);
  if (v.empty())
    throw UsageError("required path '" + key + "' is not set");
  return v;
}

std::uint32_t RunConfig::get_u32(const std::string& key) const {
  std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    unsigned long r = std::stoul(v, &pos);
    if (pos != v.size() || r > 0xFFFFFFFFUL) throw std::invalid_argument(v);
    return static_cast<std::uint32_t>(r);
  } catch (const std::exception&) {
    throw UsageError("key '" + key + "': expected unsigned integer, got '" +
                     v + "'");
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(r);
  } catch (const std::exception&) {
    throw UsageError("key '" + key + "': expected unsigned integer, got '" +
                     v + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw UsageError("key '" + key + "': expected number, got '" + v + "'");
  }
}

std::vector<std::uint32_t> RunConfig::get_u32_list(const std::string& key) const {
  std::string v = get_string(key);
  if (v.empty())
    throw UsageError("key '" + key + "': expected comma-separated list");
  std::vector<std::uint32_t> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    std::size_t comma = v.find(',', start);
    std::string item = trim(comma == std::string::npos
                                ? v.substr(start)
                                : v.substr(start, comma - start));
    try {
      std::size_t pos = 0;
      unsigned long r = std::stoul(item, &pos);
      if (item.empty() || pos != item.size() || r > 0xFFFFFFFFUL)
        throw std::invalid_argument(item);
      out.push_back(static_cast<std::uint32_t>(r));
    } catch (const std::exception&) {
      throw UsageError("key '" + key + "': malformed list entry '" + item + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace qbe::cli
