#include "xview/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <type_traits>

namespace xview {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorCode::kConfig, "invalid value '" + value + "' for " + key);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out))
    bad_value(key, v);
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v);
}

template <typename T>
SettingKey make_key(std::string name, std::string help, std::function<T&(RunSettings&)> ref) {
  SettingKey k;
  k.name = name;
  k.help = std::move(help);
  k.get = [ref](const RunSettings& s) {
    T& v = ref(const_cast<RunSettings&>(s));
    if constexpr (std::is_same_v<T, double>) return format_double(v);
    else if constexpr (std::is_same_v<T, bool>) return std::string(v ? "true" : "false");
    else return std::to_string(v);
  };
  k.set = [ref, name](RunSettings& s, const std::string& value) {
    T& v = ref(s);
    if constexpr (std::is_same_v<T, double>) v = to_double(name, value);
    else if constexpr (std::is_same_v<T, bool>) v = to_bool(name, value);
    else v = to_int<T>(name, value);
  };
  return k;
}

#define XV_KEY(type, name, help, expr) \
  make_key<type>(name, help, [](RunSettings& s) -> type& { return expr; })

std::vector<SettingKey> build_keys() {
  std::vector<SettingKey> keys = {
      // encoder
      XV_KEY(Index, "hidden_dim", "encoder hidden width", s.train.dims.hidden),
      XV_KEY(Index, "embed_dim", "embedding width", s.train.dims.embed),
      // optimization
      XV_KEY(double, "alpha", "memory momentum factor", s.train.alpha),
      XV_KEY(double, "lr", "SGD learning rate", s.train.lr),
      XV_KEY(double, "lr_decay", "per-epoch learning-rate multiplier", s.train.lr_decay),
      XV_KEY(int, "epochs", "training epochs", s.train.epochs),
      XV_KEY(Index, "batch", "queries per view per minibatch (= p * z)", s.train.batch),
      XV_KEY(Index, "p_clusters", "clusters per minibatch", s.train.p_clusters),
      XV_KEY(Index, "z_instances", "instances per cluster", s.train.z_instances),
      XV_KEY(Index, "iters_per_epoch", "minibatches per epoch", s.train.iters_per_epoch),
      XV_KEY(Index, "replication", "satellite replication for clustering", s.train.replication),
      XV_KEY(double, "tau", "softmax temperature", s.train.tau),
      XV_KEY(bool, "renormalize_memory", "renormalize centroids after updates", s.train.renormalize_memory),
      // hierarchical memory
      XV_KEY(double, "lambda_cv", "weight of the fused-memory loss", s.train.lambda_cv),
      XV_KEY(double, "w_long", "long-term fusion weight", s.train.w_long),
      XV_KEY(double, "w_short", "short-term fusion weight", s.train.w_short),
      // neighborhoods
      XV_KEY(double, "gamma", "neighborhood threshold ratio", s.train.gamma),
      XV_KEY(Index, "k1", "strict neighborhood size", s.train.k1),
      XV_KEY(Index, "k2", "expanded neighborhood size", s.train.k2),
      XV_KEY(double, "lambda_k1", "mutual-information loss weight", s.train.lambda_k1),
      XV_KEY(double, "lambda_k2", "consistency loss weight", s.train.lambda_k2),
      // label refinement
      XV_KEY(double, "sigma", "perturbation std-dev", s.train.sigma),
      XV_KEY(Index, "ple_depth", "ranking depth for the vote", s.train.ple_depth),
      XV_KEY(Index, "ple_keep", "entries kept per smoothing row", s.train.ple_keep),
      XV_KEY(Index, "ple_replication", "satellite replication inside refinement", s.train.ple_replication),
      XV_KEY(bool, "ple_symmetric", "also refine drone labels against satellites", s.train.ple_symmetric),
      // clustering
      XV_KEY(double, "dbscan_eps", "cosine-distance radius", s.train.dbscan.eps),
      XV_KEY(Index, "dbscan_min_pts", "minimum neighborhood size of a core point", s.train.dbscan.min_pts),
      // loss composition
      XV_KEY(double, "coef_cv", "multiplier on L_cv in the total", s.train.coef_cv),
      XV_KEY(double, "coef_dhml", "multiplier on L_dhml in the total", s.train.coef_dhml),
      XV_KEY(double, "coef_icel", "multiplier on L_icel in the total", s.train.coef_icel),
      XV_KEY(std::uint64_t, "seed", "training seed", s.train.seed),
      // synthetic corpus
      XV_KEY(Index, "locations", "synthetic locations", s.synthetic.num_locations),
      XV_KEY(Index, "latent_dim", "synthetic latent width", s.synthetic.latent_dim),
      XV_KEY(Index, "input_dim", "synthetic raw input width", s.synthetic.input_dim),
      XV_KEY(Index, "drone_per_loc", "drone instances per location", s.synthetic.drone_per_loc),
      XV_KEY(Index, "sat_per_loc", "satellite instances per location", s.synthetic.sat_per_loc),
      XV_KEY(double, "noise_std", "synthetic input noise", s.synthetic.noise_std),
      XV_KEY(double, "view_overlap", "cosine between the two view maps", s.synthetic.view_overlap),
      XV_KEY(std::uint64_t, "data_seed", "synthetic corpus seed", s.synthetic.seed),
  };

  SettingKey rule;
  rule.name = "long_term_rule";
  rule.help = "long-term update rule: literal|normalized";
  rule.get = [](const RunSettings& s) {
    return std::string(s.train.long_term_rule == LongTermRule::kLiteral ? "literal" : "normalized");
  };
  rule.set = [](RunSettings& s, const std::string& v) {
    if (v == "literal") s.train.long_term_rule = LongTermRule::kLiteral;
    else if (v == "normalized") s.train.long_term_rule = LongTermRule::kNormalized;
    else bad_value("long_term_rule", v);
  };
  keys.push_back(std::move(rule));

  SettingKey ablation;
  ablation.name = "ablation";
  ablation.help = "enabled components: baseline|dhml|icel|full";
  ablation.get = [](const RunSettings& s) { return std::string(to_string(s.train.ablation)); };
  ablation.set = [](RunSettings& s, const std::string& v) { s.train.ablation = parse_ablation(v); };
  keys.push_back(std::move(ablation));

  for (auto& k : keys)
    k.synthetic = k.name == "locations" || k.name == "latent_dim" || k.name == "input_dim" ||
                  k.name == "drone_per_loc" || k.name == "sat_per_loc" || k.name == "noise_std" ||
                  k.name == "view_overlap" || k.name == "data_seed";
  return keys;
}

#undef XV_KEY

}  // namespace

const std::vector<SettingKey>& settings_keys() {
  static const std::vector<SettingKey> keys = build_keys();
  return keys;
}

const SettingKey* find_setting(const std::string& name) {
  for (const auto& k : settings_keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::map<std::string, std::string> parse_settings(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": expected key = value");
    if (find_setting(key) == nullptr)
      fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!out.emplace(key, value).second)
      fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return out;
}

std::map<std::string, std::string> parse_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot open config file: " + path);
  return parse_settings(in);
}

void apply_setting(RunSettings& settings, const std::string& key, const std::string& value) {
  const SettingKey* k = find_setting(key);
  if (k == nullptr) fail(ErrorCode::kConfig, "unknown setting '" + key + "'");
  k->set(settings, value);
}

const char* to_string(SettingSource s) {
  switch (s) {
    case SettingSource::kDefault: return "default";
    case SettingSource::kFile: return "file";
    case SettingSource::kFlag: return "flag";
  }
  return "default";
}

std::vector<ResolvedSetting> resolve_settings(RunSettings& settings,
                                              const std::map<std::string, std::string>& file,
                                              const std::map<std::string, std::string>& flags) {
  std::vector<ResolvedSetting> out;
  for (const auto& k : settings_keys()) {
    SettingSource src = SettingSource::kDefault;
    if (auto it = flags.find(k.name); it != flags.end()) {
      k.set(settings, it->second);
      src = SettingSource::kFlag;
    } else if (auto jt = file.find(k.name); jt != file.end()) {
      k.set(settings, jt->second);
      src = SettingSource::kFile;
    }
    out.push_back({k.name, k.get(settings), src});
  }
  for (const auto& [key, value] : flags)
    if (find_setting(key) == nullptr) fail(ErrorCode::kConfig, "unknown setting '" + key + "'");
  return out;
}

}  // namespace xview
