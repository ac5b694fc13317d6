#include "mep/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace mep {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t as_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw Error("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

double as_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error("config key '" + key + "': expected a real number, got '" + v + "'");
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define COUNT_FIELD(name, member)                                                                 \
  {                                                                                               \
    name, Field {                                                                                 \
      [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = as_count(k, v); }, \
          [](const TrainConfig& c) { return std::to_string(c.member); }                          \
    }                                                                                             \
  }
#define REAL_FIELD(name, member)                                                                 \
  {                                                                                              \
    name, Field {                                                                                \
      [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = as_real(k, v); }, \
          [](const TrainConfig& c) { return fmt_real(c.member); }                               \
    }                                                                                            \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"env", Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                      if (!is_known_env(v))
                        throw Error("config key '" + k + "': unknown environment '" + v + "'");
                      c.env = v;
                    },
                    [](const TrainConfig& c) { return c.env; }}},
      {"method", Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                         try {
                           c.method = parse_method(v);
                         } catch (const Error& e) {
                           throw Error("config key '" + k + "': " + e.what());
                         }
                       },
                       [](const TrainConfig& c) { return to_string(c.method); }}},
      COUNT_FIELD("epochs", epochs),
      COUNT_FIELD("episodes_per_epoch", episodes_per_epoch),
      COUNT_FIELD("cycles_per_epoch", cycles_per_epoch),
      COUNT_FIELD("optimization_steps", optimization_steps),
      COUNT_FIELD("batch_size", batch_size),
      {"seed", Field{[](TrainConfig& c, const std::string& k, const std::string& v) {
                       c.seed = as_count(k, v);
                     },
                     [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      COUNT_FIELD("buffer_capacity", buffer_capacity),
      COUNT_FIELD("eval_episodes", eval_episodes),
      COUNT_FIELD("mog_components", mog_components),
      COUNT_FIELD("mog_iters", mog_iters),
      REAL_FIELD("mog_tol", mog_tol),
      REAL_FIELD("relabel_prob", relabel_prob),
      REAL_FIELD("per_alpha", per_alpha),
      REAL_FIELD("per_beta_start", per_beta_start),
      REAL_FIELD("per_beta_end", per_beta_end),
      COUNT_FIELD("pearson_every", pearson_every),
      COUNT_FIELD("entropy_grid", entropy_grid),
      COUNT_FIELD("hidden_layers", agent.hidden_layers),
      COUNT_FIELD("hidden_units", agent.hidden_units),
      REAL_FIELD("gamma", agent.gamma),
      REAL_FIELD("polyak", agent.polyak),
      REAL_FIELD("noise_sigma", agent.noise_sigma),
      REAL_FIELD("random_eps", agent.random_eps),
      REAL_FIELD("actor_lr", agent.actor_lr),
      REAL_FIELD("critic_lr", agent.critic_lr),
      REAL_FIELD("action_l2", agent.action_l2),
  };
  return table;
}

#undef COUNT_FIELD
#undef REAL_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : fields())
    if (name == key) return &field;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

TrainConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides) {
  TrainConfig config;
  std::set<std::string> seen;
  auto apply = [&](const std::string& key, const std::string& value) {
    const Field* f = find_field(key);
    if (f == nullptr) throw Error("unknown config key '" + key + "'");
    f->set(config, key, value);
    seen.insert(key);
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected 'key: value'");
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    apply(key, value);
  }
  for (const auto& [key, value] : overrides) apply(key, value);

  for (const char* required : {"env", "method"})
    if (!seen.count(required)) throw Error(std::string("missing required config key '") + required + "'");
  config.validate();
  return config;
}

TrainConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), overrides);
}

std::string config_to_text(const TrainConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + ": " + field.get(config) + "\n";
  return out;
}

}  // namespace mep
