#include "strange/cli/config_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "strange/errors.hpp"

namespace strange::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  std::string key;
  std::function<void(trainer::TrainConfig&, const std::string&)> set;
  std::function<std::string(const trainer::TrainConfig&)> get;
};

template <class T>
Field integer(std::string key, T trainer::TrainConfig::*member) {
  return {key, [key, member](trainer::TrainConfig& c, const std::string& v) { c.*member = parse_integer<T>(key, v); },
          [member](const trainer::TrainConfig& c) { return std::to_string(c.*member); }};
}

Field number(std::string key, double trainer::TrainConfig::*member) {
  return {key, [key, member](trainer::TrainConfig& c, const std::string& v) { c.*member = parse_real(key, v); },
          [member](const trainer::TrainConfig& c) { return real(c.*member); }};
}

const std::vector<Field>& fields() {
  using trainer::TrainConfig;
  static const std::vector<Field> all = {
      {"env.kind", [](TrainConfig& c, const std::string& v) { c.env.kind = v; },
       [](const TrainConfig& c) { return c.env.kind; }},
      {"env.k", [](TrainConfig& c, const std::string& v) { c.env.k = parse_integer<int>("env.k", v); },
       [](const TrainConfig& c) { return std::to_string(c.env.k); }},
      {"env.layout", [](TrainConfig& c, const std::string& v) { c.env.layout = v; },
       [](const TrainConfig& c) { return c.env.layout; }},
      {"env.max_steps", [](TrainConfig& c, const std::string& v) { c.env.max_steps = parse_integer<int>("env.max_steps", v); },
       [](const TrainConfig& c) { return std::to_string(c.env.max_steps); }},
      {"algo.mixer", [](TrainConfig& c, const std::string& v) { c.mixer = marl::mixer_kind_from_string(v); },
       [](const TrainConfig& c) { return marl::to_string(c.mixer); }},
      {"algo.exploration", [](TrainConfig& c, const std::string& v) { c.exploration = trainer::exploration_from_string(v); },
       [](const TrainConfig& c) { return trainer::to_string(c.exploration); }},
      {"algo.use_exploration_q",
       [](TrainConfig& c, const std::string& v) { c.use_exploration_q = parse_bool("algo.use_exploration_q", v); },
       [](const TrainConfig& c) { return std::string(c.use_exploration_q ? "true" : "false"); }},
      {"algo.shared_sim", [](TrainConfig& c, const std::string& v) { c.shared_sim = parse_bool("algo.shared_sim", v); },
       [](const TrainConfig& c) { return std::string(c.shared_sim ? "true" : "false"); }},
      {"algo.rho", [](TrainConfig& c, const std::string& v) { c.bonus.rho = parse_real("algo.rho", v); },
       [](const TrainConfig& c) { return real(c.bonus.rho); }},
      {"algo.beta", [](TrainConfig& c, const std::string& v) { c.bonus.beta = parse_real("algo.beta", v); },
       [](const TrainConfig& c) { return real(c.bonus.beta); }},
      {"algo.d", [](TrainConfig& c, const std::string& v) { c.bonus.d = parse_integer<int>("algo.d", v); },
       [](const TrainConfig& c) { return std::to_string(c.bonus.d); }},
      integer("algo.agent_hidden", &TrainConfig::agent_hidden),
      integer("algo.mixer_embed", &TrainConfig::mixer_embed),
      number("train.alpha", &TrainConfig::alpha),
      number("train.gamma", &TrainConfig::gamma),
      number("train.epsilon_start", &TrainConfig::epsilon_start),
      number("train.epsilon_end", &TrainConfig::epsilon_end),
      integer("train.epsilon_anneal_steps", &TrainConfig::epsilon_anneal_steps),
      integer("train.batch_size", &TrainConfig::batch_size),
      integer("train.target_sync_interval", &TrainConfig::target_sync_interval),
      integer("train.train_interval", &TrainConfig::train_interval),
      integer("train.total_env_steps", &TrainConfig::total_env_steps),
      integer("train.eval_interval", &TrainConfig::eval_interval),
      integer("train.eval_episodes", &TrainConfig::eval_episodes),
      integer("train.seed", &TrainConfig::seed),
      integer("train.buffer_capacity", &TrainConfig::buffer_capacity),
      number("train.grad_clip", &TrainConfig::grad_clip),
      {"train.optimizer", [](TrainConfig& c, const std::string& v) { c.optimizer = nn::optimizer_kind_from_string(v); },
       [](const TrainConfig& c) { return nn::to_string(c.optimizer); }},
      integer("train.checkpoint_interval", &TrainConfig::checkpoint_interval),
  };
  return all;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

struct Entry {
  std::string key;
  std::string value;
  std::string where;
};

}  // namespace

trainer::TrainConfig parse_config_text(const std::string& text, const Overrides& overrides) {
  std::vector<Entry> entries;
  std::map<std::string, std::string> seen;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno);
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + ": malformed section header '" + body + "'");
      section = trim(body.substr(1, body.size() - 2));
      if (section != "env" && section != "algo" && section != "train") {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value, got '" + body + "'");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = section + "." + trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!find_field(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    if (seen.count(key)) throw ConfigError(where + ": duplicate key '" + key + "' (first at " + seen[key] + ")");
    seen[key] = where;
    entries.push_back({key, value, where});
  }
  for (const auto& [key, value] : overrides) {
    if (!find_field(key)) throw ConfigError("override: unknown key '" + key + "'");
    entries.push_back({key, value, "override " + key});
  }

  std::string kind = "matrix_game";
  bool explicit_eq = false;
  for (const Entry& e : entries) {
    if (e.key == "env.kind") kind = e.value;
    if (e.key == "algo.use_exploration_q") explicit_eq = true;
  }
  trainer::TrainConfig config;
  try {
    config = trainer::default_config(kind);
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("env.kind: ") + err.what());
  }
  for (const Entry& e : entries) {
    try {
      find_field(e.key)->set(config, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(e.where + ": " + err.what());
    }
  }
  if (!explicit_eq) config.use_exploration_q = config.exploration == trainer::Exploration::sim;
  try {
    config.validate();
  } catch (const ConfigError& err) {
    // Range errors name their field first; point at the line that set it.
    const std::string msg = err.what();
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
      const std::string name = it->key.substr(it->key.find('.') + 1);
      if (msg.rfind(name + " ", 0) == 0 || msg.rfind(it->key + " ", 0) == 0) throw ConfigError(it->where + ": " + msg);
    }
    throw;
  }
  return config;
}

trainer::TrainConfig parse_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str(), overrides);
  } catch (const ConfigError& err) {
    throw ConfigError(path + ": " + err.what());
  }
}

std::string serialize_config(const trainer::TrainConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const Field& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << f.key.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
  return os.str();
}

Overrides algo_overrides(const std::string& shorthand) {
  const auto plus = shorthand.find('+');
  Overrides out;
  out["algo.mixer"] = shorthand.substr(0, plus);
  out["algo.exploration"] = plus == std::string::npos ? "none" : shorthand.substr(plus + 1);
  marl::mixer_kind_from_string(out["algo.mixer"]);
  trainer::exploration_from_string(out["algo.exploration"]);
  return out;
}

bool same_config(const trainer::TrainConfig& a, const trainer::TrainConfig& b) {
  for (const Field& f : fields()) {
    if (f.get(a) != f.get(b)) return false;
  }
  return true;
}

}  // namespace strange::cli
