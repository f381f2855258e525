#include "neurphy/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <functional>
#include <sstream>

#include "neurphy/error.hpp"
#include "neurphy/io_util.hpp"

namespace neurphy {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kConfig, "key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kConfig, "key '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) {
    const auto v = parse_uint(key, item);
    if (v == 0) throw Error(ErrorCode::kConfig, "key '" + key + "' has a zero width");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_real(key, item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

struct KeyHandler {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Ref>
KeyHandler real(const char* section, const char* name, const char* help, Ref ref) {
  return {{section, name, help},
          [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_real(name, v); },
          [ref](const RunConfig& c) { return format_real(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
KeyHandler count(const char* section, const char* name, const char* help, Ref ref) {
  return {{section, name, help},
          [ref, name](RunConfig& c, const std::string& v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_uint(name, v));
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
KeyHandler widths(const char* name, const char* help, Ref ref) {
  return {{"model", name, help},
          [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_widths(name, v); },
          [ref](const RunConfig& c) { return join(ref(const_cast<RunConfig&>(c))); }};
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    t.push_back({{"physics", "system", "pendulum or orbit"},
                 [](RunConfig& c, const std::string& v) { c.grid.system = physics::system_from_string(trim(v)); },
                 [](const RunConfig& c) { return std::string(physics::to_string(c.grid.system)); }});
    t.push_back(count("physics", "steps", "frames per trajectory", [](RunConfig& c) -> std::size_t& { return c.grid.steps; }));
    t.push_back(real("physics", "dt", "integrator step per frame", [](RunConfig& c) -> double& { return c.grid.dt; }));
    t.push_back(count("physics", "data_seed", "seed recorded in generated tasks",
                      [](RunConfig& c) -> std::uint64_t& { return c.grid.seed; }));
    t.push_back(real("physics", "l_min", "pendulum length lower bound", [](RunConfig& c) -> double& { return c.grid.l.min; }));
    t.push_back(real("physics", "l_max", "pendulum length upper bound", [](RunConfig& c) -> double& { return c.grid.l.max; }));
    t.push_back(count("physics", "l_steps", "pendulum length grid points", [](RunConfig& c) -> std::size_t& { return c.grid.l.steps; }));
    t.push_back(real("physics", "m_min", "pendulum mass lower bound", [](RunConfig& c) -> double& { return c.grid.m.min; }));
    t.push_back(real("physics", "m_max", "pendulum mass upper bound", [](RunConfig& c) -> double& { return c.grid.m.max; }));
    t.push_back(count("physics", "m_steps", "pendulum mass grid points", [](RunConfig& c) -> std::size_t& { return c.grid.m.steps; }));
    t.push_back(real("physics", "g", "gravitational constant", [](RunConfig& c) -> double& { return c.grid.g; }));
    t.push_back(real("physics", "mu", "damping coefficient", [](RunConfig& c) -> double& { return c.grid.mu; }));
    t.push_back(real("physics", "theta0", "initial pendulum angle", [](RunConfig& c) -> double& { return c.grid.theta0; }));
    t.push_back(real("physics", "omega0", "initial angular velocity", [](RunConfig& c) -> double& { return c.grid.omega0; }));
    t.push_back(real("physics", "r0_min", "initial orbit radius lower bound", [](RunConfig& c) -> double& { return c.grid.r0.min; }));
    t.push_back(real("physics", "r0_max", "initial orbit radius upper bound", [](RunConfig& c) -> double& { return c.grid.r0.max; }));
    t.push_back(count("physics", "r0_steps", "initial radius grid points", [](RunConfig& c) -> std::size_t& { return c.grid.r0.steps; }));
    t.push_back(real("physics", "v0r_min", "initial radial velocity lower bound", [](RunConfig& c) -> double& { return c.grid.v0r.min; }));
    t.push_back(real("physics", "v0r_max", "initial radial velocity upper bound", [](RunConfig& c) -> double& { return c.grid.v0r.max; }));
    t.push_back(count("physics", "v0r_steps", "radial velocity grid points", [](RunConfig& c) -> std::size_t& { return c.grid.v0r.steps; }));
    t.push_back(real("physics", "v0theta_min", "initial tangential velocity lower bound",
                     [](RunConfig& c) -> double& { return c.grid.v0theta.min; }));
    t.push_back(real("physics", "v0theta_max", "initial tangential velocity upper bound",
                     [](RunConfig& c) -> double& { return c.grid.v0theta.max; }));
    t.push_back(count("physics", "v0theta_steps", "tangential velocity grid points",
                      [](RunConfig& c) -> std::size_t& { return c.grid.v0theta.steps; }));
    t.push_back(real("physics", "GM", "gravitational parameter", [](RunConfig& c) -> double& { return c.grid.GM; }));

    t.push_back(count("model", "dim_z", "latent state width", [](RunConfig& c) -> std::size_t& { return c.model.dim_z; }));
    t.push_back(count("model", "dim_r", "global representation width", [](RunConfig& c) -> std::size_t& { return c.model.dim_r; }));
    t.push_back(widths("context_widths", "context encoder hidden widths",
                       [](RunConfig& c) -> std::vector<std::size_t>& { return c.model.context_widths; }));
    t.push_back(widths("recognition_widths", "recognition hidden widths",
                       [](RunConfig& c) -> std::vector<std::size_t>& { return c.model.recognition_widths; }));
    t.push_back(widths("transition_widths", "transition hidden widths",
                       [](RunConfig& c) -> std::vector<std::size_t>& { return c.model.transition_widths; }));
    t.push_back(widths("decoder_widths", "decoder hidden widths",
                       [](RunConfig& c) -> std::vector<std::size_t>& { return c.model.decoder_widths; }));

    t.push_back(count("train", "D", "maximum overshooting length", [](RunConfig& c) -> std::size_t& { return c.train.D; }));
    t.push_back({{"train", "beta", "KL weights beta_1..beta_D (one value broadcasts)"},
                 [](RunConfig& c, const std::string& v) {
                   c.train.beta = parse_reals("beta", v);
                   // A single 1 is the default; keep one representation of it.
                   if (c.train.beta == std::vector<double>{1.0}) c.train.beta.clear();
                 },
                 [](const RunConfig& c) { return c.train.beta.empty() ? std::string("1") : join(c.train.beta); }});
    t.push_back(count("train", "batch_tasks", "tasks per optimiser step", [](RunConfig& c) -> std::size_t& { return c.train.batch_tasks; }));
    t.push_back(count("train", "epochs", "passes over the meta-train tasks", [](RunConfig& c) -> std::size_t& { return c.train.epochs; }));
    t.push_back(real("train", "lr", "Adam learning rate", [](RunConfig& c) -> double& { return c.train.lr; }));
    t.push_back(count("train", "n_c", "context pairs per task", [](RunConfig& c) -> std::size_t& { return c.train.n_c; }));
    t.push_back(real("train", "target_fraction", "share of frames used as targets",
                     [](RunConfig& c) -> double& { return c.train.target_fraction; }));
    t.push_back(real("train", "meta_train_ratio", "share of tasks used for meta-training",
                     [](RunConfig& c) -> double& { return c.train.meta_train_ratio; }));
    t.push_back(real("train", "sigma_obs", "observation noise scale", [](RunConfig& c) -> double& { return c.train.sigma_obs; }));
    t.push_back({{"train", "seed", "seed for initialisation, splits and sampling"},
                 [](RunConfig& c, const std::string& v) {
                   c.train.seed = parse_uint("seed", v);
                   c.model.init_seed = c.train.seed;
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    t.push_back(count("train", "checkpoint_every", "epochs between checkpoints (0 = only at the end)",
                      [](RunConfig& c) -> std::size_t& { return c.train.checkpoint_every; }));
    return t;
  }();
  return table;
}

const KeyHandler& handler(const std::string& key) {
  for (const auto& h : handlers()) {
    if (h.key.name == key) return h;
  }
  throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& h : handlers()) out.push_back(h.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  handler(key).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return handler(key).get(cfg); }

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "override '" + assignment + "' is not key=value");
  set_config_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, std::string("config parse error: ") + e.what());
  }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      set_config_value(cfg, name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) {
      const auto& h = handler(key);
      if (h.key.section != name) {
        throw Error(ErrorCode::kConfig, "key '" + key + "' belongs to section [" + h.key.section + "], not [" + name + "]");
      }
      h.set(cfg, leaf.data());
    }
  }
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  apply_config_text(cfg, text);
  return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) { return parse_config_text(read_file(path)); }

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& h : handlers()) {
    if (h.key.section != section) {
      if (!section.empty()) out += "\n";
      section = h.key.section;
      out += "[" + section + "]\n";
    }
    out += "; " + h.key.help + "\n";
    out += h.key.name + " = " + h.get(cfg) + "\n";
  }
  return out;
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& h : handlers()) j[h.key.section][h.key.name] = h.get(cfg);
  return j;
}

RunConfig config_from_json(const nlohmann::ordered_json& j) {
  RunConfig cfg;
  try {
    for (const auto& [section, values] : j.items()) {
      for (const auto& [key, value] : values.items()) set_config_value(cfg, key, value.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config JSON: ") + e.what());
  }
  return cfg;
}

}  // namespace neurphy
