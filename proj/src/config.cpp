#include "spacemoe/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "spacemoe/error.hpp"

#ifndef SPACEMOE_SCENARIO_DIR
#define SPACEMOE_SCENARIO_DIR "scenarios"
#endif

namespace spacemoe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json& shell_template() {
  static const json t = {{"planes", 6},         {"sats_per_plane", 11}, {"altitude_km", 550.0},
                         {"inclination_deg", 53.0}, {"phasing_factor", 1},  {"raan_offset_deg", 0.0},
                         {"shell_id", 0}};
  return t;
}

const json& split_template() {
  static const json t = {{"first_layer", 0}, {"last_layer", 0}, {"host", "sat-0-0-0"}};
  return t;
}

// Templates for arrays whose elements are objects.
const json* element_template(const std::string& path) {
  if (path == "constellation.shells") return &shell_template();
  if (path == "placement.split") return &split_template();
  return nullptr;
}

// Objects whose keys are free-form (satellite ids, expert keys).
bool free_form(const std::string& path) {
  return path == "placement.capacity_overrides" || path == "placement.given";
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

bool compatible(const json& def, const json& v) {
  if (def.is_null()) return true;
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

std::string type_name(const json& def) {
  if (def.is_boolean()) return "boolean";
  if (def.is_number_integer()) return "integer";
  if (def.is_number()) return "number";
  if (def.is_string()) return "string";
  if (def.is_array()) return "array";
  return "object";
}

json merge(const json& def, const json& user, const std::string& path);

json merge_element(const json& tmpl, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("'" + path + "' must be an object");
  return merge(tmpl, user, path);
}

json merge(const json& def, const json& user, const std::string& path) {
  if (!compatible(def, user)) {
    throw ConfigError("'" + path + "' must be " + type_name(def) + ", got " + user.dump());
  }
  if (def.is_object() && !free_form(path)) {
    json out = def;
    for (const auto& [key, value] : user.items()) {
      const auto sub = join(path, key);
      if (!def.contains(key)) throw ConfigError("unknown config key '" + sub + "'");
      out[key] = merge(def[key], value, sub);
    }
    return out;
  }
  if (def.is_array()) {
    if (const json* tmpl = element_template(path)) {
      json out = json::array();
      for (std::size_t i = 0; i < user.size(); ++i) {
        out.push_back(merge_element(*tmpl, user[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
  }
  if (def.is_number_integer() && user.is_number_float()) return json(static_cast<std::int64_t>(user.get<double>()));
  return user;
}

void collect_paths(const json& node, const std::string& prefix, std::vector<std::string>& out) {
  if (node.is_object() && !node.empty() && !free_form(prefix)) {
    for (const auto& [key, value] : node.items()) collect_paths(value, join(prefix, key), out);
    return;
  }
  out.push_back(prefix);
}

// Recursive object merge used for "extends": later documents win.
void overlay(json& base, const json& top) {
  for (const auto& [key, value] : top.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object() && !free_form(key)) {
      overlay(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

json parse_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset → line/column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

json read_with_extends(const fs::path& path, std::set<std::string>& seen) {
  const auto canonical = fs::weakly_canonical(path).string();
  if (!seen.insert(canonical).second) throw ConfigError("config 'extends' cycle at " + path.string());
  json doc = parse_file(path);
  if (!doc.is_object()) throw ConfigError(path.string() + ": top level must be an object");
  if (!doc.contains("extends")) return doc;
  if (!doc["extends"].is_string()) throw ConfigError(path.string() + ": 'extends' must be a string");
  const std::string parent_name = doc["extends"].get<std::string>();
  doc.erase("extends");
  fs::path parent = path.parent_path() / parent_name;
  if (!fs::exists(parent)) parent = resolve_config_path(parent_name);
  json base = read_with_extends(parent, seen);
  overlay(base, doc);
  return base;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  return parts;
}

std::string valid_paths_message() {
  std::string msg = "valid paths:";
  for (const auto& p : config_paths()) msg += "\n  " + p;
  return msg;
}

SkewMode parse_skew_mode(const std::string& s) {
  if (s == "logit_noise") return SkewMode::LogitNoise;
  if (s == "direct_zipf") return SkewMode::DirectZipf;
  throw ConfigError("unknown skew mode '" + s + "' (logit_noise|direct_zipf)");
}

RoutingMode parse_routing_mode(const std::string& s) {
  if (s == "shortest") return RoutingMode::Shortest;
  if (s == "thermal_aware") return RoutingMode::ThermalAware;
  throw ConfigError("unknown routing mode '" + s + "' (shortest|thermal_aware)");
}

SatelliteId parse_sat(const json& v, const std::string& path) {
  try {
    return SatelliteId::parse(v.get<std::string>());
  } catch (const Error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

}  // namespace

const json& default_config() {
  static const json d = {
      {"constellation",
       {{"shells", json::array({shell_template()})},
        {"isl_rate_bps", 10e9},
        {"cross_shell", false},
        {"cross_shell_rate_bps", 5e9},
        {"sun_direction", {1.0, 0.0, 0.0}},
        {"snapshot_interval_s", 10.0}}},
      {"model",
       {{"num_layers", 4},
        {"experts_per_layer", 8},
        {"top_k", 2},
        {"hidden_dim", 64},
        {"bytes_per_element", 2},
        {"expert_flops", 3.5e8},
        {"expert_memory_bytes", 1048576},
        {"non_expert_flops", 1e8},
        {"non_expert_memory_bytes", 0},
        {"skew", {{"mode", "logit_noise"}, {"exponent", 1.0}, {"noise_sigma", 0.5}}},
        {"similarity_tau", 0.3}}},
      {"power",
       {{"solar_panel_w", 800.0},
        {"idle_load_w", 300.0},
        {"compute_w_per_gflops", 0.05},
        {"tx_w_per_gbps", 5.0},
        {"compute_flops", 1e13},
        {"battery", {{"capacity_wh", 1000.0}, {"soc", 1.0}, {"health", 1.0}}},
        {"degradation", {{"k_d", 1e-4}, {"alpha", 1.1}, {"beta", 0.5}, {"health_floor", 0.6}}}}},
      {"thermal",
       {{"emissivity", 0.9},
        {"radiator_area_m2", 1.0},
        {"radiator_temp_k", 290.0},
        {"absorptivity", 0.2},
        {"sun_facing_area_m2", 0.25},
        {"earth_facing_area_m2", 1.0},
        {"electronics_w", 20.0},
        {"solar_flux_w_m2", 1361.0},
        {"albedo", 0.3},
        {"earth_ir_w_m2", 237.0}}},
      {"placement",
       {{"strategy", "mobility_aware"},
        {"architecture", "spacemoe"},
        {"capacity_bytes", 4194304},
        {"capacity_overrides", json::object()},
        {"replica_budget_bytes", 0},
        {"horizon_s", 0.0},
        {"sample_interval_s", 60.0},
        {"split", json::array()},
        {"split_u_shaped", true},
        {"given", nullptr}}},
      {"selection", {{"policy", "topk"}, {"epsilon", 0.0}, {"w_util", 1.0}, {"w_deg", 1.0}}},
      {"routing",
       {{"mode", "shortest"},
        {"latency_sensitive", true},
        {"importance_aware", true},
        {"r_min", 0.25},
        {"d_max", 0.2},
        {"gamma", 1.0}}},
      {"workload",
       {{"seed", 0},
        {"arrival_rate_hz", 0.5},
        {"tokens_per_request", 10},
        {"duration_s", 1000.0},
        {"poisson", false},
        {"profile_tokens", 2000},
        {"source",
         {{"mode", "fixed"},
          {"satellite", "sat-0-0-0"},
          {"lat_deg", 0.0},
          {"lon_deg", 0.0},
          {"min_elevation_deg", 25.0}}}}},
      {"output", {{"label", "spacemoe"}, {"thermal_series_sats", json::array()}, {"thermal_series_horizon_s", 0.0}}},
  };
  return d;
}

std::vector<std::string> config_paths() {
  std::vector<std::string> out;
  collect_paths(default_config(), "", out);
  std::sort(out.begin(), out.end());
  return out;
}

std::string resolve_config_path(const std::string& path_or_name) {
  if (fs::exists(path_or_name) && fs::is_regular_file(path_or_name)) return path_or_name;
  const fs::path dir(SPACEMOE_SCENARIO_DIR);
  for (const auto& candidate : {dir / path_or_name, dir / (path_or_name + ".json")}) {
    if (fs::exists(candidate)) return candidate.string();
  }
  throw ConfigError("config '" + path_or_name + "' not found (no such file or bundled scenario in " +
                    dir.string() + ")");
}

json read_config_file(const std::string& path_or_name) {
  std::set<std::string> seen;
  return read_with_extends(resolve_config_path(path_or_name), seen);
}

void set_config_value(json& doc, const std::string& path, const json& value) {
  const auto parts = split_path(path);
  const json* def = &default_config();
  json* node = &doc;
  std::string prefix;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object()) *node = json::object();
    if (free_form(prefix)) {
      // remaining components form one free-form key
      std::string key = parts[i];
      for (std::size_t j = i + 1; j < parts.size(); ++j) key += "." + parts[j];
      (*node)[key] = value;
      return;
    }
    const auto& key = parts[i];
    if (!def->is_object() || !def->contains(key)) {
      throw ConfigError("unknown config path '" + path + "'; " + valid_paths_message());
    }
    prefix = join(prefix, key);
    def = &(*def)[key];
    node = &(*node)[key];
  }
  if (def->is_object() && !def->empty() && !free_form(prefix)) {
    throw ConfigError("config path '" + path + "' names a section, not a value; " + valid_paths_message());
  }
  *node = value;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_config_value(doc, key, value);
}

json resolve_config(const json& user, bool require_seed) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  if (require_seed && !(user.contains("workload") && user["workload"].is_object() && user["workload"].contains("seed"))) {
    throw ConfigError("workload.seed is mandatory");
  }
  return merge(default_config(), user, "");
}

Scenario scenario_from_config(const json& c) {
  Scenario s;
  const auto& con = c.at("constellation");
  for (const auto& sh : con.at("shells")) {
    WalkerShell w;
    w.planes = sh.at("planes").get<int>();
    w.sats_per_plane = sh.at("sats_per_plane").get<int>();
    w.altitude_km = sh.at("altitude_km").get<double>();
    w.inclination_deg = sh.at("inclination_deg").get<double>();
    w.phasing_factor = sh.at("phasing_factor").get<int>();
    w.raan_offset_deg = sh.at("raan_offset_deg").get<double>();
    w.shell_id = sh.at("shell_id").get<int>();
    s.shells.push_back(w);
  }
  s.isl.isl_rate_bps = con.at("isl_rate_bps").get<double>();
  s.isl.cross_shell = con.at("cross_shell").get<bool>();
  s.isl.cross_shell_rate_bps = con.at("cross_shell_rate_bps").get<double>();
  const auto& sun = con.at("sun_direction");
  if (sun.size() != 3) throw ConfigError("'constellation.sun_direction' must have 3 components");
  s.sun_direction = {sun[0].get<double>(), sun[1].get<double>(), sun[2].get<double>()};
  s.snapshot_interval_s = con.at("snapshot_interval_s").get<double>();

  const auto& m = c.at("model");
  s.model.num_layers = m.at("num_layers").get<int>();
  s.model.experts_per_layer = m.at("experts_per_layer").get<int>();
  s.model.top_k = m.at("top_k").get<int>();
  s.model.hidden_dim = m.at("hidden_dim").get<int>();
  s.model.bytes_per_element = m.at("bytes_per_element").get<int>();
  s.model.expert_flops = m.at("expert_flops").get<double>();
  s.model.expert_memory_bytes = m.at("expert_memory_bytes").get<std::uint64_t>();
  s.model.non_expert_flops = m.at("non_expert_flops").get<double>();
  s.model.non_expert_memory_bytes = m.at("non_expert_memory_bytes").get<std::uint64_t>();
  s.skew.mode = parse_skew_mode(m.at("skew").at("mode").get<std::string>());
  s.skew.exponent = m.at("skew").at("exponent").get<double>();
  s.skew.noise_sigma = m.at("skew").at("noise_sigma").get<double>();
  s.similarity_tau = m.at("similarity_tau").get<double>();

  const auto& p = c.at("power");
  s.power.solar_panel_w = p.at("solar_panel_w").get<double>();
  s.power.idle_load_w = p.at("idle_load_w").get<double>();
  s.power.compute_w_per_gflops = p.at("compute_w_per_gflops").get<double>();
  s.power.tx_w_per_gbps = p.at("tx_w_per_gbps").get<double>();
  s.compute_flops = p.at("compute_flops").get<double>();
  s.battery.capacity_wh = p.at("battery").at("capacity_wh").get<double>();
  s.battery.soc = p.at("battery").at("soc").get<double>();
  s.battery.anchor_soc = s.battery.soc;
  s.battery.health = p.at("battery").at("health").get<double>();
  s.degradation.k_d = p.at("degradation").at("k_d").get<double>();
  s.degradation.alpha = p.at("degradation").at("alpha").get<double>();
  s.degradation.beta = p.at("degradation").at("beta").get<double>();
  s.degradation.health_floor = p.at("degradation").at("health_floor").get<double>();

  const auto& t = c.at("thermal");
  s.thermal.emissivity = t.at("emissivity").get<double>();
  s.thermal.radiator_area_m2 = t.at("radiator_area_m2").get<double>();
  s.thermal.radiator_temp_k = t.at("radiator_temp_k").get<double>();
  s.thermal.absorptivity = t.at("absorptivity").get<double>();
  s.thermal.sun_facing_area_m2 = t.at("sun_facing_area_m2").get<double>();
  s.thermal.earth_facing_area_m2 = t.at("earth_facing_area_m2").get<double>();
  s.thermal.electronics_w = t.at("electronics_w").get<double>();
  s.thermal.env.solar_flux_w_m2 = t.at("solar_flux_w_m2").get<double>();
  s.thermal.env.albedo = t.at("albedo").get<double>();
  s.thermal.env.earth_ir_w_m2 = t.at("earth_ir_w_m2").get<double>();

  const auto& pl = c.at("placement");
  s.placement.strategy = parse_placement_strategy(pl.at("strategy").get<std::string>());
  s.placement.architecture = parse_architecture(pl.at("architecture").get<std::string>());
  s.placement.capacity.default_bytes = pl.at("capacity_bytes").get<std::uint64_t>();
  for (const auto& [id, bytes] : pl.at("capacity_overrides").items()) {
    if (!bytes.is_number_unsigned() && !bytes.is_number_integer()) {
      throw ConfigError("'placement.capacity_overrides." + id + "' must be an integer byte count");
    }
    s.placement.capacity.overrides[parse_sat(json(id), "placement.capacity_overrides")] = bytes.get<std::uint64_t>();
  }
  s.placement.replica_budget_bytes = pl.at("replica_budget_bytes").get<std::uint64_t>();
  s.placement.horizon_s = pl.at("horizon_s").get<double>();
  s.placement.sample_interval_s = pl.at("sample_interval_s").get<double>();
  for (const auto& g : pl.at("split")) {
    s.placement.split.push_back({g.at("first_layer").get<int>(), g.at("last_layer").get<int>(),
                                 parse_sat(g.at("host"), "placement.split.host")});
  }
  s.placement.split_u_shaped = pl.at("split_u_shaped").get<bool>();
  if (!pl.at("given").is_null()) {
    try {
      s.placement.given = placement_from_json(pl.at("given"), s.model);
    } catch (const Error& e) {
      throw ConfigError(std::string("'placement.given': ") + e.what());
    }
  }

  const auto& sel = c.at("selection");
  s.selection.kind = parse_selection_kind(sel.at("policy").get<std::string>());
  s.selection.epsilon = sel.at("epsilon").get<double>();
  s.selection.w_util = sel.at("w_util").get<double>();
  s.selection.w_deg = sel.at("w_deg").get<double>();

  const auto& r = c.at("routing");
  s.routing.mode = parse_routing_mode(r.at("mode").get<std::string>());
  s.routing.latency_sensitive = r.at("latency_sensitive").get<bool>();
  s.routing.transmit.importance_aware = r.at("importance_aware").get<bool>();
  s.routing.transmit.r_min = r.at("r_min").get<double>();
  s.routing.transmit.d_max = r.at("d_max").get<double>();
  s.routing.transmit.gamma = r.at("gamma").get<double>();

  const auto& w = c.at("workload");
  if (w.at("seed").get<std::int64_t>() < 0) throw ConfigError("'workload.seed' must be >= 0");
  s.workload.seed = w.at("seed").get<std::uint64_t>();
  s.workload.arrival_rate_hz = w.at("arrival_rate_hz").get<double>();
  s.workload.tokens_per_request = w.at("tokens_per_request").get<int>();
  s.workload.duration_s = w.at("duration_s").get<double>();
  s.workload.poisson = w.at("poisson").get<bool>();
  s.workload.profile_tokens = w.at("profile_tokens").get<int>();
  const auto& src = w.at("source");
  const auto mode = src.at("mode").get<std::string>();
  if (mode == "fixed") {
    s.workload.source.mode = SourceSpec::Mode::Fixed;
  } else if (mode == "ground") {
    s.workload.source.mode = SourceSpec::Mode::Ground;
  } else {
    throw ConfigError("unknown source mode '" + mode + "' (fixed|ground)");
  }
  s.workload.source.satellite = parse_sat(src.at("satellite"), "workload.source.satellite");
  s.workload.source.station = {src.at("lat_deg").get<double>(), src.at("lon_deg").get<double>()};
  s.workload.source.min_elevation_deg = src.at("min_elevation_deg").get<double>();

  s.label = c.at("output").at("label").get<std::string>();
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

OutputSettings output_from_config(const json& c) {
  OutputSettings o;
  const auto& out = c.at("output");
  o.label = out.at("label").get<std::string>();
  for (const auto& id : out.at("thermal_series_sats")) o.thermal_sats.push_back(parse_sat(id, "output.thermal_series_sats"));
  o.thermal_horizon_s = out.at("thermal_series_horizon_s").get<double>();
  return o;
}

std::string config_hash(const json& resolved) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : resolved.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LoadedConfig load_config_json(const json& user, const std::vector<std::string>& overrides) {
  json doc = user;
  doc.erase("extends");
  for (const auto& o : overrides) apply_override(doc, o);
  LoadedConfig lc;
  lc.resolved = resolve_config(doc);
  lc.scenario = scenario_from_config(lc.resolved);
  lc.output = output_from_config(lc.resolved);
  lc.hash = config_hash(lc.resolved);
  return lc;
}

LoadedConfig load_config(const std::string& path_or_name, const std::vector<std::string>& overrides) {
  return load_config_json(read_config_file(path_or_name), overrides);
}

}  // namespace spacemoe
