#include "cvqkd/batch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "cvqkd/errors.hpp"
#include "cvqkd/oracle.hpp"

namespace cvqkd {

using nlohmann::json;

namespace {

double get_number(const json& doc, const std::string& key) {
  const json& v = doc.at(key);
  if (!v.is_number()) throw ConfigError(key, "must be a number");
  return v.get<double>();
}

int get_int(const json& doc, const std::string& key) {
  const json& v = doc.at(key);
  if (!v.is_number_integer()) throw ConfigError(key, "must be an integer");
  return v.get<int>();
}

void require_object(const json& doc, const std::string& what) {
  if (!doc.is_object()) throw ConfigError(what, "must be a JSON object");
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

}  // namespace

ProtocolConfig parse_config(const json& doc) {
  require_object(doc, "config");
  static const std::set<std::string> known = {
      "num_states", "alpha", "probs", "L_km", "eta", "xi", "beta", "delta_r", "delta_a", "n_cutoff",
      "fw_threshold", "fw_max_iters", "perturbation", "theorem_epsilon"};
  for (const auto& item : doc.items())
    if (!known.count(item.key())) throw ConfigError(item.key(), "unknown configuration key");

  ProtocolConfig cfg;
  if (doc.contains("num_states")) cfg.num_states = get_int(doc, "num_states");
  if (doc.contains("alpha")) cfg.alpha = get_number(doc, "alpha");
  if (doc.contains("probs")) {
    const json& p = doc.at("probs");
    if (!p.is_array()) throw ConfigError("probs", "must be an array of numbers");
    for (const auto& v : p) {
      if (!v.is_number()) throw ConfigError("probs", "must be an array of numbers");
      cfg.probs.push_back(v.get<double>());
    }
  }
  if (doc.contains("L_km")) cfg.distance_km = get_number(doc, "L_km");
  if (doc.contains("eta")) cfg.eta_override = get_number(doc, "eta");
  if (doc.contains("xi")) cfg.xi = get_number(doc, "xi");
  if (doc.contains("beta")) cfg.beta = get_number(doc, "beta");
  if (doc.contains("delta_r")) cfg.delta_r = get_number(doc, "delta_r");
  if (doc.contains("delta_a")) cfg.delta_a = get_number(doc, "delta_a");
  if (doc.contains("n_cutoff")) cfg.n_cutoff = get_int(doc, "n_cutoff");
  if (doc.contains("fw_threshold")) cfg.fw_threshold = get_number(doc, "fw_threshold");
  if (doc.contains("fw_max_iters")) cfg.fw_max_iters = get_int(doc, "fw_max_iters");
  if (doc.contains("perturbation")) cfg.perturbation = get_number(doc, "perturbation");
  if (doc.contains("theorem_epsilon")) cfg.theorem_epsilon = get_number(doc, "theorem_epsilon");
  cfg.validate();
  return cfg;
}

json config_to_json(const ProtocolConfig& cfg) {
  json doc = {{"num_states", cfg.num_states}, {"alpha", cfg.alpha},         {"L_km", cfg.distance_km},
              {"xi", cfg.xi},                 {"beta", cfg.beta},           {"delta_r", cfg.delta_r},
              {"delta_a", cfg.delta_a},       {"n_cutoff", cfg.n_cutoff},   {"fw_threshold", cfg.fw_threshold},
              {"fw_max_iters", cfg.fw_max_iters}, {"perturbation", cfg.perturbation}};
  if (!cfg.probs.empty()) doc["probs"] = cfg.probs;
  if (cfg.eta_override) doc["eta"] = *cfg.eta_override;
  if (cfg.theorem_epsilon) doc["theorem_epsilon"] = *cfg.theorem_epsilon;
  return doc;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("parse error in '") + path + "': " + e.what());
  }
}

void set_axis_value(ProtocolConfig& cfg, const std::string& axis, double value) {
  if (axis == "L" || axis == "L_km") cfg.distance_km = value;
  else if (axis == "alpha") cfg.alpha = value;
  else if (axis == "delta_r") cfg.delta_r = value;
  else if (axis == "xi") cfg.xi = value;
  else if (axis == "beta") cfg.beta = value;
  else throw ConfigError("axes", "unsupported sweep axis '" + axis + "'");
}

std::vector<double> axis_range(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) throw ConfigError("axes", "range needs step > 0 and stop >= start");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 100000) throw ConfigError("axes", "range has too many points");
  std::vector<double> out;
  for (long k = 0; k < count; ++k) out.push_back(start + static_cast<double>(k) * step);
  return out;
}

SweepSpec parse_sweep_spec(const json& doc) {
  require_object(doc, "sweep");
  static const std::set<std::string> known = {"base", "axes", "workers", "output", "summary"};
  for (const auto& item : doc.items())
    if (!known.count(item.key())) throw ConfigError(item.key(), "unknown sweep key");
  SweepSpec spec;
  spec.base = parse_config(doc.value("base", json::object()));
  if (!doc.contains("axes") || !doc.at("axes").is_array() || doc.at("axes").empty())
    throw ConfigError("axes", "sweep needs a nonempty axes list");
  std::set<std::string> seen;
  for (const auto& a : doc.at("axes")) {
    require_object(a, "axes");
    SweepAxis axis;
    if (!a.contains("name") || !a.at("name").is_string()) throw ConfigError("axes", "every axis needs a name");
    axis.name = a.at("name").get<std::string>();
    ProtocolConfig probe = spec.base;
    set_axis_value(probe, axis.name, 0.0);
    if (!seen.insert(axis.name == "L_km" ? "L" : axis.name).second)
      throw ConfigError("axes", "axis '" + axis.name + "' listed twice");
    if (a.contains("values")) {
      for (const auto& v : a.at("values")) {
        if (!v.is_number()) throw ConfigError("axes", "axis values must be numbers");
        axis.values.push_back(v.get<double>());
      }
    } else if (a.contains("start") && a.contains("stop") && a.contains("step")) {
      axis.values = axis_range(get_number(a, "start"), get_number(a, "stop"), get_number(a, "step"));
    } else if (axis.name == "delta_r") {
      // Default postselection grid for acceptance-probability studies.
      axis.values = axis_range(0.0, 2.15, 0.025);
    } else {
      throw ConfigError("axes", "axis '" + axis.name + "' needs values or start/stop/step");
    }
    if (axis.values.empty()) throw ConfigError("axes", "axis '" + axis.name + "' has no values");
    spec.axes.push_back(std::move(axis));
  }
  if (doc.contains("workers")) spec.workers = get_int(doc, "workers");
  if (doc.contains("output")) spec.output = doc.at("output").get<std::string>();
  if (doc.contains("summary")) {
    const json& s = doc.at("summary");
    require_object(s, "summary");
    if (!s.contains("argmax_over")) throw ConfigError("summary", "needs argmax_over");
    const std::string over = s.at("argmax_over").get<std::string>();
    const bool present = std::any_of(spec.axes.begin(), spec.axes.end(), [&](const SweepAxis& a) { return a.name == over; });
    if (!present) throw ConfigError("summary", "argmax_over must name a sweep axis");
    spec.argmax_over = over;
  }
  return spec;
}

std::vector<ProtocolConfig> expand_grid(const SweepSpec& spec) {
  std::vector<ProtocolConfig> out{spec.base};
  for (const auto& axis : spec.axes) {
    std::vector<ProtocolConfig> next;
    for (const auto& cfg : out)
      for (double v : axis.values) {
        ProtocolConfig c = cfg;
        set_axis_value(c, axis.name, v);
        next.push_back(std::move(c));
      }
    out = std::move(next);
  }
  return out;
}

std::string PointResult::status() const {
  if (!ok) return "error:" + error.substr(0, error.find(':'));
  std::string s = to_string(result.status);
  if (result.nonpositive) s += ";nonpositive";
  return s;
}

std::vector<PointResult> run_points(const std::vector<ProtocolConfig>& configs, int workers,
                                    const EngineOptions& options) {
  std::vector<PointResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < configs.size(); i = next.fetch_add(1)) {
      PointResult& r = results[i];
      r.cfg = configs[i];
      try {
        r.result = compute_key_rate(configs[i], options);
        r.ok = true;
      } catch (const StageError& e) {
        r.error = e.what();
      } catch (const ConfigError& e) {
        r.error = std::string("config: ") + e.what();
      } catch (const std::exception& e) {
        r.error = std::string("unknown: ") + e.what();
      }
    }
  };
  const int n = std::min<int>(resolve_workers(workers), static_cast<int>(std::max<std::size_t>(configs.size(), 1)));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

const char* const kCsvHeader =
    "num_states,L_km,eta,alpha,xi,beta,delta_r,delta_a,n_cutoff,step1,step2,zeta_eps,eps_prime,p_pass,"
    "delta_EC,rate,iterations,status";

std::string csv_row(const PointResult& p) {
  const ProtocolConfig& c = p.cfg;
  const double nan = std::nan("");
  const KeyRateResult& r = p.result;
  auto f = [&](double v) { return format_number(p.ok ? v : nan); };
  std::ostringstream row;
  row << c.num_states << ',' << format_number(c.distance_km) << ',' << format_number(c.eta()) << ','
      << format_number(c.alpha) << ',' << format_number(c.xi) << ',' << format_number(c.beta) << ','
      << format_number(c.delta_r) << ',' << format_number(c.delta_a) << ',' << c.n_cutoff << ','
      << f(r.step1_value) << ',' << f(r.step2_lower) << ',' << f(r.zeta_eps) << ',' << f(r.epsilon_prime) << ','
      << f(r.p_pass) << ',' << f(r.delta_EC) << ',' << f(r.rate) << ',' << (p.ok ? r.iterations : 0) << ','
      << p.status();
  return row.str();
}

void write_csv(std::ostream& out, const std::vector<PointResult>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << csv_row(r) << '\n';
}

std::vector<PointResult> argmax_summary(const SweepSpec& spec, const std::vector<PointResult>& rows) {
  if (!spec.argmax_over) return {};
  const auto grid = expand_grid(spec);
  // Group key: indices along every axis except the argmax axis.
  std::vector<std::size_t> strides(spec.axes.size(), 1);
  for (int a = static_cast<int>(spec.axes.size()) - 2; a >= 0; --a)
    strides[a] = strides[a + 1] * spec.axes[a + 1].values.size();
  std::map<std::vector<std::size_t>, std::size_t> best;
  std::vector<std::vector<std::size_t>> order;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::size_t> key;
    for (std::size_t a = 0; a < spec.axes.size(); ++a)
      if (spec.axes[a].name != *spec.argmax_over) key.push_back((i / strides[a]) % spec.axes[a].values.size());
    auto it = best.find(key);
    const bool usable = rows[i].ok && std::isfinite(rows[i].result.rate);
    if (it == best.end()) {
      best.emplace(key, i);
      order.push_back(key);
    } else if (usable) {
      const PointResult& cur = rows[it->second];
      if (!(cur.ok && std::isfinite(cur.result.rate)) || rows[i].result.rate > cur.result.rate) it->second = i;
    }
  }
  std::vector<PointResult> out;
  for (const auto& key : order) out.push_back(rows[best.at(key)]);
  return out;
}

ValidateSpec parse_validate_spec(const json& doc) {
  require_object(doc, "validate");
  static const std::set<std::string> known = {"base", "L_km", "alpha", "tolerance", "workers", "output"};
  for (const auto& item : doc.items())
    if (!known.count(item.key())) throw ConfigError(item.key(), "unknown validate key");
  ValidateSpec spec;
  spec.base = parse_config(doc.value("base", json::object()));
  if (!doc.contains("L_km") || !doc.at("L_km").is_array() || doc.at("L_km").empty())
    throw ConfigError("L_km", "validate needs a nonempty list of distances");
  for (const auto& v : doc.at("L_km")) {
    if (!v.is_number()) throw ConfigError("L_km", "distances must be numbers");
    spec.distances_km.push_back(v.get<double>());
  }
  if (doc.contains("alpha")) {
    const json& a = doc.at("alpha");
    if (a.is_number()) spec.alpha = a.get<double>();
    else if (!(a.is_string() && a.get<std::string>() == "optimal"))
      throw ConfigError("alpha", "must be a number or \"optimal\"");
  }
  if (doc.contains("tolerance")) spec.tolerance = get_number(doc, "tolerance");
  if (!(spec.tolerance > 0.0)) throw ConfigError("tolerance", "must be positive");
  if (doc.contains("workers")) spec.workers = get_int(doc, "workers");
  if (doc.contains("output")) spec.output = doc.at("output").get<std::string>();
  return spec;
}

std::vector<ValidateRow> run_validate(const ValidateSpec& spec, const EngineOptions& options) {
  if (spec.distances_km.empty()) throw ConfigError("L_km", "validate needs a nonempty list of distances");
  std::vector<ValidateRow> rows;
  std::vector<ProtocolConfig> configs;
  for (double L : spec.distances_km) {
    ProtocolConfig cfg = spec.base;
    cfg.distance_km = L;
    cfg.xi = 1e-5;  // loss-only channel, kept slightly noisy for the solver
    cfg.validate();
    ValidateRow row;
    row.distance_km = L;
    if (spec.alpha) {
      cfg.alpha = *spec.alpha;
      row.oracle_rate = lossonly_key_rate(cfg).rate;
    } else {
      const AlphaOptimum opt = optimal_alpha(cfg);
      cfg.alpha = opt.alpha;
      row.oracle_rate = opt.result.rate;
    }
    row.alpha = cfg.alpha;
    rows.push_back(row);
    configs.push_back(cfg);
  }
  const auto results = run_points(configs, spec.workers, options);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ValidateRow& row = rows[i];
    const PointResult& p = results[i];
    row.status = p.status();
    if (!p.ok) {
      row.step1 = row.step2 = row.rate = row.rel_diff = std::nan("");
      row.pass = false;
      continue;
    }
    row.step1 = p.result.step1_value;
    row.step2 = p.result.step2_lower;
    row.rate = p.result.rate;
    row.rel_diff = std::abs(row.rate - row.oracle_rate) / std::abs(row.oracle_rate);
    row.pass = p.result.status != RunStatus::no_certificate && row.rel_diff < spec.tolerance &&
               row.step2 <= row.step1;
  }
  return rows;
}

const char* const kValidateHeader = "L_km,alpha,oracle_rate,step1,step2,rate,rel_diff,pass,status";

void write_validate_csv(std::ostream& out, const std::vector<ValidateRow>& rows) {
  out << kValidateHeader << '\n';
  for (const auto& r : rows) {
    out << format_number(r.distance_km) << ',' << format_number(r.alpha) << ',' << format_number(r.oracle_rate)
        << ',' << format_number(r.step1) << ',' << format_number(r.step2) << ',' << format_number(r.rate) << ','
        << format_number(r.rel_diff) << ',' << (r.pass ? "pass" : "fail") << ',' << r.status << '\n';
  }
}

}  // namespace cvqkd
