#include "tes/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "tes/errors.hpp"

namespace tes {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty())
      out.push_back(item);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string &key, const std::string &s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v))
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw InvalidConfig("config key '" + key + "': '" + s +
                        "' is not a finite number");
  }
}

long to_long(const std::string &key, const std::string &s) {
  const double v = to_double(key, s);
  if (v != std::floor(v))
    throw InvalidConfig("config key '" + key + "': expected an integer");
  return long(v);
}

using Pairs = std::vector<std::pair<double, double>>;

Pairs to_pairs(const std::string &key, const std::string &s) {
  Pairs out;
  for (const auto &item : split(s, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2)
      throw InvalidConfig("config key '" + key + "': expected t:value pairs");
    out.emplace_back(to_double(key, parts[0]), to_double(key, parts[1]));
  }
  return out;
}

std::string from_pairs(const Pairs &p) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i)
      out += ", ";
    out += fmt(p[i].first) + ":" + fmt(p[i].second);
  }
  return out;
}

std::string join(const std::vector<std::string> &v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + v[i];
  return out;
}

std::vector<std::string> lower_list(const std::string &s) {
  auto items = split(s, ',');
  for (auto &i : items)
    std::transform(i.begin(), i.end(), i.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
  return items;
}

struct Key {
  std::string section;
  std::string name;
  std::function<std::string(const ExperimentConfig &)> get;
  std::function<void(ExperimentConfig &, const std::string &)> set;
  std::string path() const { return section + "." + name; }
};

#define TES_DOUBLE_KEY(sec, key, field)                                        \
  Key {                                                                        \
    sec, key, [](const ExperimentConfig &c) { return fmt(c.field); },         \
        [](ExperimentConfig &c, const std::string &v) {                        \
          c.field = to_double(std::string(sec) + "." + key, v);                \
        }                                                                      \
  }
#define TES_INT_KEY(sec, key, field)                                           \
  Key {                                                                        \
    sec, key,                                                                  \
        [](const ExperimentConfig &c) { return std::to_string(c.field); },     \
        [](ExperimentConfig &c, const std::string &v) {                        \
          c.field = int(to_long(std::string(sec) + "." + key, v));             \
        }                                                                      \
  }

const std::vector<Key> &keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k{
        {"experiment", "mode",
         [](const ExperimentConfig &c) {
           return std::string(c.mode == RunMode::TwinSim ? "twin-sim"
                                                         : "replay");
         },
         [](ExperimentConfig &c, const std::string &v) {
           if (v == "twin-sim")
             c.mode = RunMode::TwinSim;
           else if (v == "replay")
             c.mode = RunMode::Replay;
           else
             throw InvalidConfig("experiment.mode must be twin-sim or replay");
         }},
        {"experiment", "dataset_csv",
         [](const ExperimentConfig &c) { return c.dataset_csv; },
         [](ExperimentConfig &c, const std::string &v) { c.dataset_csv = v; }},
        TES_DOUBLE_KEY("experiment", "duration_s", duration),
        {"experiment", "seed",
         [](const ExperimentConfig &c) { return std::to_string(c.seed); },
         [](ExperimentConfig &c, const std::string &v) {
           const long s = to_long("experiment.seed", v);
           if (s < 0)
             throw InvalidConfig("experiment.seed must be non-negative");
           c.seed = std::uint64_t(s);
         }},
        TES_DOUBLE_KEY("experiment", "rate_Sps", rate),
        TES_DOUBLE_KEY("experiment", "dataset_rate_Sps", dataset_rate),
        TES_DOUBLE_KEY("experiment", "dt_predict_s", dt_predict),
        {"experiment", "sensors",
         [](const ExperimentConfig &c) { return join(c.sensors); },
         [](ExperimentConfig &c, const std::string &v) {
           c.sensors = lower_list(v);
         }},
        {"experiment", "withhold",
         [](const ExperimentConfig &c) { return join(c.withheld); },
         [](ExperimentConfig &c, const std::string &v) {
           c.withheld = lower_list(v);
         }},
        TES_DOUBLE_KEY("experiment", "initial_variance_K2", initial_variance),
        TES_DOUBLE_KEY("experiment", "initial_offset_K", initial_offset),
        {"experiment", "missing_measurement",
         [](const ExperimentConfig &c) {
           return std::string(c.missing == MissingMeasurement::Skip ? "skip"
                                                                    : "abort");
         },
         [](ExperimentConfig &c, const std::string &v) {
           if (v == "skip")
             c.missing = MissingMeasurement::Skip;
           else if (v == "abort")
             c.missing = MissingMeasurement::Abort;
           else
             throw InvalidConfig(
                 "experiment.missing_measurement must be skip or abort");
         }},
        TES_DOUBLE_KEY("experiment", "transient_s", transient),

        TES_DOUBLE_KEY("geometry", "length_m", geometry.length),
        TES_DOUBLE_KEY("geometry", "depth_m", geometry.depth),
        TES_DOUBLE_KEY("geometry", "fluid_height_m", geometry.fluid_height),
        TES_DOUBLE_KEY("geometry", "plate_thickness_m",
                       geometry.plate_thickness),
        TES_DOUBLE_KEY("geometry", "cpcm_height_m", geometry.cpcm_height),

        TES_INT_KEY("estimator_grid", "nx", estimator_nx),
        TES_INT_KEY("estimator_grid", "ny", estimator_ny),
        TES_INT_KEY("truth_grid", "nx", truth_nx),
        TES_INT_KEY("truth_grid", "ny", truth_ny),

        TES_DOUBLE_KEY("fluid", "cp_J_per_kgK", fluid.cp),
        TES_DOUBLE_KEY("fluid", "htc_W_per_m2K", fluid.htc),
        TES_DOUBLE_KEY("fluid", "density_kg_per_m3", geometry.fluid.density),
        TES_DOUBLE_KEY("fluid", "conductivity_W_per_mK",
                       geometry.fluid.conductivity),

        TES_DOUBLE_KEY("plate", "density_kg_per_m3", geometry.plate.density),
        TES_DOUBLE_KEY("plate", "cp_J_per_kgK", geometry.plate.specific_heat),
        TES_DOUBLE_KEY("plate", "conductivity_W_per_mK",
                       geometry.plate.conductivity),

        TES_DOUBLE_KEY("cpcm", "density_kg_per_m3", geometry.cpcm.density),
        TES_DOUBLE_KEY("cpcm", "conductivity_W_per_mK",
                       geometry.cpcm.conductivity),
        {"cpcm", "conductivity_table",
         [](const ExperimentConfig &c) {
           return from_pairs(c.cpcm_conductivity.points());
         },
         [](ExperimentConfig &c, const std::string &v) {
           c.cpcm_conductivity =
               ConductivityCurve(to_pairs("cpcm.conductivity_table", v));
         }},
        TES_DOUBLE_KEY("cpcm", "cp_sol_J_per_kgK", pcm.cp_sol),
        TES_DOUBLE_KEY("cpcm", "cp_liq_J_per_kgK", pcm.cp_liq),
        TES_DOUBLE_KEY("cpcm", "h_fus_J_per_kg", pcm.h_fus),
        TES_DOUBLE_KEY("cpcm", "t_pc_K", pcm.t_pc),
        TES_DOUBLE_KEY("cpcm", "delta_t_pc_K", pcm.delta_t_pc),

        TES_DOUBLE_KEY("soc", "t_min_K", t_min),
        TES_DOUBLE_KEY("soc", "t_max_K", t_max),

        TES_DOUBLE_KEY("noise", "thermocouple_variance_K2",
                       thermocouple_variance),
        TES_DOUBLE_KEY("noise", "process_variance_K2", process_variance),

        TES_DOUBLE_KEY("solver", "rel_tol", ode.rel_tol),
        TES_DOUBLE_KEY("solver", "abs_tol_K", ode.abs_tol),
        TES_DOUBLE_KEY("solver", "max_dt_s", ode.max_dt),

        {"profile", "mdot_steps",
         [](const ExperimentConfig &c) {
           return from_pairs(c.profile.mdot_steps);
         },
         [](ExperimentConfig &c, const std::string &v) {
           c.profile.mdot_steps = to_pairs("profile.mdot_steps", v);
         }},
        {"profile", "tin_knots",
         [](const ExperimentConfig &c) {
           return from_pairs(c.profile.tin_knots);
         },
         [](ExperimentConfig &c, const std::string &v) {
           c.profile.tin_knots = to_pairs("profile.tin_knots", v);
         }},
    };
    for (const char *tc : {"tc1", "tc2", "tc3", "tc4"}) {
      const std::string name = tc;
      k.push_back(
          {"sensors", name + "_cell",
           [name](const ExperimentConfig &c) {
             const auto grid = make_grid(c.geometry, c.fluid, c.estimator_nx,
                                         c.estimator_ny);
             for (const auto &s : c.all_sensors())
               if (s.name == name)
                 return std::to_string(grid.layer(s.cell)) + "," +
                        std::to_string(grid.column(s.cell));
             return std::string();
           },
           [name](ExperimentConfig &c, const std::string &v) {
             const auto parts = split(v, ',');
             if (parts.size() != 2)
               throw InvalidConfig("sensors." + name +
                                   "_cell: expected 'layer,column'");
             c.sensor_cells[name] = {
                 int(to_long("sensors." + name + "_cell", parts[0])),
                 int(to_long("sensors." + name + "_cell", parts[1]))};
           }});
    }
    return k;
  }();
  return table;
}

#undef TES_DOUBLE_KEY
#undef TES_INT_KEY

} // namespace

ThermalModel ExperimentConfig::estimator_model() const {
  ThermalModel m{make_grid(geometry, fluid, estimator_nx, estimator_ny), fluid,
                 pcm, cpcm_conductivity};
  m.validate();
  return m;
}

ThermalModel ExperimentConfig::truth_model() const {
  ThermalModel m{make_grid(geometry, fluid, truth_nx, truth_ny), fluid, pcm,
                 cpcm_conductivity};
  m.validate();
  return m;
}

std::vector<Sensor> ExperimentConfig::all_sensors() const {
  const GridSpec grid = make_grid(geometry, fluid, estimator_nx, estimator_ny);
  auto sensors = default_sensors(grid);
  for (auto &s : sensors) {
    auto it = sensor_cells.find(s.name);
    if (it == sensor_cells.end())
      continue;
    const auto [layer, col] = it->second;
    if (layer < 0 || layer >= grid.ny() || col < 0 || col >= grid.nx())
      throw InvalidConfig("sensor '" + s.name + "' placed outside the grid");
    s.cell = grid.index(layer, col);
  }
  return sensors;
}

std::vector<Sensor> ExperimentConfig::active_sensors() const {
  std::vector<Sensor> chosen;
  for (const auto &s : all_sensors())
    if (std::find(sensors.begin(), sensors.end(), s.name) != sensors.end())
      chosen.push_back(s);
  return withhold(chosen, withheld);
}

SampleSchedule ExperimentConfig::schedule() const {
  return SampleSchedule::from_rate(rate, dt_predict);
}

int ExperimentConfig::decimation() const {
  const double ratio = dataset_rate / rate;
  const double rounded = std::round(ratio);
  if (rounded < 1 || std::abs(ratio - rounded) > 1e-9 * rounded)
    throw InvalidConfig("rate " + fmt(rate) +
                        " S/s does not divide the dataset rate " +
                        fmt(dataset_rate) + " S/s");
  return int(rounded);
}

void ExperimentConfig::validate() const {
  for (const auto &s : sensors)
    if (s != "tc1" && s != "tc2" && s != "tc3" && s != "tc4")
      throw InvalidConfig("unknown sensor '" + s +
                          "' (expected tc1, tc2, tc3, tc4)");
  for (const auto &s : withheld)
    if (s != "tc1" && s != "tc2" && s != "tc3" && s != "tc4")
      throw InvalidConfig("cannot withhold unknown sensor '" + s + "'");
  if (!(duration > 0) || !(transient >= 0))
    throw InvalidConfig("duration must be positive, transient non-negative");
  if (!(initial_variance > 0))
    throw InvalidConfig("initial variance must be positive");
  if (!(thermocouple_variance > 0) || !(process_variance >= 0))
    throw InvalidConfig("noise variances must be positive");
  ode.validate();
  const SampleSchedule sched = schedule();
  if (std::abs(1.0 / dataset_rate - dt_predict) > 1e-12)
    throw InvalidConfig("the dataset rate must equal one sample per "
                        "prediction step");
  (void)sched;
  decimation();
  if (mode == RunMode::TwinSim) {
    if (profile.mdot_steps.empty() || profile.tin_knots.empty())
      throw InvalidConfig("twin-sim mode needs profile.mdot_steps and "
                          "profile.tin_knots");
    GridProjection(truth_model().grid, estimator_model().grid);
  } else if (dataset_csv.empty()) {
    throw InvalidConfig("replay mode needs experiment.dataset_csv");
  }
  const ThermalModel est = estimator_model();
  make_soc_params(est.grid, est.pcm, t_min, t_max);
  all_sensors();
}

std::string ExperimentConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> lines;
  for (const auto &k : keys())
    lines.emplace_back(k.path(), k.get(*this));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto &[path, value] : lines)
    out += path + " = " + value + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  const std::string text = canonical();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1)
    throw NumericalError("config hash: SHA-256 failed");
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.geometry.length = 0.15;
  c.geometry.depth = 0.10;
  c.geometry.fluid_height = 0.002;
  c.geometry.plate_thickness = 0.001;
  c.geometry.cpcm_height = 0.010;
  c.geometry.fluid = {998.0, 4186.0, 0.6};
  c.geometry.plate = {2700.0, 900.0, 200.0};
  c.geometry.cpcm = {1000.0, 0.0, 5.0};
  c.fluid = {4186.0, 1500.0};
  c.pcm = {2000.0, 2200.0, 170000.0, 289.5, 8.0};
  c.ode = {1e-6, 1e-6, 1.0};
  c.profile.mdot_steps = {{0, 0.10},    {400, 0.183}, {800, 0.0},
                          {950, 0.15},  {1300, 0.0},  {1450, 0.183}};
  c.profile.tin_knots = {{0, 281},    {100, 281},  {160, 300},
                         {450, 300},  {520, 286},  {700, 286},
                         {760, 303},  {1100, 303}, {1160, 282},
                         {1500, 282}, {1560, 298}, {1800, 298}};
  return c;
}

ExperimentConfig parse_config(std::istream &in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error &e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg = default_config();
  for (const auto &[section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw InvalidConfig("config: key '" + section +
                          "' must live inside a [section]");
    for (const auto &[name, value] : body) {
      const auto &table = keys();
      auto it = std::find_if(table.begin(), table.end(), [&](const Key &k) {
        return k.section == section && k.name == name;
      });
      if (it == table.end())
        throw InvalidConfig("config: unknown key '" + section + "." + name +
                            "'");
      it->set(cfg, trim(value.data()));
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw InvalidConfig("cannot open config '" + path + "'");
  return parse_config(in);
}

void write_config(std::ostream &out, const ExperimentConfig &cfg) {
  std::string section;
  for (const auto &k : keys()) {
    if (k.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << k.section << "]\n";
      section = k.section;
    }
    out << k.name << " = " << k.get(cfg) << '\n';
  }
}

} // namespace tes
