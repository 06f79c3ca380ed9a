// kmplab command-line runner: run <config>, verify <suite>, export <artifact>.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "kmplab/experiments.hpp"
#include "kmplab/persistence.hpp"
#include "kmplab/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace kmplab;

namespace {

constexpr int kSchemaVersion = 1;

enum Exit { kOk = 0, kFailed = 1, kSchema = 2, kBudget = 3, kNumeric = 4 };

// ---- config parsing ----

void assign(const json& j, const std::string& key, int& out) {
  if (!j.is_number_integer()) throw SchemaError(key + ": expected an integer");
  out = j.get<int>();
}
void assign(const json& j, const std::string& key, std::uint64_t& out) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw SchemaError(key + ": expected a non-negative integer");
  out = j.get<std::uint64_t>();
}
void assign(const json& j, const std::string& key, double& out) {
  if (!j.is_number()) throw SchemaError(key + ": expected a number");
  out = j.get<double>();
}
void assign(const json& j, const std::string& key, bool& out) {
  if (!j.is_boolean()) throw SchemaError(key + ": expected true or false");
  out = j.get<bool>();
}
void assign(const json& j, const std::string& key, std::string& out) {
  if (!j.is_string()) throw SchemaError(key + ": expected a string");
  out = j.get<std::string>();
}
template <class T>
void assign(const json& j, const std::string& key, std::vector<T>& out) {
  if (!j.is_array() || j.empty()) throw SchemaError(key + ": expected a non-empty array");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    T v{};
    assign(j[i], key + "[" + std::to_string(i) + "]", v);
    out.push_back(v);
  }
}

struct Reader {
  const json& src;
  std::set<std::string> seen;
  template <class T>
  void operator()(const char* key, T& field) {
    auto it = src.find(key);
    if (it == src.end()) return;
    seen.insert(key);
    assign(*it, std::string("params.") + key, field);
  }
  void finish() const {
    for (auto it = src.begin(); it != src.end(); ++it)
      if (!seen.count(it.key())) throw SchemaError("params: unknown key '" + it.key() + "'");
  }
};

struct Writer {
  json& dst;
  template <class T>
  void operator()(const char* key, T& field) {
    dst[key] = field;
  }
};

using Runner = std::function<ExperimentOutput(const json& params, std::uint64_t seed, json& materialized)>;

template <class P>
Runner make_runner(ExperimentOutput (*fn)(const P&, std::uint64_t)) {
  return [fn](const json& params, std::uint64_t seed, json& materialized) {
    P p;
    Reader r{params, {}};
    p.visit(r);
    r.finish();
    materialized = json::object();
    Writer w{materialized};
    p.visit(w);
    return fn(p, seed);
  };
}

const std::map<std::string, Runner>& experiments() {
  static const std::map<std::string, Runner> table{
      {"equilibrium-sim", make_runner(&equilibrium_sim)},
      {"tilted-sim", make_runner(&tilted_sim)},
      {"hydro-check", make_runner(&hydro_check)},
      {"entropy-check", make_runner(&entropy_check)},
      {"replacement-sweep", make_runner(&replacement_sweep)},
      {"pathological-1d", make_runner(&pathological_1d)},
      {"pathological-2d", make_runner(&pathological_2d)},
      {"pathological-3d", make_runner(&pathological_3d)},
      {"dissipation-sweep", make_runner(&dissipation_sweep)},
      {"lyapunov-check", make_runner(&lyapunov_check)},
  };
  return table;
}

struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  std::string output_dir;
  json params = json::object();
};

RunConfig parse_config(json j) {
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  // A summary.json carries its config; running it reproduces the run.
  if (j.contains("config") && j.contains("config_hash")) j = j["config"];
  static const std::set<std::string> allowed{"schema_version", "experiment", "seed", "output_dir", "params"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw SchemaError("unknown key '" + it.key() + "'");
  if (!j.contains("schema_version")) throw SchemaError("missing schema_version");
  int version = 0;
  assign(j["schema_version"], "schema_version", version);
  if (version != kSchemaVersion) throw SchemaError("unsupported schema_version " + std::to_string(version));
  if (!j.contains("experiment")) throw SchemaError("missing experiment");
  RunConfig c;
  assign(j["experiment"], "experiment", c.experiment);
  if (!experiments().count(c.experiment)) throw SchemaError("unknown experiment '" + c.experiment + "'");
  if (j.contains("seed")) assign(j["seed"], "seed", c.seed);
  c.output_dir = "runs/" + c.experiment;
  if (j.contains("output_dir")) assign(j["output_dir"], "output_dir", c.output_dir);
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw SchemaError("params must be an object");
    c.params = j["params"];
  }
  return c;
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SchemaError("cannot read " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- CSV ----

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_table_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_field(t.columns[i]);
  os << "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << io::fmt(row[i]);
    os << "\r\n";
  }
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  body(os);
  if (!os) throw std::runtime_error("write failed for " + p.string());
}

// ---- commands ----

int cmd_run(const std::string& path, const std::string& out_override) {
  RunConfig c = parse_config(read_json(path));
  if (!out_override.empty()) c.output_dir = out_override;
  json materialized;
  ExperimentOutput out = experiments().at(c.experiment)(c.params, c.seed, materialized);

  json config{{"schema_version", kSchemaVersion},
              {"experiment", c.experiment},
              {"seed", c.seed},
              {"output_dir", c.output_dir},
              {"params", materialized}};
  const std::string hash = hex(fnv1a(config.dump()));

  fs::path dir(c.output_dir);
  fs::create_directories(dir);
  json files = json::array();
  for (const auto& t : out.tables) {
    std::string name = t.name + ".csv";
    write_file(dir / name, [&](std::ostream& os) { write_table_csv(os, t); });
    files.push_back(name);
  }
  for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
    std::string name = "trajectory_" + std::to_string(i) + ".kmp";
    write_file(dir / name, [&](std::ostream& os) { write_trajectory(os, out.trajectories[i]); });
    files.push_back(name);
  }

  json metrics = json::object();
  for (const auto& m : out.metrics) metrics[m.first] = std::isfinite(m.second) ? json(m.second) : json(nullptr);
  json checks = json::array();
  for (const auto& ch : out.checks) checks.push_back({{"name", ch.name}, {"pass", ch.pass}, {"detail", ch.detail}});
  json summary{{"config", config}, {"config_hash", hash}, {"seed", c.seed},  {"experiment", c.experiment},
               {"pass", out.pass()}, {"metrics", metrics},   {"checks", checks}, {"warnings", out.warnings},
               {"files", files}};
  write_file(dir / "summary.json", [&](std::ostream& os) { os << summary.dump(2) << "\n"; });

  for (const auto& ch : out.checks)
    std::cout << (ch.pass ? "[PASS] " : "[FAIL] ") << ch.name << ": " << ch.detail << "\n";
  for (const auto& w : out.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "wrote " << (dir / "summary.json").string() << " (config " << hash << ")\n";
  return out.pass() ? kOk : kFailed;
}

int cmd_verify(const std::string& suite, const std::string& output) {
  auto ids = suite_ids(suite);
  json report{{"suite", suite}, {"criteria", json::array()}};
  bool all = true;
  for (int id : ids) {
    CriterionResult r;
    try {
      r = run_criterion(id);
    } catch (const std::exception& e) {
      r.id = id;
      for (const auto& c : criteria())
        if (c.id == id) {
          r.title = c.title;
          r.tolerance = c.tolerance;
        }
      r.note = std::string("error: ") + e.what();
    }
    all = all && r.pass;
    json m = json::object();
    for (const auto& kv : r.metrics) m[kv.first] = std::isfinite(kv.second) ? json(kv.second) : json(nullptr);
    report["criteria"].push_back({{"id", r.id},
                                  {"title", r.title},
                                  {"pass", r.pass},
                                  {"tolerance", r.tolerance},
                                  {"metrics", m},
                                  {"note", r.note},
                                  {"seconds", r.seconds}});
    std::cerr << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << " " << r.title << "\n";
  }
  report["pass"] = all;
  if (output.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_file(output, [&](std::ostream& os) { os << report.dump(2) << "\n"; });
  }
  return all ? kOk : kFailed;
}

bool is_container(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  return is && std::memcmp(magic, "KMP1", 4) == 0;
}

void export_summary_csv(std::ostream& os, const json& s) {
  os << "kind,name,value,pass,detail\r\n";
  for (auto it = s["metrics"].begin(); it != s["metrics"].end(); ++it) {
    os << "metric," << csv_field(it.key()) << ',';
    if (it->is_number()) os << io::fmt(it->get<double>());
    os << ",,\r\n";
  }
  for (const auto& c : s["checks"])
    os << "check," << csv_field(c["name"].get<std::string>()) << ",," << (c["pass"].get<bool>() ? "true" : "false")
       << ',' << csv_field(c["detail"].get<std::string>()) << "\r\n";
}

json trajectory_json(const TrajectoryRecord& rec) {
  json snaps = json::array();
  for (const auto& s : rec.snapshots) snaps.push_back(s.values());
  json j{{"d", rec.lattice.d()}, {"N", rec.lattice.N()}, {"T", rec.T},
         {"seed", rec.seed},     {"times", rec.times},   {"snapshots", snaps}};
  if (rec.has_flux) {
    j["events"] = rec.events;
    json f = json::array();
    for (const auto& e : rec.flux) f.push_back({e.t, e.edge, e.p});
    j["flux"] = f;
  }
  return j;
}

int cmd_export(const std::string& artifact, const std::string& format, const std::string& output) {
  fs::path p(artifact);
  if (fs::is_directory(p)) p /= "summary.json";
  if (!fs::exists(p)) throw SchemaError("no artifact at " + p.string());
  std::ostringstream body;
  if (is_container(p)) {
    TrajectoryRecord rec = load_trajectory(p.string());
    if (format == "csv")
      write_trajectory_csv(body, rec);
    else
      body << trajectory_json(rec).dump(2) << "\n";
  } else {
    json s = read_json(p.string());
    if (!s.contains("config_hash") || !s.contains("metrics") || !s.contains("checks"))
      throw SchemaError(p.string() + " is neither a run summary nor a KMP1 container");
    if (format == "csv")
      export_summary_csv(body, s);
    else
      body << s.dump(2) << "\n";
  }
  if (output.empty()) {
    std::cout << body.str();
  } else {
    write_file(output, [&](std::ostream& os) { os << body.str(); });
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kmplab: KMP lattice dynamics, tilted sampling and path-cost experiments"};
  app.require_subcommand(1);
  app.footer("Environment: KMPLAB_THREADS caps the number of replica workers.\n"
             "Exit codes: 0 all checks pass, 1 a check failed, 2 config/schema error, 3 resource budget exceeded,\n"
             "4 numerical failure.");

  std::string config, out_dir;
  auto* run = app.add_subcommand("run", "Run the experiment named in a JSON config and write summary.json plus CSVs");
  run->add_option("config", config, "Config file (or a summary.json to reproduce a run)")->required();
  run->add_option("-o,--output-dir", out_dir, "Override the config's output_dir");

  std::string suite, report;
  auto* verify = app.add_subcommand("verify", "Run an acceptance suite with pinned seeds and print a JSON report");
  verify->add_option("suite", suite, "identities | oracles | trends | full")
      ->required()
      ->check(CLI::IsMember({"identities", "oracles", "trends", "full"}));
  verify->add_option("-o,--output", report, "Write the report to a file instead of stdout");

  std::string artifact, format = "json", exported;
  auto* exp = app.add_subcommand("export", "Convert a run directory, summary.json or KMP1 trajectory to CSV or JSON");
  exp->add_option("artifact", artifact, "Run directory, summary.json or .kmp container")->required();
  exp->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  exp->add_option("-o,--output", exported, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kSchema;
  }

  try {
    if (*run) return cmd_run(config, out_dir);
    if (*verify) return cmd_verify(suite, report);
    if (*exp) return cmd_export(artifact, format, exported);
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kSchema;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kSchema;
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kBudget;
  } catch (const NumericFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}
