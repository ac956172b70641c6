#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rpebo/errors.hpp"
#include "rpebo/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRangeAbort = 3;

std::string default_out_dir() {
  const char* env = std::getenv("RANGE_PEBO_OUT");
  return env && *env ? env : ".";
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

void print_config_errors(const rpebo::ConfigError& e) {
  for (const auto& m : e.messages()) {
    std::cerr << "error: " << m << "\n";
  }
}

std::string gnuplot_script(const rpebo::RunResult& res, const std::string& csv_name) {
  std::ostringstream gp;
  gp << "set datafile separator ','\n";
  gp << "set key autotitle columnhead\n";
  gp << "set xlabel 't [s]'\n";
  gp << "set logscale y\n";
  gp << "plot ";
  bool first = true;
  for (std::size_t c = 0; c < res.columns.size(); ++c) {
    if (res.columns[c].rfind("err_", 0) == 0) {
      if (!first) gp << ", ";
      gp << "'" << csv_name << "' using 1:" << (c + 1) << " with lines";
      first = false;
    }
  }
  gp << "\n";
  return gp.str();
}

struct CompareSpec {
  std::string label;
  rpebo::ObserverKind kind;
  double kp_mix_override = -1.0;  // < 0 keeps the config value
};

bool parse_compare_observer(const std::string& name, CompareSpec& out) {
  if (name == "gradient") {
    out = {name, rpebo::ObserverKind::kGradient, -1.0};
  } else if (name == "pebo") {
    out = {name, rpebo::ObserverKind::kPebo, -1.0};
  } else if (name == "pebo_mixed") {
    out = {name, rpebo::ObserverKind::kPebo, 1.0};
  } else if (name == "pebo_plain") {
    out = {name, rpebo::ObserverKind::kPebo, 0.0};
  } else if (name == "pv_drem") {
    out = {name, rpebo::ObserverKind::kPvDrem, -1.0};
  } else if (name == "navigation") {
    out = {name, rpebo::ObserverKind::kNavigation, -1.0};
  } else {
    return false;
  }
  return true;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int cmd_run(const std::string& config_path, std::uint64_t seed, bool seed_given,
            const std::string& out_dir, bool noise_free, bool gnuplot) {
  rpebo::ScenarioConfig cfg;
  try {
    cfg = rpebo::load_scenario_file(config_path);
  } catch (const rpebo::ConfigError& e) {
    print_config_errors(e);
    return kExitConfig;
  }
  const std::uint64_t use_seed = seed_given ? seed : cfg.seeds.front();

  rpebo::RunResult res = rpebo::run_scenario(cfg, use_seed, noise_free);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "trace.csv", res.csv());
  write_file(dir / "summary.json", res.summary.to_json());
  write_file(dir / "excitation.json", res.excitation.to_json());
  if (gnuplot) {
    write_file(dir / "plot.gp", gnuplot_script(res, "trace.csv"));
  }
  std::cout << res.summary.to_json() << "\n";
  if (res.summary.aborted) {
    std::cerr << "error: scenario aborted at t=" << res.summary.abort_time
              << " s (feature " << res.summary.abort_feature
              << " inside minimum range)\n";
    return kExitRangeAbort;
  }
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& observers,
                std::uint64_t seed, bool seed_given, const std::string& out_dir,
                bool noise_free) {
  rpebo::ScenarioConfig base;
  try {
    base = rpebo::load_scenario_file(config_path);
  } catch (const rpebo::ConfigError& e) {
    print_config_errors(e);
    return kExitConfig;
  }
  const std::uint64_t use_seed = seed_given ? seed : base.seeds.front();

  std::vector<CompareSpec> specs;
  for (const auto& name : split(observers, ',')) {
    CompareSpec spec;
    if (name.empty() || !parse_compare_observer(name, spec)) {
      std::cerr << "error: unknown observer '" << name
                << "' (expected gradient|pebo|pebo_mixed|pebo_plain|pv_drem|navigation)\n";
      return kExitConfig;
    }
    specs.push_back(spec);
  }
  if (specs.empty()) {
    std::cerr << "error: --observers list is empty\n";
    return kExitConfig;
  }

  // Validate every requested observer against the scenario before running.
  std::vector<rpebo::ScenarioConfig> cfgs;
  for (const auto& spec : specs) {
    rpebo::ScenarioConfig c = base;
    c.observer = spec.kind;
    if (spec.kind != base.observer) {
      // Keep only the gains the target observer accepts.
      std::map<std::string, double> kept;
      for (const auto& [k, v] : c.gains) {
        if (rpebo::gain_allowed(spec.kind, k)) kept[k] = v;
      }
      c.gains = kept;
      if (spec.kind != rpebo::ObserverKind::kPvDrem &&
          spec.kind != rpebo::ObserverKind::kNavigation) {
        c.theta0.clear();
      }
    }
    if (spec.kp_mix_override >= 0.0) {
      c.gains["kp_mix"] = spec.kp_mix_override;
    }
    const auto errs = rpebo::validate_scenario(c);
    if (!errs.empty()) {
      for (const auto& m : errs) {
        std::cerr << "error (" << spec.label << "): " << m << "\n";
      }
      return kExitConfig;
    }
    cfgs.push_back(std::move(c));
  }

  // One shared measurement stream: identical seed and noise settings give
  // bit-identical sensor draws for every observer.
  std::vector<rpebo::RunResult> results;
  for (const auto& c : cfgs) {
    results.push_back(rpebo::run_scenario(c, use_seed, noise_free));
  }

  // Merge error columns on the common time stamps.
  const auto t = results.front().series("t");
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string err_col =
        specs[i].kind == rpebo::ObserverKind::kNavigation ? "err_x" : "err_z";
    cols.emplace_back(err_col + "_" + specs[i].label, results[i].series(err_col));
  }

  std::ostringstream csv;
  csv << "t";
  for (const auto& [name, _] : cols) csv << ',' << name;
  csv << '\n';
  std::size_t n_rows = t.size();
  for (const auto& [_, v] : cols) n_rows = std::min(n_rows, v.size());
  for (std::size_t k = 0; k < n_rows; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", t[k]);
    csv << buf;
    for (const auto& [_, v] : cols) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[k]);
      csv << ',' << buf;
    }
    csv << '\n';
  }

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_file(dir / "compare.csv", csv.str());

  json summary;
  bool any_abort = false;
  std::cout << "final error (mean over last second):\n";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = results[i].summary;
    const std::string err_col =
        specs[i].kind == rpebo::ObserverKind::kNavigation ? "err_x" : "err_z";
    const double fin = s.errors.count(err_col) ? s.errors.at(err_col).final_mean : -1.0;
    summary[specs[i].label] = json::parse(s.to_json());
    std::cout << "  " << specs[i].label << ": " << fin << "\n";
    any_abort = any_abort || s.aborted;
  }
  write_file(dir / "compare_summary.json", summary.dump(2));
  return any_abort ? kExitRangeAbort : kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& param, int n_seeds,
              int jobs, const std::string& out_dir, bool noise_free) {
  rpebo::ScenarioConfig base;
  try {
    base = rpebo::load_scenario_file(config_path);
  } catch (const rpebo::ConfigError& e) {
    print_config_errors(e);
    return kExitConfig;
  }
  if (n_seeds <= 0) {
    std::cerr << "error: --seeds must be positive\n";
    return kExitConfig;
  }

  const auto eq = param.find('=');
  if (eq == std::string::npos) {
    std::cerr << "error: --param expects key=v1:v2:n\n";
    return kExitConfig;
  }
  const std::string key = param.substr(0, eq);
  const auto parts = split(param.substr(eq + 1), ':');
  if (parts.size() != 3) {
    std::cerr << "error: --param expects key=v1:v2:n\n";
    return kExitConfig;
  }
  double v1 = 0.0, v2 = 0.0;
  int n = 0;
  try {
    v1 = std::stod(parts[0]);
    v2 = std::stod(parts[1]);
    n = std::stoi(parts[2]);
  } catch (...) {
    std::cerr << "error: --param expects numeric v1:v2:n\n";
    return kExitConfig;
  }
  if (n <= 0) {
    std::cerr << "error: sweep needs at least one grid point\n";
    return kExitConfig;
  }
  if (!base.gains.count(key)) {
    std::cerr << "error: sweep key '" << key << "' is not in the config gains map\n";
    return kExitConfig;
  }

  struct Job {
    double value;
    std::uint64_t seed;
    rpebo::RunSummary summary;
  };
  std::vector<Job> jobs_list;
  for (int i = 0; i < n; ++i) {
    const double v = n == 1 ? v1 : v1 + (v2 - v1) * i / (n - 1);
    for (int s = 0; s < n_seeds; ++s) {
      jobs_list.push_back({v, base.seeds.front() + static_cast<std::uint64_t>(s), {}});
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs_list.size()) break;
      rpebo::ScenarioConfig c = base;
      c.gains[key] = jobs_list[idx].value;
      jobs_list[idx].summary = rpebo::run_scenario(c, jobs_list[idx].seed, noise_free).summary;
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(jobs_list.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::ostringstream csv;
  csv << "param,value,seed";
  std::vector<std::string> metric_names;
  for (const auto& [k, _] : jobs_list.front().summary.errors) metric_names.push_back(k);
  for (const auto& m : metric_names) {
    csv << ',' << m << "_final," << m << "_time_to_tol";
  }
  csv << ",aborted\n";
  for (const auto& jb : jobs_list) {
    csv << key << ',' << jb.value << ',' << jb.seed;
    for (const auto& m : metric_names) {
      const auto& em = jb.summary.errors.at(m);
      csv << ',' << em.final_mean << ','
          << (em.time_to_tolerance ? std::to_string(*em.time_to_tolerance) : "nan");
    }
    csv << ',' << (jb.summary.aborted ? 1 : 0) << '\n';
  }

  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "sweep.csv", csv.str());
  std::cout << "sweep: " << jobs_list.size() << " runs written to " << out_dir
            << "/sweep.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bearing-only range and navigation observer simulation harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = default_out_dir();
  std::uint64_t seed = 0;
  bool noise_free = false;
  bool gnuplot = false;

  auto* run = app.add_subcommand("run", "Run one scenario and write traces");
  run->add_option("-c,--config", config_path, "Scenario config JSON")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Master RNG seed");
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_flag("--noise-free", noise_free, "Zero all sensor noise");
  run->add_flag("--gnuplot", gnuplot, "Also write a gnuplot script");

  std::string observers;
  auto* cmp = app.add_subcommand("compare", "Run several observers on one stream");
  cmp->add_option("-c,--config", config_path, "Scenario config JSON")->required();
  cmp->add_option("--observers", observers, "Comma-separated observer list")->required();
  auto* cmp_seed_opt = cmp->add_option("--seed", seed, "Master RNG seed");
  cmp->add_option("--out-dir", out_dir, "Output directory");
  cmp->add_flag("--noise-free", noise_free, "Zero all sensor noise");

  std::string param;
  int n_seeds = 1;
  int jobs = 1;
  auto* swp = app.add_subcommand("sweep", "Grid-sweep one gain");
  swp->add_option("-c,--config", config_path, "Scenario config JSON")->required();
  swp->add_option("--param", param, "key=v1:v2:n linear grid")->required();
  swp->add_option("--seeds", n_seeds, "Number of seeds per grid point");
  swp->add_option("--jobs", jobs, "Parallel runs");
  swp->add_option("--out-dir", out_dir, "Output directory");
  swp->add_flag("--noise-free", noise_free, "Zero all sensor noise");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, seed, seed_opt->count() > 0, out_dir, noise_free, gnuplot);
    }
    if (cmp->parsed()) {
      return cmd_compare(config_path, observers, seed, cmp_seed_opt->count() > 0, out_dir,
                         noise_free);
    }
    if (swp->parsed()) {
      return cmd_sweep(config_path, param, n_seeds, jobs, out_dir, noise_free);
    }
  } catch (const rpebo::ConfigError& e) {
    print_config_errors(e);
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
