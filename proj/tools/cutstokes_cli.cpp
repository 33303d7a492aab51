// Command-line driver: single runs, parameter studies and the fast verification suite.
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cutstokes/cutstokes.hpp"

namespace fs = std::filesystem;
using namespace cutstokes;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> set;  // section.key=value
  std::map<std::string, std::string> flags;
  bool force = false;
  bool quiet = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig load_config(const CommonOptions& o) {
  std::map<std::string, std::string> overrides;
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "expected section.key=value");
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  // Dedicated flags win over --set.
  for (const auto& [k, v] : o.flags) overrides[k] = v;
  return parse_config(o.config_file.empty() ? std::string() : read_file(o.config_file), overrides);
}

/// Fresh output directory: <parent>/<name>-<timestamp>, or <parent> itself with --force.
fs::path output_directory(const RunConfig& c, const std::string& name, bool force) {
  const fs::path parent(c.output_dir);
  if (force) {
    fs::create_directories(parent);
    return parent;
  }
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << name << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
  fs::path dir = parent / stamp.str();
  for (int i = 1; fs::exists(dir); ++i) dir = parent / (stamp.str() + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config_file, "INI configuration file");
  app->add_option("--set", o.set, "override any key, e.g. --set physics.nu=1e-3 (repeatable)");
  app->add_flag("--force", o.force, "write into the output directory itself, overwriting files");
  app->add_flag("-q,--quiet", o.quiet, "suppress progress output");
  struct Flag {
    const char* flag;
    const char* key;
  };
  static const Flag table[] = {
      {"--k", "discretization.k"},
      {"--mesh-size", "discretization.h"},
      {"--dt", "discretization.dt"},
      {"--final-time", "discretization.final_time"},
      {"--bdf", "discretization.bdf_order"},
      {"--subdivision", "discretization.subdivision"},
      {"--subdivision-auto", "discretization.subdivision_auto"},
      {"--nu", "physics.nu"},
      {"--gamma-s", "stabilization.gamma_s"},
      {"--sigma", "stabilization.sigma"},
      {"--c-delta", "stabilization.c_delta"},
      {"--strip-adjacency", "stabilization.strip_adjacency"},
      {"--output", "output.directory"},
      {"--reproducible", "output.reproducible"},
      {"--snapshot-every", "output.snapshot_every"},
  };
  for (const auto& f : table) {
    const std::string key = f.key;
    std::string help;
    for (const auto& e : config_entries())
      if (e.name == key) help = e.help + " [" + key + "]";
    app->add_option_function<std::string>(
        f.flag, [&o, key](const std::string& v) { o.flags[key] = v; }, help);
  }
}

std::string num(double v) { return cutstokes::detail::format_double(v); }

int cmd_run(const CommonOptions& o) {
  const RunConfig cfg = load_config(o);
  const fs::path dir = output_directory(cfg, "run", o.force);
  {
    std::ofstream ini(dir / "config.ini");
    ini << serialize_config(cfg);
  }
  StepConfig sc = cfg.step_config();
  sc.snapshot_dir = (dir / "vtk").string();
  if (!o.quiet) sc.log = &std::cerr;
  std::ofstream csv(dir / "errors.csv");
  csv << "step,t,err_l2_u,err_h1_u,err_l2_p,dof_count\n";
  const auto result = run(sc, cfg.manufactured_case(), [&](const StepState& s, const StepErrors& e) {
    csv << s.n << ',' << num(s.t) << ',' << num(e.velocity_l2) << ',' << num(e.velocity_h1) << ','
        << num(e.pressure_l2) << ',' << s.layout.velocity->num_dofs() + s.layout.pressure->num_dofs() + 1 << '\n';
  });
  csv << "total," << num(cfg.final_time) << ',' << num(result.errors.velocity_l2l2) << ','
      << num(result.errors.velocity_l2h1) << ',' << num(result.errors.pressure_l2l2) << ',' << result.max_dofs << '\n';
  std::ofstream summary(dir / "summary.csv");
  summary << "h,dt,nu,gamma_s,k,s,bdf_order,err_l2l2_u,err_l2h1_u,err_l2l2_p,wall_time_s,dof_count\n"
          << num(cfg.h) << ',' << num(cfg.dt) << ',' << num(cfg.nu) << ',' << num(cfg.gamma_s) << ',' << cfg.k << ','
          << sc.subdivision << ',' << cfg.bdf_order << ',' << num(result.errors.velocity_l2l2) << ','
          << num(result.errors.velocity_l2h1) << ',' << num(result.errors.pressure_l2l2) << ','
          << (cfg.reproducible ? std::string("NA") : num(result.wall_time_s)) << ',' << result.max_dofs << '\n';
  std::cout << "l2(L2) velocity " << result.errors.velocity_l2l2 << ", l2(H1) velocity " << result.errors.velocity_l2h1
            << ", l2(L2) pressure " << result.errors.pressure_l2l2 << "\nwritten to " << dir.string() << '\n';
  return kExitOk;
}

struct StudyCli {
  int lt_min = 0, lt_max = -1, lx_min = 0, lx_max = -1;
  int jobs = 0;
  std::vector<double> robustness_h;
  std::vector<int> subdivision_k;
  double subdivision_dt = 0.0;
};

int cmd_study(const CommonOptions& o, const std::string& name, const StudyCli& s) {
  CommonOptions oo = o;
  oo.flags["output.study"] = name;
  const RunConfig cfg = load_config(oo);
  const auto kind = parse_study_kind(cfg.study);
  StudyOptions opt;
  opt.base = cfg.step_config();
  opt.lt_min = s.lt_min;
  opt.lt_max = s.lt_max;
  opt.lx_min = s.lx_min;
  opt.lx_max = s.lx_max;
  if (!s.robustness_h.empty()) opt.robustness_h = s.robustness_h;
  if (!s.subdivision_k.empty()) opt.subdivision_k = s.subdivision_k;
  if (s.subdivision_dt > 0.0) opt.subdivision_dt = s.subdivision_dt;
  opt.subdivision_s0 = cfg.subdivision_s0;
  opt.h0 = cfg.subdivision_h0;
  opt.robustness_dt = cfg.dt;
  opt.jobs = s.jobs > 0 ? s.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  opt.reproducible = cfg.reproducible;
  if (!o.quiet) opt.progress = &std::cerr;
  const fs::path dir = output_directory(cfg, "study-" + cfg.study, o.force);
  {
    std::ofstream ini(dir / "config.ini");
    ini << serialize_config(cfg);
  }
  const auto table = run_study(kind, opt);
  std::ofstream csv(dir / (cfg.study + ".csv"));
  write_study_csv(csv, table, cfg.reproducible);
  int failed = 0;
  for (const auto& r : table.rows) failed += !r.ok;
  std::cout << table.rows.size() << " cells, " << failed << " failed\nwritten to " << (dir / (cfg.study + ".csv")).string()
            << '\n';
  return failed == 0 ? kExitOk : kExitRunFailure;
}

int cmd_verify(bool quiet) {
  const auto start = std::chrono::steady_clock::now();
  const auto results = verify::run_all(&std::cout);
  int failed = 0;
  for (const auto& r : results) failed += !r.passed;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!quiet) std::cout << results.size() - failed << '/' << results.size() << " checks passed in " << secs << " s\n";
  return failed == 0 ? kExitOk : kExitRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cutstokes: unfitted Taylor-Hood solver for Stokes flow on moving domains"};
  app.require_subcommand(1);
  std::ostringstream defaults;
  defaults << "Defaults:\n" << serialize_config(RunConfig{});
  app.footer(defaults.str());

  CommonOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "one trajectory of the moving-disk benchmark; writes errors.csv");
  add_common(run_cmd, run_opts);

  CommonOptions study_opts;
  StudyCli study_cli;
  std::string study_name;
  auto* study_cmd = app.add_subcommand("study", "parameter study: robustness, bdf1, bdf2 or subdivision");
  study_cmd->add_option("name", study_name, "study to run")
      ->required()
      ->check(CLI::IsMember({"robustness", "bdf1", "bdf2", "subdivision"}));
  add_common(study_cmd, study_opts);
  study_cmd->add_option("--lt-min", study_cli.lt_min, "first temporal level");
  study_cmd->add_option("--lt-max", study_cli.lt_max, "last temporal level (default 8 for bdf1, 7 for bdf2)");
  study_cmd->add_option("--lx-min", study_cli.lx_min, "first spatial level");
  study_cmd->add_option("--lx-max", study_cli.lx_max, "last spatial level (default 4 bdf1, 5 bdf2, 3 subdivision)");
  study_cmd->add_option("--jobs", study_cli.jobs, "worker threads (default: hardware concurrency)");
  study_cmd->add_option("--robustness-h", study_cli.robustness_h, "mesh sizes of the robustness grid (default 0.1)");
  study_cmd->add_option("--subdivision-k", study_cli.subdivision_k, "velocity degrees of the subdivision study");
  study_cmd->add_option("--subdivision-dt", study_cli.subdivision_dt, "time step of the subdivision study");

  bool verify_quiet = false;
  auto* verify_cmd = app.add_subcommand("verify", "fast property suite; exit 0 when every check passes");
  verify_cmd->add_flag("-q,--quiet", verify_quiet, "only print per-check lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(run_opts);
    if (*study_cmd) return cmd_study(study_opts, study_name, study_cli);
    if (*verify_cmd) return cmd_verify(verify_quiet);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRunFailure;
  }
  return kExitOk;
}
