#include "mkv/cli.hpp"

#include "mkv/benchmark.hpp"
#include "mkv/config.hpp"
#include "mkv/diagnostics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace mkv::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void print_error_listing(const std::vector<std::pair<std::string, std::string>>& issues) {
  nlohmann::json out;
  out["errors"] = nlohmann::json::array();
  for (const auto& [field, message] : issues) out["errors"].push_back({{"field", field}, {"message", message}});
  std::cerr << out.dump() << "\n";
}

/// Worker budget: explicit request, capped by MKV_THREADS when set.
int resolve_workers(int requested) {
  int workers = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (const char* env = std::getenv("MKV_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) workers = std::min(workers, cap);
  }
  return workers;
}

/// Prints the validation report; returns false on a hard failure.
bool report_validation(const ValidationReport& report, int verbosity) {
  for (const auto& check : report.checks) {
    if (check.status == CheckStatus::fail) {
      if (check.hard) {
        print_error_listing({{check.name, check.detail}});
        return false;
      }
      std::cerr << "warning: assumption " << check.name << " failed (" << check.detail
                << "); continuing anyway\n";
    } else if (verbosity >= 2) {
      std::cout << "check " << check.name << ": ok (" << check.detail << ")\n";
    }
  }
  return true;
}

bool write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << contents;
  return static_cast<bool>(out);
}

std::optional<BenchmarkCase<double>> case_by_name(const std::string& name, int dim) {
  if (name == "gaussian_1d") return make_gaussian_case<double>();
  if (name == "kou_1d") return make_kou_case<double>();
  if (name == "multidim") return make_multidim_case<double>(dim);
  if (name == "stable_init") return make_stable_case<double>(dim);
  return std::nullopt;
}

void print_report(const ExperimentReport& report, int verbosity) {
  if (verbosity < 1) return;
  for (const auto& row : report.rows) {
    std::printf("%s  n=%-4d m=%-2d max_error=%.6e  (%.1f ms)\n", report.case_id.c_str(), row.n, row.m_iters,
                row.max_error, row.wall_ms);
  }
  std::printf("%s  fitted slope: %.4f (intercept %.3f)\n", report.case_id.c_str(), report.slope,
              report.intercept);
}

int run_benchmark_case(const BenchmarkCase<double>& bench_case, const std::vector<int>& n_list,
                       const std::string& csv_path, const std::string& trajectory_path, int trajectory_n,
                       int workers, bool timings, int verbosity, std::string* csv_out = nullptr) {
  const Problem<double> problem = bench_case.problem();
  if (!report_validation(validate_problem(problem), verbosity)) return kExitValidation;

  const ExperimentReport report = error_report(bench_case, n_list, workers);
  if (report.failed) {
    std::cerr << "numerical failure: " << report.error << "\n";
    return kExitNumerical;
  }
  std::ostringstream csv;
  write_report_csv(report, csv, timings);
  if (csv_out) {
    *csv_out += csv.str();
  } else if (!write_file(csv_path, csv.str())) {
    print_error_listing({{"output.csv", "cannot write " + csv_path}});
    return kExitValidation;
  }
  print_report(report, verbosity);
  if (verbosity >= 1 && !csv_out) std::printf("csv written: %s\n", csv_path.c_str());

  if (!trajectory_path.empty()) {
    PicardConfig<double> config;
    config.n_steps = trajectory_n;
    config.workers = workers;
    const PicardResult<double> result = iterate(problem, config);
    if (result.failed) {
      std::cerr << "numerical failure: " << result.error << "\n";
      return kExitNumerical;
    }
    std::ostringstream traj;
    write_trajectory_csv(bench_case, result.final_pair(), traj);
    if (!write_file(trajectory_path, traj.str())) {
      print_error_listing({{"output.trajectory", "cannot write " + trajectory_path}});
      return kExitValidation;
    }
    if (verbosity >= 1) std::printf("trajectory written: %s (n=%d)\n", trajectory_path.c_str(), trajectory_n);
  }
  return kExitOk;
}

int run_custom(const std::string& config_path, int workers_flag) {
  config::RunConfig config;
  try {
    config = config::load_run_config(config_path);
  } catch (const config::ConfigError& e) {
    print_error_listing(e.issues);
    return kExitValidation;
  }
  const int workers = resolve_workers(workers_flag);
  const Problem<double> problem = config::build_problem(config);
  if (!report_validation(validate_problem(problem), config.output.verbosity)) return kExitValidation;

  std::ostringstream csv;
  csv << "case_id,n,m,max_error,slope_running,wall_ms\n";
  std::vector<ExperimentRow> rows;
  for (const int n : config.picard.n_list) {
    PicardConfig<double> pconfig = config::build_picard_config(config, n, workers);
    const auto t0 = std::chrono::steady_clock::now();
    PicardResult<double> result = iterate(problem, pconfig);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (result.failed) {
      std::cerr << "numerical failure: " << result.error << "\n";
      return kExitNumerical;
    }
    ExperimentRow row;
    row.n = n;
    row.m_iters = static_cast<int>(result.increments.size());
    // no benchmark for custom problems: report the final Picard increment
    row.max_error = static_cast<double>(result.increments.empty() ? 0.0 : result.increments.back());
    row.wall_ms = ms;
    rows.push_back(row);
    const auto [slope, intercept] = mkv::detail::fit_loglog(rows, rows.size());
    (void)intercept;
    csv << "custom," << n << ',' << row.m_iters << ',' << mkv::detail::fmt_double(row.max_error) << ','
        << mkv::detail::fmt_double(slope, "%.6f") << ','
        << mkv::detail::fmt_double(config.output.timings ? ms : 0.0, "%.3f") << '\n';
    if (config.output.verbosity >= 1)
      std::printf("custom  n=%-4d m=%-2d final_increment=%.6e  (%.1f ms)\n", n, row.m_iters, row.max_error, ms);
  }
  if (!write_file(config.output.csv, csv.str())) {
    print_error_listing({{"output.csv", "cannot write " + config.output.csv}});
    return kExitValidation;
  }
  if (config.output.verbosity >= 1) std::printf("csv written: %s\n", config.output.csv.c_str());

  if (!config.output.trajectory.empty()) {
    PicardConfig<double> pconfig = config::build_picard_config(config, config.output.trajectory_n, workers);
    const PicardResult<double> result = iterate(problem, pconfig);
    if (result.failed) {
      std::cerr << "numerical failure: " << result.error << "\n";
      return kExitNumerical;
    }
    const auto& pair = result.final_pair();
    std::ostringstream traj;
    traj << "case_id,t,beta_approx,beta_benchmark,abs_err\n";
    for (int k = 0; k <= pair.steps(); ++k) {
      const double tk = pair.horizon * k / pair.steps();
      traj << "custom," << mkv::detail::fmt_double(tk) << ','
           << mkv::detail::fmt_double(pair.beta_at(tk)(0)) << ",nan,nan\n";
    }
    if (!write_file(config.output.trajectory, traj.str())) {
      print_error_listing({{"output.trajectory", "cannot write " + config.output.trajectory}});
      return kExitValidation;
    }
    if (config.output.verbosity >= 1)
      std::printf("trajectory written: %s (n=%d)\n", config.output.trajectory.c_str(), config.output.trajectory_n);
  }
  return kExitOk;
}

int run_invariants(int verbosity) {
  const auto results = diag::run_invariant_suite();
  int failures = 0;
  for (const auto& r : results) {
    if (!r.pass) ++failures;
    if (verbosity >= 1 || !r.pass)
      std::printf("%s %-42s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  }
  std::printf("invariants: %zu/%zu passed\n", results.size() - static_cast<std::size_t>(failures),
              results.size());
  return failures == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Fourier-based Picard solver for linear mean-field SDEs with Levy jumps"};
  app.require_subcommand(1);

  std::string case_name, output_path, trajectory_path, config_path;
  std::vector<int> n_list{16, 32, 64, 128, 256};
  int dim = 2;
  int trajectory_n = 16;
  int threads = 0;
  int verbosity = 1;
  bool no_timings = false;
  bool quiet = false;

  auto* example = app.add_subcommand("run-example", "run a built-in reference experiment");
  example->add_option("case", case_name, "gaussian_1d | kou_1d | multidim | stable_init")->required();
  example->add_option("--dim", dim, "dimension for multidim / stable_init (default 2)");
  example->add_option("--n-list", n_list, "time-step counts (default 16 32 64 128 256)");
  example->add_option("--output", output_path, "report CSV path (default <case>_report.csv)");
  example->add_option("--trajectory", trajectory_path, "also dump a trajectory CSV to this path");
  example->add_option("--trajectory-n", trajectory_n, "grid size for the trajectory dump (default 16)");
  example->add_option("--threads", threads, "worker threads (default: hardware, capped by MKV_THREADS)");
  example->add_flag("--no-timings", no_timings, "zero the wall_ms CSV column for reproducible output");
  example->add_flag("--quiet", quiet, "suppress the per-n summary lines");

  auto* custom = app.add_subcommand("run-custom", "run a problem described by a config file");
  custom->add_option("config", config_path, "path to the INI config")->required();
  custom->add_option("--threads", threads, "worker threads (default: hardware, capped by MKV_THREADS)");

  auto* invariants = app.add_subcommand("invariants", "run the numerical invariant suite");
  invariants->add_flag("--quiet", quiet, "only print failures and the summary line");

  auto* sweep = app.add_subcommand("sweep", "run all reference experiments into one CSV");
  sweep->add_option("--output", output_path, "combined CSV path (default sweep_report.csv)");
  sweep->add_option("--threads", threads, "worker threads (default: hardware, capped by MKV_THREADS)");
  sweep->add_flag("--no-timings", no_timings, "zero the wall_ms CSV column for reproducible output");
  sweep->add_flag("--quiet", quiet, "suppress the per-n summary lines");

  std::vector<const char*> argv;
  argv.push_back("mkv");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error_listing({{"argv", e.what()}});
    return kExitValidation;
  }

  if (quiet) verbosity = 0;
  const int workers = resolve_workers(threads);

  try {
    if (example->parsed()) {
      const auto bench_case = case_by_name(case_name, dim);
      if (!bench_case) {
        print_error_listing({{"case", "unknown case id: " + case_name}});
        return kExitValidation;
      }
      if (output_path.empty()) output_path = bench_case->name() + "_report.csv";
      return run_benchmark_case(*bench_case, n_list, output_path, trajectory_path, trajectory_n, workers,
                                !no_timings, verbosity);
    }
    if (custom->parsed()) return run_custom(config_path, threads);
    if (invariants->parsed()) return run_invariants(verbosity);
    if (sweep->parsed()) {
      if (output_path.empty()) output_path = "sweep_report.csv";
      std::string combined;
      const BenchmarkCase<double> cases[] = {make_gaussian_case<double>(), make_kou_case<double>(),
                                             make_multidim_case<double>(2), make_multidim_case<double>(5),
                                             make_stable_case<double>(2)};
      for (const auto& bench_case : cases) {
        const int code = run_benchmark_case(bench_case, n_list, "", "", 0, workers, !no_timings, verbosity,
                                            &combined);
        if (code != kExitOk) return code;
      }
      // single header: drop the repeated ones
      std::istringstream in(combined);
      std::ostringstream merged;
      std::string line;
      bool first = true;
      while (std::getline(in, line)) {
        if (line.rfind("case_id,", 0) == 0) {
          if (!first) continue;
          first = false;
        }
        merged << line << '\n';
      }
      if (!write_file(output_path, merged.str())) {
        print_error_listing({{"output.csv", "cannot write " + output_path}});
        return kExitValidation;
      }
      if (verbosity >= 1) std::printf("csv written: %s\n", output_path.c_str());
      return kExitOk;
    }
  } catch (const ContractViolation& e) {
    print_error_listing({{"precondition", e.what()}});
    return kExitValidation;
  } catch (const ConfigurationError& e) {
    print_error_listing({{"configuration", e.what()}});
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace mkv::cli
