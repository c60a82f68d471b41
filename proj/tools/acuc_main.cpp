// Command-line front end: solve a case with one of the decomposition
// algorithms, evaluate a solution file, generate synthetic cases, or fold
// stats files into a report table.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "acuc/case_io.hpp"
#include "acuc/evaluator.hpp"
#include "acuc/orchestrator.hpp"
#include "json.hpp"

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInvalidInput = 2;
constexpr int kExitInternal = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spill(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << bytes;
  if (!out.good()) throw std::runtime_error("short write to '" + path + "'");
}

ordered_json stats_json(const acuc::RunStats& st) {
  ordered_json j;
  j["algorithm"] = st.algorithm;
  j["threads"] = st.thread_count;
  j["objective"] = st.objective;
  j["uc_time_s"] = st.uc_time_s;
  j["opf_time_total_s"] = st.opf_time_total_s;
  j["reserve_time_s"] = st.reserve_time_s;
  j["projection_time_s"] = st.projection_time_s;
  j["io_time_s"] = st.io_time_s;
  j["total_time_s"] = st.total_time_s;
  j["uc_gap"] = st.uc_gap;
  j["uc_status"] = st.uc_status;
  j["bound_conflicts"] = st.bound_conflicts;
  j["opf_time_per_period"] = st.opf_time_per_period;
  j["opf_iterations"] = st.opf_iterations;
  return j;
}

int cmd_solve(const std::string& case_path, int algorithm, double gamma,
              double gamma_percent, int threads, double time_limit,
              bool no_guard, const std::string& out_path,
              const std::string& stats_path) {
  using Clock = std::chrono::steady_clock;
  const auto t_io0 = Clock::now();
  acuc::Case c = acuc::read_case(slurp(case_path));
  double io_s =
      std::chrono::duration<double>(Clock::now() - t_io0).count();

  acuc::RunOptions opts;
  opts.algorithm = algorithm;
  opts.gamma = gamma_percent > 0.0 ? gamma_percent / 100.0 : gamma;
  opts.thread_count = threads;
  opts.uc_time_limit_s = time_limit;
  opts.apply_guard = !no_guard;
  auto [sol, stats] = acuc::run(c, opts);

  const auto t_io1 = Clock::now();
  spill(out_path, acuc::write_solution(sol, c));
  io_s += std::chrono::duration<double>(Clock::now() - t_io1).count();
  stats.io_time_s = io_s;
  if (!stats_path.empty()) spill(stats_path, stats_json(stats).dump(1) + "\n");

  std::printf("algorithm %d: objective %.6e, total %.2f s (uc %.2f, opf %.2f, "
              "reserve %.2f, projection %.2f)\n",
              stats.algorithm, stats.objective, stats.total_time_s,
              stats.uc_time_s, stats.opf_time_total_s, stats.reserve_time_s,
              stats.projection_time_s);
  return kExitOk;
}

int cmd_eval(const std::string& case_path, const std::string& sol_path,
             double best_known, bool has_best, const std::string& out_path) {
  acuc::Case c = acuc::read_case(slurp(case_path));
  acuc::FullSolution sol = acuc::read_solution(slurp(sol_path), c);
  std::optional<double> ref;
  if (has_best) ref = best_known;
  acuc::EvaluationReport rep = acuc::evaluate(c, sol, ref);

  std::printf("objective      %+.6e $\n", rep.objective);
  if (rep.gap_percent) std::printf("gap            %.2f %%\n", *rep.gap_percent);
  std::printf("energy value   %+.6e\n", rep.energy_value);
  std::printf("energy cost    %-+.6e\n", rep.energy_cost);
  std::printf("commitment     %-+.6e\n", rep.commitment_cost);
  std::printf("reserve cost   %-+.6e\n", rep.reserve_procurement_cost);
  std::printf("res. penalty   %-+.6e\n", -rep.reserve_shortfall_penalty);
  std::printf("p-penalty      %-+.6e\n", -rep.p_penalty);
  std::printf("q-penalty      %-+.6e\n", -rep.q_penalty);
  std::printf("overload pen.  %-+.6e\n", -rep.line_overload_penalty);
  std::printf("hard violations %zu\n", rep.hard_violations.size());
  for (size_t i = 0; i < std::min<size_t>(rep.hard_violations.size(), 10); ++i)
    std::printf("  %s: %s\n", rep.hard_violations[i].where.c_str(),
                rep.hard_violations[i].message.c_str());

  if (!out_path.empty()) {
    ordered_json j;
    j["objective"] = rep.objective;
    j["energy_value"] = rep.energy_value;
    j["energy_cost"] = rep.energy_cost;
    j["commitment_cost"] = rep.commitment_cost;
    j["reserve_procurement_cost"] = rep.reserve_procurement_cost;
    j["reserve_shortfall_penalty"] = -rep.reserve_shortfall_penalty;
    j["p_penalty"] = -rep.p_penalty;
    j["q_penalty"] = -rep.q_penalty;
    j["line_overload_penalty"] = -rep.line_overload_penalty;
    if (rep.gap_percent) j["gap_percent"] = *rep.gap_percent;
    j["hard_violations"] = ordered_json::array();
    for (const auto& v : rep.hard_violations)
      j["hard_violations"].push_back({{"where", v.where}, {"message", v.message}});
    spill(out_path, j.dump(1) + "\n");
  }
  return rep.hard_violations.empty() ? kExitOk : kExitInvalidInput;
}

int cmd_gen(const std::string& preset, int buses, int devices, int periods,
            int azones, int rzones, const std::string& shape,
            double margin, double tightness, std::uint64_t seed,
            const std::string& out_path) {
  acuc::GeneratorSpec spec;
  if (!preset.empty()) {
    if (preset == "goc73") {
      spec.n_buses = 73;
      spec.n_devices = 208;
      spec.n_active_zones = 1;
      spec.n_reactive_zones = 1;
    } else if (preset == "goc617") {
      spec.n_buses = 617;
      spec.n_devices = 499;
      spec.n_active_zones = 10;
      spec.n_reactive_zones = 10;
    } else if (preset == "goc2000") {
      spec.n_buses = 2000;
      spec.n_devices = 1894;
      spec.n_active_zones = 4;
      spec.n_reactive_zones = 10;
    } else {
      std::cerr << "unknown preset '" << preset << "'\n";
      return kExitInvalidInput;
    }
    spec.n_periods = 48;
  } else {
    spec.n_buses = buses;
    spec.n_devices = devices;
    spec.n_active_zones = azones;
    spec.n_reactive_zones = rzones;
    spec.n_periods = periods;
  }
  if (periods > 0) spec.n_periods = periods;
  spec.load_profile_shape =
      shape == "flat" ? acuc::LoadShape::Flat : acuc::LoadShape::Diurnal;
  spec.capacity_margin = margin;
  spec.ramp_tightness = tightness;
  spec.seed = seed;
  acuc::Case c = acuc::generate_case(spec);
  spill(out_path, acuc::write_case(c));
  std::printf("wrote %zu buses, %zu lines, %zu devices, %d periods to %s\n",
              c.buses.size(), c.lines.size(), c.devices.size(),
              c.time_grid.periods(), out_path.c_str());
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& stats_paths,
               const std::string& format) {
  if (stats_paths.empty()) {
    std::cerr << "report needs at least one stats file\n";
    return kExitInvalidInput;
  }
  struct Row {
    std::string file;
    nlohmann::json j;
  };
  std::vector<Row> rows;
  for (const auto& path : stats_paths)
    rows.push_back({path, nlohmann::json::parse(slurp(path))});

  const char* cols[] = {"algorithm",     "threads",          "objective",
                        "total_time_s",  "uc_time_s",        "opf_time_total_s",
                        "reserve_time_s","projection_time_s","io_time_s"};
  if (format == "md") {
    std::printf("| run |");
    for (const char* col : cols) std::printf(" %s |", col);
    std::printf("\n|---|");
    for (size_t i = 0; i < std::size(cols); ++i) std::printf("---|");
    std::printf("\n");
    for (const auto& row : rows) {
      std::printf("| %s |", row.file.c_str());
      for (const char* col : cols)
        std::printf(" %s |", row.j.value(col, nlohmann::json()).dump().c_str());
      std::printf("\n");
    }
  } else {
    std::printf("run");
    for (const char* col : cols) std::printf(",%s", col);
    std::printf("\n");
    for (const auto& row : rows) {
      std::printf("%s", row.file.c_str());
      for (const char* col : cols)
        std::printf(",%s", row.j.value(col, nlohmann::json()).dump().c_str());
      std::printf("\n");
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC unit commitment decomposition toolkit"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "run a decomposition algorithm");
  std::string case_path, out_path, stats_path;
  int algorithm = 3;
  double gamma = 0.05, gamma_percent = 0.0, time_limit = 0.0;
  int threads = 0;
  bool no_guard = false;
  solve->add_option("--case", case_path, "case file")->required();
  solve->add_option("--algorithm", algorithm, "algorithm 1..4")
      ->check(CLI::Range(1, 4))
      ->required();
  solve->add_option("--gamma", gamma, "tightened provider fraction (0..1)")
      ->check(CLI::Range(0.0, 1.0));
  solve->add_option("--gamma-percent", gamma_percent,
                    "tightened provider percentage (0..100)")
      ->check(CLI::Range(0.0, 100.0));
  solve->add_option("--threads", threads,
                    "worker threads (default ACUC_THREADS or 1)");
  solve->add_option("--time-limit", time_limit, "scheduling time limit, s");
  solve->add_flag("--no-guard", no_guard,
                  "disable the local balance guard when fixing reserves");
  solve->add_option("--out", out_path, "solution file")->required();
  solve->add_option("--stats", stats_path, "stats JSON file");

  // eval
  auto* eval = app.add_subcommand("eval", "score a solution file");
  std::string eval_case, eval_sol, eval_out;
  double best_known = 0.0;
  bool has_best = false;
  eval->add_option("--case", eval_case, "case file")->required();
  eval->add_option("--solution", eval_sol, "solution file")->required();
  auto* best_opt =
      eval->add_option("--best-known", best_known, "reference objective");
  eval->add_option("--out", eval_out, "report JSON file");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic case");
  std::string preset, shape = "diurnal", gen_out;
  int buses = 10, devices = 8, periods = 0, azones = 1, rzones = 1;
  double margin = 0.3, tightness = 0.25;
  std::uint64_t seed = 1;
  gen->add_option("--preset", preset, "goc73 | goc617 | goc2000");
  gen->add_option("--buses", buses, "bus count");
  gen->add_option("--devices", devices, "device count");
  gen->add_option("--periods", periods, "period count");
  gen->add_option("--active-zones", azones, "active reserve zones");
  gen->add_option("--reactive-zones", rzones, "reactive reserve zones");
  gen->add_option("--shape", shape, "flat | diurnal")
      ->check(CLI::IsMember({"flat", "diurnal"}));
  gen->add_option("--margin", margin, "capacity margin over peak demand");
  gen->add_option("--ramp-tightness", tightness, "ramp tightness (0,1]");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", gen_out, "case file")->required();

  // report
  auto* report = app.add_subcommand("report", "tabulate stats files");
  std::vector<std::string> stats_files;
  std::string format = "csv";
  report->add_option("--stats", stats_files, "stats JSON files");
  report->add_option("--format", format, "csv | md")
      ->check(CLI::IsMember({"csv", "md"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  try {
    if (solve->parsed()) {
      if (threads <= 0) {
        const char* env = std::getenv("ACUC_THREADS");
        threads = env ? std::max(1, std::atoi(env)) : 1;
      }
      return cmd_solve(case_path, algorithm, gamma, gamma_percent, threads,
                       time_limit, no_guard, out_path, stats_path);
    }
    if (eval->parsed()) {
      has_best = best_opt->count() > 0;
      return cmd_eval(eval_case, eval_sol, best_known, has_best, eval_out);
    }
    if (gen->parsed())
      return cmd_gen(preset, buses, devices, periods, azones, rzones, shape,
                     margin, tightness, seed, gen_out);
    if (report->parsed()) return cmd_report(stats_files, format);
  } catch (const acuc::SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const acuc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const acuc::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const acuc::GenerationError& e) {
    std::cerr << "generation error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
