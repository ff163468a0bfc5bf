#include "CLI11.hpp"
#include "json.hpp"

#include "selbias/config.hpp"
#include "selbias/graph.hpp"
#include "selbias/harness.hpp"
#include "selbias/report_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace selbias;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kEstimatorFailure = 3;

std::string output_dir(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("SELBIAS_OUTPUT_DIR");
    dir = env && *env ? env : ".";
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "'");
  return dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
}

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& methods,
                                     const std::vector<std::uint64_t>& seeds, int threads, bool timing) {
  ExperimentConfig cfg = path.empty() ? parse_config_text("") : load_config(path);
  if (!methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : methods) cfg.methods.push_back(parse_method(m));
  }
  if (!seeds.empty()) cfg.seeds = seeds;
  if (threads >= 0) cfg.threads = threads;
  if (timing) cfg.timing = true;
  cfg.validate();
  return cfg;
}

void print_summary(const RunReport& report, std::ostream& os) {
  os << "oracle_ate " << report.oracle_ate << "  config " << report.config_hash << "\n";
  for (const auto& s : summarize(report)) {
    char line[160];
    std::snprintf(line, sizeof line, "%-12s mean_error %+.4f  std %.4f  n %zu%s%s\n",
                  std::string(method_name(s.method)).c_str(), s.mean_error, s.std_error, s.n,
                  s.single_seed ? "  (single seed)" : "", s.failures ? "  (failures)" : "");
    os << line;
  }
}

int report_failures(const RunReport& report) {
  for (const auto& r : report.rows) {
    if (!r.message.empty()) {
      std::cerr << "seed " << r.seed << " " << method_name(r.method) << ": " << r.message << "\n";
    }
  }
  return report.failures() ? kEstimatorFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ATE estimation under selection bias"};
  app.require_subcommand(1);
  std::string config_path, out_flag, prefix = "report";
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  int threads = -1;
  bool timing = false;

  auto* gen = app.add_subcommand("gen", "Simulate one seed and write the dataset as CSV");
  std::uint64_t gen_seed = 0;
  bool gen_all = false;
  std::string gen_out = "dataset.csv";
  gen->add_option("-c,--config", config_path, "Experiment config (JSON)");
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_flag("--population", gen_all, "Write the whole population with selection flags");
  gen->add_option("-o,--output", gen_out, "File name inside the output directory");
  gen->add_option("--out-dir", out_flag, "Output directory (default $SELBIAS_OUTPUT_DIR or .)");

  auto* run = app.add_subcommand("run", "Run an experiment and write report CSV and SVG");
  run->add_option("-c,--config", config_path, "Experiment config (JSON)");
  run->add_option("--methods", methods, "Override the method list")->delimiter(',');
  run->add_option("--seeds", seeds, "Override the seed list")->delimiter(',');
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");
  run->add_flag("--timing", timing, "Record runtimes");
  run->add_option("--prefix", prefix, "Output file prefix");
  run->add_option("--out-dir", out_flag, "Output directory (default $SELBIAS_OUTPUT_DIR or .)");

  auto* sweep = app.add_subcommand("sweep", "Sweep the covariate-dependent selection parameters");
  std::vector<double> beta_c{1.0, 3.0, 5.0}, beta_s{0.1, 0.5, 1.0};
  sweep->add_option("-c,--config", config_path, "Experiment config (JSON)");
  sweep->add_option("--methods", methods, "Override the method list")->delimiter(',');
  sweep->add_option("--seeds", seeds, "Override the seed list")->delimiter(',');
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");
  sweep->add_option("--beta-c", beta_c, "Selection centers")->delimiter(',');
  sweep->add_option("--beta-s", beta_s, "Selection slopes")->delimiter(',');
  sweep->add_option("--out-dir", out_flag, "Output directory (default $SELBIAS_OUTPUT_DIR or .)");

  auto* idcheck = app.add_subcommand("idcheck", "Compare two parametric tuples or two outcome families");
  std::string id_path;
  idcheck->add_option("request", id_path, "Request JSON file")->required();

  auto* dagcheck = app.add_subcommand("dagcheck", "Check a graphical adjustment criterion");
  std::string dag_path, criterion = "gact";
  std::vector<std::string> z;
  bool classify = false;
  dagcheck->add_option("graph", dag_path, "Edge-list file")->required();
  dagcheck->add_option("--criterion", criterion, "selection_backdoor, selection_backdoor_ext, gact, gact_ext, s_id");
  dagcheck->add_option("--z", z, "Adjustment set")->delimiter(',');
  dagcheck->add_flag("--classify", classify, "Classify a four-node selection template instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      ExperimentConfig cfg = load_with_overrides(config_path, {}, {}, -1, false);
      const SeedData data = simulate_seed(cfg, gen_seed);
      const std::string path = join(output_dir(out_flag), gen_out);
      write_dataset_csv(gen_all ? data.population : data.selection.observed, path);
      std::cout << "wrote " << path << " (" << data.selection.report.kept << " of " << data.selection.report.total
                << " kept)\n";
      return kOk;
    }
    if (*run) {
      ExperimentConfig cfg = load_with_overrides(config_path, methods, seeds, threads, timing);
      const RunReport report = run_experiment(cfg);
      const std::string dir = output_dir(out_flag);
      emit_csv(report, join(dir, prefix + ".csv"));
      emit_boxplot_svg(report, join(dir, prefix + ".svg"));
      write_atomic(join(dir, prefix + "_summary.csv"), summary_csv(summarize(report)));
      write_atomic(join(dir, prefix + "_config.json"), config_to_json(cfg).dump(2) + "\n");
      print_summary(report, std::cout);
      return report_failures(report);
    }
    if (*sweep) {
      ExperimentConfig cfg = load_with_overrides(config_path, methods, seeds, threads, false);
      const auto points = run_sweep(cfg, beta_c, beta_s);
      const std::string dir = output_dir(out_flag);
      std::string table = "beta_C,beta_S,method,mean_error,std_error\n";
      int rc = kOk;
      for (const auto& p : points) {
        char tag[64];
        std::snprintf(tag, sizeof tag, "sweep_C%g_S%g", p.beta_C, p.beta_S);
        emit_csv(p.report, join(dir, std::string(tag) + ".csv"));
        emit_boxplot_svg(p.report, join(dir, std::string(tag) + ".svg"));
        std::cout << "== beta_C " << p.beta_C << " beta_S " << p.beta_S << "\n";
        print_summary(p.report, std::cout);
        for (const auto& s : summarize(p.report)) {
          char row[160];
          std::snprintf(row, sizeof row, "%.17g,%.17g,%s,%.17g,%.17g\n", p.beta_C, p.beta_S,
                        std::string(method_name(s.method)).c_str(), s.mean_error, s.std_error);
          table += row;
        }
        if (report_failures(p.report) != kOk) rc = kEstimatorFailure;
      }
      write_atomic(join(dir, "sweep_summary.csv"), table);
      return rc;
    }
    if (*idcheck) {
      const IdcheckRequest req = parse_idcheck(parse_json_file(id_path));
      std::cout << run_idcheck(req).dump(2) << "\n";
      return kOk;
    }
    if (*dagcheck) {
      const Dag dag = parse_dag(slurp(dag_path));
      if (classify) {
        const TemplateClassification c = classify_selection_template(dag);
        std::cout << json{{"dag_framework", std::string(dag_verdict_name(c.dag_framework))}, {"s_id", c.s_id}}.dump(2)
                  << "\n";
        return kOk;
      }
      const Dag::NodeSet zs(z.begin(), z.end());
      const CriterionReport rep = check_criterion(dag, parse_criterion(criterion), zs);
      json out{{"criterion", std::string(criterion_name(rep.criterion))},
               {"holds", rep.holds},
               {"z", std::vector<std::string>(zs.begin(), zs.end())}};
      out["failed_clause"] = rep.failed_clause ? json(*rep.failed_clause) : json(nullptr);
      out["witness_path"] = rep.witness_path ? json(*rep.witness_path) : json(nullptr);
      std::cout << out.dump(2) << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEstimatorFailure;
  }
  return kOk;
}
