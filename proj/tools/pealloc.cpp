// pealloc: experiment driver. Exit codes: 0 ok, 1 numerical or
// infeasibility failure, 2 bad input or missing prerequisite.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pealloc/pipeline.hpp"

namespace {

using namespace pealloc;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> set;
  unsigned threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--out", c.out, "output directory (default: $PEALLOC_OUT, then the config's out_dir)");
  app->add_option("--set", c.set, "override one config value, e.g. --set train.epochs=200")->take_all();
  app->add_option("--threads", c.threads, "worker threads (0 = hardware)");
}

pipeline::Context make_context(const Common& c) {
  std::vector<std::string> overrides = c.set;
  if (c.seed) overrides.push_back("seed=" + std::to_string(*c.seed));
  auto cfg = c.config.empty() ? config::load(nullptr, overrides) : config::load_file(c.config, overrides);
  std::optional<std::filesystem::path> out;
  if (!c.out.empty())
    out = c.out;
  else if (const char* env = std::getenv("PEALLOC_OUT"); env && *env)
    out = env;
  if (c.threads > 0) set_threads(c.threads);
  return pipeline::Context(std::move(cfg), out);
}

std::vector<pipeline::Method> parse_methods(const std::vector<std::string>& names) {
  if (names.empty()) return pipeline::all_methods();
  std::vector<pipeline::Method> out;
  for (const auto& n : names) out.push_back(pipeline::method_from_string(n));
  return out;
}

void print_metrics(const std::vector<pipeline::MethodMetrics>& all) {
  for (const auto& mm : all)
    for (const auto& r : mm.rows)
      std::cout << pipeline::to_string(mm.method) << " K=" << r.k << " A=" << r.availability
                << " W=" << r.bandwidth_mhz << " MHz\n";
}

bool print_checks(const std::vector<pipeline::CheckResult>& checks) {
  bool ok = true;
  for (const auto& r : checks) {
    std::cout << (r.pass() ? "PASS " : "FAIL ") << r.name << " " << r.statistic << (r.upper ? " <= " : " >= ")
              << r.threshold << "\n";
    ok = ok && r.pass();
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Size-generalizable URLLC power and bandwidth allocation experiments"};
  app.require_subcommand(1);

  Common common;
  std::string gains_file;
  std::string mode = "joint";
  pipeline::ClosedFormInput cf;
  std::vector<std::string> train_methods;
  std::vector<std::string> eval_methods;

  auto* closed = app.add_subcommand("closed-form", "solve the minimum-power or joint problem for a gains file");
  add_common(closed, common);
  closed->add_option("gains", gains_file, "CSV with one gain per row")->required();
  closed->add_option("--mode", mode, "min-power or joint");
  closed->add_option("--bandwidth", cf.bandwidth, "bandwidth for min-power mode");
  closed->add_option("--s0", cf.s0, "per-user rate target");
  closed->add_option("--n0", cf.n0, "noise spectral density");
  closed->add_option("--p-max", cf.p_max, "power budget for joint mode");

  auto* wmmse = app.add_subcommand("wmmse-curve", "full-power probability curve from WMMSE solutions");
  add_common(wmmse, common);

  auto* pre = app.add_subcommand("pretrain-bv", "label and fit the bandwidth scaling network");
  add_common(pre, common);

  auto* train = app.add_subcommand("train", "primal-dual training of the allocation policies");
  add_common(train, common);
  train->add_option("--method", train_methods, "proposed, m_penn, fnn (default: all)")->take_all();

  auto* eval = app.add_subcommand("evaluate", "availability and bandwidth of trained policies");
  add_common(eval, common);
  eval->add_option("--method", eval_methods, "proposed, m_penn, fnn (default: all)")->take_all();

  auto* theory_cmd = app.add_subcommand("theory-checks", "size-invariance and concentration checks");
  add_common(theory_cmd, common);

  auto* all = app.add_subcommand("all-tables", "wmmse-curve, pretrain-bv, train, evaluate and theory-checks");
  add_common(all, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto ctx = make_context(common);
    if (*closed) {
      cf.mode = pipeline::closed_form_mode_from_string(mode);
      pipeline::run_closed_form(ctx, gains_file, cf);
    } else if (*wmmse) {
      pipeline::run_wmmse_curve(ctx);
    } else if (*pre) {
      const auto res = pipeline::run_pretrain_bv(ctx);
      std::cout << "B^v validation: within 10% " << res.within_10pct << ", mse " << res.validation_mse << "\n";
    } else if (*train) {
      pipeline::run_train(ctx, parse_methods(train_methods));
    } else if (*eval) {
      print_metrics(pipeline::run_evaluate(ctx, parse_methods(eval_methods)));
    } else if (*theory_cmd) {
      if (!print_checks(pipeline::run_theory_checks(ctx))) return 1;
    } else if (*all) {
      pipeline::run_wmmse_curve(ctx);
      pipeline::run_pretrain_bv(ctx);
      pipeline::run_train(ctx, pipeline::all_methods());
      print_metrics(pipeline::run_evaluate(ctx, pipeline::all_methods()));
      if (!print_checks(pipeline::run_theory_checks(ctx))) return 1;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 1;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
