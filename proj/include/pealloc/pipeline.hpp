#pragma once

// Experiment stages behind the CLI subcommands. Each stage reads its inputs
// from the output directory, writes CSVs stamped with the seed and config
// hash, and records a JSON manifest. Nothing time-dependent is written.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pealloc/closed_form.hpp"
#include "pealloc/common.hpp"
#include "pealloc/config.hpp"
#include "pealloc/interference.hpp"
#include "pealloc/io.hpp"
#include "pealloc/penn.hpp"
#include "pealloc/pretrain.hpp"
#include "pealloc/theory.hpp"
#include "pealloc/trainer.hpp"
#include "pealloc/urllc.hpp"

namespace pealloc::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion = "pealloc-0.1.0";

/// A stage ran before the one it depends on.
struct DependencyError : InputError {
  using InputError::InputError;
};

enum class Method { proposed, m_penn, fnn };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::m_penn: return "m_penn";
    case Method::fnn: return "fnn";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "proposed") return Method::proposed;
  if (s == "m_penn") return Method::m_penn;
  if (s == "fnn") return Method::fnn;
  throw InputError("unknown method '" + s + "' (expected proposed, m_penn or fnn)");
}

inline std::vector<Method> all_methods() { return {Method::proposed, Method::m_penn, Method::fnn}; }

namespace files {
inline const char* bv_labels = "bv_labels.csv";
inline const char* bv_net = "bv_net.txt";
inline const char* bv_loss = "bv_loss.csv";
inline const char* bv_summary = "bv_summary.csv";
inline const char* wmmse_curve = "wmmse_curve.csv";
inline const char* wmmse_binary = "wmmse_binary.csv";
inline const char* metrics = "metrics.csv";
inline const char* theory = "theory_checks.csv";
inline const char* closed_form = "closed_form.csv";
inline std::string policy(Method m) { return "policy_" + to_string(m) + ".txt"; }
inline std::string trace(Method m) { return "trace_" + to_string(m) + ".csv"; }
}  // namespace files

// Stream tags under the master seed.
namespace tags {
inline constexpr std::uint64_t data = 0xda7a;
inline constexpr std::uint64_t labels = 0x1abe;
inline constexpr std::uint64_t bv_init = 0xb5e7;
inline constexpr std::uint64_t bv_fit = 0xb5f1;
inline constexpr std::uint64_t train = 0x7a15;
inline constexpr std::uint64_t eval = 0xe7a1;
inline constexpr std::uint64_t wmmse = 0x3e5e;
inline constexpr std::uint64_t theory = 0x7e0;
}  // namespace tags

class Context {
 public:
  explicit Context(config::ExperimentConfig cfg, std::optional<fs::path> out = std::nullopt)
      : cfg_(std::move(cfg)), out_(out ? *out : fs::path(cfg_.out_dir)) {
    prov_ = {cfg_.seed, config::config_hash(cfg_)};
  }

  const config::ExperimentConfig& cfg() const { return cfg_; }
  const io::Provenance& prov() const { return prov_; }
  const fs::path& out() const { return out_; }
  fs::path path(const std::string& name) const { return out_ / name; }
  std::uint64_t seed(std::uint64_t tag) const { return stream_seed(cfg_.seed, tag); }

  void record(const std::string& command, const std::vector<std::string>& outputs) const {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = cfg_.seed;
    m["config_hash"] = prov_.config_hash;
    m["config"] = config::to_json(cfg_);
    m["outputs"] = outputs;
    io::write_file(out_ / ("manifest_" + command + ".json"), m.dump(2) + "\n");
  }

 private:
  config::ExperimentConfig cfg_;
  fs::path out_;
  io::Provenance prov_;
};

inline std::string num(double v) { return io::csv_num(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }

// ---------------------------------------------------------------- closed form

enum class ClosedFormMode { min_power, joint };

inline ClosedFormMode closed_form_mode_from_string(const std::string& s) {
  if (s == "min-power" || s == "min_power") return ClosedFormMode::min_power;
  if (s == "joint") return ClosedFormMode::joint;
  throw InputError("unknown closed-form mode '" + s + "' (expected min-power or joint)");
}

struct ClosedFormInput {
  ClosedFormMode mode = ClosedFormMode::joint;
  double bandwidth = 1.0;  ///< min-power mode only
  double s0 = 1.0;
  double n0 = 1.0;
  double p_max = 1.0;  ///< joint mode only
};

/// Per-user rows (k, g, power, bandwidth, residual); the residual is
/// |rate_k - s0| / s0 for that user.
inline io::CsvTable closed_form_table(const nn::Vec& g, const ClosedFormInput& in, const io::Provenance& prov) {
  if (g.size() == 0) throw InputError("closed-form: gains file has no rows");
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (!(g(k) > 0.0) || !std::isfinite(g(k))) throw InputError("closed-form: gains must be positive and finite");
  nn::Vec powers;
  double bandwidth = in.bandwidth;
  if (in.mode == ClosedFormMode::min_power) {
    powers = closed_form::solve_min_power({g, in.bandwidth, in.s0, in.n0});
  } else {
    const auto sol = closed_form::solve_joint({g, in.s0, in.n0, in.p_max});
    powers = sol.powers;
    bandwidth = sol.bandwidth;
  }
  io::CsvTable t(prov, {"k", "g", "power", "bandwidth", "residual"});
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double r = std::abs(closed_form::shannon_rate(powers(k), g(k), bandwidth, in.n0) - in.s0) / in.s0;
    t.add({std::to_string(k), io::exact(g(k)), io::exact(powers(k)), io::exact(bandwidth), io::exact(r)});
  }
  return t;
}

inline void run_closed_form(const Context& ctx, const fs::path& gains_file, const ClosedFormInput& in) {
  const auto g = io::read_gains_csv(gains_file);
  closed_form_table(g, in, ctx.prov()).save(ctx.path(files::closed_form));
  ctx.record("closed-form", {files::closed_form});
}

// ---------------------------------------------------------------- WMMSE

struct WmmseTables {
  io::CsvTable curve;
  io::CsvTable binary;
};

inline WmmseTables wmmse_tables(const Context& ctx) {
  auto opt = ctx.cfg().wmmse;
  opt.seed = stream_seed(ctx.seed(tags::wmmse), opt.seed);
  const auto res = interference::full_power_curve(opt);
  WmmseTables t{io::CsvTable(ctx.prov(), {"K", "g_center", "prob", "count"}),
                io::CsvTable(ctx.prov(), {"K", "binary_fraction", "N"})};
  for (const auto& p : res.points)
    t.curve.add({num(p.k), num(p.g_center), p.prob ? num(*p.prob) : "", num(p.count)});
  for (const auto& b : res.binary) t.binary.add({num(b.k), num(b.fraction), num(b.n)});
  return t;
}

inline void run_wmmse_curve(const Context& ctx) {
  const auto t = wmmse_tables(ctx);
  t.curve.save(ctx.path(files::wmmse_curve));
  t.binary.save(ctx.path(files::wmmse_binary));
  ctx.record("wmmse-curve", {files::wmmse_curve, files::wmmse_binary});
}

// ---------------------------------------------------------------- B^v pretraining

/// Hash of the settings the labels depend on; keys the label cache.
inline std::string label_key(const config::ExperimentConfig& c) {
  const json j = config::to_json(c);
  json k;
  k["seed"] = c.seed;
  k["system"] = j.at("system");
  for (const char* key : {"crn_draws", "crn_seed", "tol_fraction"}) k[key] = j.at("bv").at(key);
  k["n_labels"] = c.bv.n_labels;
  k["k_max"] = c.bv.k_max;
  return io::hex64(io::fnv1a64(k.dump()));
}

/// Cached labels when the cache header matches the current label settings,
/// otherwise fresh labels (written to the cache).
inline std::vector<pretrain::BvSample> load_or_make_labels(const Context& ctx, bool* reused = nullptr) {
  const auto& c = ctx.cfg();
  const io::Provenance key{c.seed, label_key(c)};
  const auto cache = ctx.path(files::bv_labels);
  if (fs::exists(cache)) {
    const std::string text = io::read_file(cache);
    const std::string expected = "# seed=" + std::to_string(key.seed) + " config_hash=" + key.config_hash + "\n";
    if (text.rfind(expected, 0) == 0) {
      auto labels = io::read_labels(cache);
      if (labels.size() == c.bv.n_labels) {
        if (reused) *reused = true;
        return labels;
      }
    }
  }
  const pretrain::BvLabeler labeler(c.system, c.bv.labels);
  auto labels = pretrain::generate_labels(labeler, c.bv.n_labels, c.bv.k_max, ctx.seed(tags::labels));
  io::label_table(labels, key).save(cache);
  if (reused) *reused = false;
  return labels;
}

inline pretrain::PretrainResult run_pretrain_bv(const Context& ctx) {
  const auto& c = ctx.cfg();
  auto labels = load_or_make_labels(ctx);
  Rng rng = make_rng(ctx.seed(tags::bv_init), 0);
  auto net = pretrain::BvNet::random(c.bv.k_max, c.bv.unit_hz, rng, c.bv.hidden);
  auto fit = c.bv.fit;
  fit.seed = stream_seed(ctx.seed(tags::bv_fit), fit.seed);
  auto res = pretrain::pretrain_bv(std::move(labels), std::move(net), fit);

  io::write_file(ctx.path(files::bv_net), io::serialize(res.net));
  io::CsvTable loss(ctx.prov(), {"epoch", "mse"});
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) loss.add({num(e), num(res.epoch_loss[e])});
  loss.save(ctx.path(files::bv_loss));
  io::CsvTable summary(ctx.prov(), {"metric", "value"});
  summary.add({"validation_mse", num(res.validation_mse)});
  summary.add({"label_variance", num(res.label_variance)});
  summary.add({"within_10pct", num(res.within_10pct)});
  summary.add({"steps", num(res.steps)});
  summary.save(ctx.path(files::bv_summary));
  ctx.record("pretrain-bv", {files::bv_labels, files::bv_net, files::bv_loss, files::bv_summary});
  return res;
}

inline pretrain::BvNet load_bv(const Context& ctx) {
  const auto p = ctx.path(files::bv_net);
  if (!fs::exists(p))
    throw DependencyError("missing " + p.string() + "; run `pealloc pretrain-bv` with the same --out first");
  return io::parse_bv_net(io::read_file(p), p.string());
}

// ---------------------------------------------------------------- training

inline trainer::Dataset dataset(const Context& ctx) {
  return trainer::generate_dataset(ctx.cfg().train.data, ctx.cfg().system, ctx.seed(tags::data));
}

/// Training settings for one method; ε_D differs per method.
struct MethodSetup {
  urllc::UrllcConfig system;
  trainer::TrainConfig tc;
};

inline MethodSetup method_setup(const Context& ctx, Method m) {
  const auto& c = ctx.cfg();
  MethodSetup s{c.system, c.train.penn};
  s.tc.seed = stream_seed(ctx.seed(tags::train), c.train.penn.seed);
  if (m == Method::m_penn) s.system.eps_train = c.train.m_penn_eps_train;
  if (m == Method::fnn) {
    s.system.eps_train = c.train.fnn_eps_train;
    s.tc.batch = c.train.fnn_batch;
    s.tc.lr = c.train.fnn_lr;
  }
  return s;
}

inline io::CsvTable trace_table(const std::vector<trainer::TraceRow>& trace, const io::Provenance& prov) {
  io::CsvTable t(prov, {"epoch", "t", "L", "validation_A"});
  for (const auto& r : trace)
    t.add({num(r.epoch), num(r.iteration), num(r.lagrangian),
           r.validation_availability ? num(*r.validation_availability) : ""});
  return t;
}

inline void train_method(const Context& ctx, Method m) {
  const auto& c = ctx.cfg();
  const auto setup = method_setup(ctx, m);
  const auto data = dataset(ctx);
  const double unit = setup.tc.bandwidth_unit_hz;
  std::string model_text;
  std::vector<trainer::TraceRow> trace;
  if (m == Method::fnn) {
    auto train_raw = trainer::generate_split(c.train.fnn_train, c.system, ctx.seed(tags::data), 0x7a4);
    const auto train_set = trainer::prepare(train_raw, nullptr, unit);
    const auto val_set = trainer::prepare(data.validation, nullptr, unit);
    auto init = trainer::build_padded_fnn(setup.system, setup.tc, c.train.fnn_k_max, c.train.fnn_hidden);
    auto res = trainer::train(std::move(init), train_set, val_set, setup.system, setup.tc);
    model_text = io::serialize(res.state.policy);
    trace = std::move(res.trace);
  } else {
    std::optional<pretrain::BvNet> bv;
    if (m == Method::proposed) bv = load_bv(ctx);
    const pretrain::BvNet* bvp = bv ? &*bv : nullptr;
    const auto train_set = trainer::prepare(data.train, bvp, unit);
    const auto val_set = trainer::prepare(data.validation, bvp, unit);
    auto init = m == Method::proposed ? trainer::build_proposed(setup.system, setup.tc)
                                      : trainer::build_m_penn(setup.system, setup.tc);
    auto res = trainer::train(std::move(init), train_set, val_set, setup.system, setup.tc);
    model_text = io::serialize(res.state.policy);
    trace = std::move(res.trace);
  }
  io::write_file(ctx.path(files::policy(m)), model_text);
  trace_table(trace, ctx.prov()).save(ctx.path(files::trace(m)));
}

inline void run_train(const Context& ctx, const std::vector<Method>& methods) {
  // fail before any training if the B^v model is missing
  for (Method m : methods)
    if (m == Method::proposed) (void)load_bv(ctx);
  std::vector<std::string> outputs;
  for (Method m : methods) {
    train_method(ctx, m);
    outputs.push_back(files::policy(m));
    outputs.push_back(files::trace(m));
  }
  ctx.record("train", outputs);
}

// ---------------------------------------------------------------- evaluation

struct MethodMetrics {
  Method method;
  std::vector<urllc::MetricsRow> rows;
};

inline std::string read_policy_text(const Context& ctx, Method m) {
  const auto p = ctx.path(files::policy(m));
  if (!fs::exists(p))
    throw DependencyError("missing " + p.string() + "; run `pealloc train --method " + to_string(m) +
                          "` with the same --out first");
  return io::read_file(p);
}

inline std::vector<MethodMetrics> evaluate_methods(const Context& ctx, const std::vector<Method>& methods) {
  const auto& c = ctx.cfg();
  std::vector<std::string> texts;
  for (Method m : methods) texts.push_back(read_policy_text(ctx, m));
  const auto data = dataset(ctx);
  const auto draws = urllc::fading_draws(urllc::FadingSpec::rayleigh(c.system.n_antennas), c.train.n_mc_eval,
                                         ctx.seed(tags::eval));
  const double unit = c.train.penn.bandwidth_unit_hz;
  std::vector<MethodMetrics> out;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const Method m = methods[i];
    const auto source = ctx.path(files::policy(m)).string();
    if (m == Method::fnn) {
      const auto policy = io::parse_fnn_policy(texts[i], source);
      std::vector<urllc::ChannelSample> ok;
      for (const auto& s : data.test)
        if (s.size() <= policy.k_max()) ok.push_back(s);
      out.push_back({m, trainer::evaluate(policy, trainer::prepare(ok, nullptr, unit), c.system, unit, draws)});
    } else {
      const auto policy = io::parse_penn_policy(texts[i], source);
      std::optional<pretrain::BvNet> bv;
      if (m == Method::proposed) bv = load_bv(ctx);
      const auto test = trainer::prepare(data.test, bv ? &*bv : nullptr, unit);
      out.push_back({m, trainer::evaluate(policy, test, c.system, unit, draws)});
    }
  }
  return out;
}

inline io::CsvTable metrics_table(const std::vector<MethodMetrics>& all, const io::Provenance& prov) {
  io::CsvTable t(prov, {"method", "K", "A_K", "W_K_r_MHz", "n_samples"});
  for (const auto& mm : all)
    for (const auto& r : mm.rows)
      t.add({to_string(mm.method), num(r.k), num(r.availability), num(r.bandwidth_mhz), num(r.n_samples)});
  return t;
}

inline std::vector<MethodMetrics> run_evaluate(const Context& ctx, const std::vector<Method>& methods) {
  auto all = evaluate_methods(ctx, methods);
  metrics_table(all, ctx.prov()).save(ctx.path(files::metrics));
  ctx.record("evaluate", {files::metrics});
  return all;
}

// ---------------------------------------------------------------- theory checks

struct CheckResult {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool upper = true;  ///< pass when statistic <= threshold, else >=
  bool pass() const { return upper ? statistic <= threshold : statistic >= threshold; }
};

/// Fixed random model used by the size-invariance harness.
inline penn::PennModel theory_model(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x3d1);
  return penn::PennModel::random({1, 8, 8, 1}, nn::Activation::leaky_relu, penn::Aggregator::mean,
                                 penn::Head::softplus, 1.0, rng);
}

/// Mean control plus sum and max drift ratios under one harness.
inline std::vector<CheckResult> invariance_checks(const std::string& label, const penn::PennModel& model,
                                                  const theory::Sampler& features,
                                                  const theory::InvarianceOptions& opt) {
  const auto mean = theory::check_mean_invariance(model, features, opt);
  const auto sum = theory::check_aggregator_drift(model, penn::Aggregator::sum, features, opt);
  const auto max = theory::check_aggregator_drift(model, penn::Aggregator::max, features, opt);
  const double floor = std::max(mean.max_deviation, 1e-300);
  return {{"mean_relative_deviation_" + label, mean.relative(), 0.01, true},
          {"sum_over_mean_" + label, sum.max_deviation / floor, 10.0, false},
          {"max_over_mean_" + label, max.max_deviation / floor, 10.0, false}};
}

inline std::vector<CheckResult> theory_checks(const config::ExperimentConfig& c, std::uint64_t seed) {
  std::vector<CheckResult> out;
  const auto model = theory_model(seed);

  // Exp(1) features: the max aggregate of U(0,1) saturates near 1, so only an
  // unbounded law separates max drift from the mean control.
  theory::InvarianceOptions exp_opt{{0.1, 0.5, 1.0, 2.0, 3.0}, c.theory.k1, c.theory.k2, c.theory.trials,
                                    stream_seed(seed, 2)};
  for (auto& r : invariance_checks("exp", model, theory::exponential_features(), exp_opt)) out.push_back(r);

  theory::InvarianceOptions uni_opt{{0.1, 0.3, 0.5, 0.7, 0.9}, c.theory.k1, c.theory.k2, c.theory.trials,
                                    stream_seed(seed, 1)};
  const auto uni_mean = theory::check_mean_invariance(model, theory::uniform_features(), uni_opt);
  const auto uni_sum = theory::check_aggregator_drift(model, penn::Aggregator::sum, theory::uniform_features(), uni_opt);
  out.push_back({"mean_relative_deviation_uniform", uni_mean.relative(), 0.01, true});
  out.push_back({"sum_over_mean_uniform", uni_sum.max_deviation / std::max(uni_mean.max_deviation, 1e-300),
                 10.0, false});

  // max of K-1 uniforms grows toward 1
  const double m256 = theory::mean_aggregate(penn::Aggregator::max, theory::uniform_features(), 256, 2000,
                                             stream_seed(seed, 3));
  const double m4096 = theory::mean_aggregate(penn::Aggregator::max, theory::uniform_features(), 4096, 2000,
                                              stream_seed(seed, 3));
  out.push_back({"max_aggregate_growth_256_4096", m4096 - m256, 0.0, false});

  // closed-form joint powers on unit-mean 8-antenna gains, so g* = 1 is a typical user
  const double p_max = 1.0;
  const theory::Policy softmax = [&](const nn::Vec& g) { return closed_form::joint_powers_via_softmax(g, p_max); };
  const auto gains = theory::gamma_gains(8, 1.0 / 8.0);
  const auto rows = theory::check_policy_decomposition(softmax, {10, 30, 100}, 1.0, gains,
                                                       c.theory.decomposition_trials, stream_seed(seed, 4));
  out.push_back({"concentration_cv_at_100", rows[2].cv(), 0.1, true});
  const bool decreasing = rows[0].cv() > rows[1].cv() && rows[1].cv() > rows[2].cv();
  out.push_back({"concentration_cv_decreasing_10_30_100", decreasing ? 1.0 : 0.0, 1.0, false});
  const double limit = p_max / (1.0 * theory::mean_inverse(gains, 200000, stream_seed(seed, 5)));
  out.push_back({"concentration_mean_relative_error_at_100", std::abs(rows[2].mean_k - limit) / limit, 0.05, true});
  return out;
}

inline io::CsvTable theory_table(const std::vector<CheckResult>& checks, const io::Provenance& prov) {
  io::CsvTable t(prov, {"check", "statistic", "threshold", "direction", "result"});
  for (const auto& r : checks)
    t.add({r.name, num(r.statistic), num(r.threshold), r.upper ? "<=" : ">=", r.pass() ? "PASS" : "FAIL"});
  return t;
}

inline std::vector<CheckResult> run_theory_checks(const Context& ctx) {
  auto checks = theory_checks(ctx.cfg(), ctx.seed(tags::theory));
  theory_table(checks, ctx.prov()).save(ctx.path(files::theory));
  ctx.record("theory-checks", {files::theory});
  return checks;
}

}  // namespace pealloc::pipeline
