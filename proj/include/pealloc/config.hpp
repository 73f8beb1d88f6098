#pragma once

// Experiment configuration as JSON. Every field has a default; a user file
// (or --set a.b=value override) may only touch keys that exist in the
// defaults, so typos are rejected instead of silently ignored.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pealloc/common.hpp"
#include "pealloc/interference.hpp"
#include "pealloc/io.hpp"
#include "pealloc/pretrain.hpp"
#include "pealloc/trainer.hpp"
#include "pealloc/urllc.hpp"

namespace pealloc::config {

using json = nlohmann::json;

struct BvSection {
  pretrain::LabelOptions labels{};
  pretrain::PretrainOptions fit{};
  std::size_t n_labels = 4000;
  std::size_t k_max = 50;
  double unit_hz = 1e5;
  std::vector<std::size_t> hidden{200, 100, 100, 50};
};

struct TrainSection {
  trainer::TrainConfig penn{};
  trainer::DatasetSpec data{};
  std::size_t n_mc_eval = 5000;
  double m_penn_eps_train = 3e-6;
  double fnn_eps_train = 2e-6;
  std::size_t fnn_k_max = 50;
  std::size_t fnn_hidden = 300;
  std::size_t fnn_batch = 100;
  nn::LrSchedule fnn_lr{0.001, 0.001};
  std::vector<std::pair<std::size_t, std::size_t>> fnn_train{{50, 300}};  ///< trained at K_max
};

struct TheorySection {
  std::size_t k1 = 1024;
  std::size_t k2 = 4096;
  std::size_t trials = 2000;
  std::size_t decomposition_trials = 2000;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  urllc::UrllcConfig system{};
  TrainSection train{};
  BvSection bv{};
  interference::CurveOptions wmmse{};
  TheorySection theory{};
  std::string out_dir = "out";
};

namespace detail {

inline json pairs_to_json(const std::vector<std::pair<std::size_t, std::size_t>>& v) {
  json a = json::array();
  for (const auto& [k, n] : v) a.push_back({{"K", k}, {"count", n}});
  return a;
}

inline std::vector<std::pair<std::size_t, std::size_t>> pairs_from_json(const json& a, const std::string& where) {
  if (!a.is_array()) throw InputError("config: " + where + " must be a list of {K, count}");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : a) {
    if (!e.is_object() || e.size() != 2 || !e.contains("K") || !e.contains("count"))
      throw InputError("config: " + where + " entries must be {\"K\": .., \"count\": ..}");
    out.emplace_back(e.at("K").get<std::size_t>(), e.at("count").get<std::size_t>());
  }
  return out;
}

inline json lr_to_json(const nn::LrSchedule& s) { return {{"base", s.base}, {"decay", s.decay}}; }
inline nn::LrSchedule lr_from_json(const json& j) { return {j.at("base").get<double>(), j.at("decay").get<double>()}; }

/// Kind of a JSON value for override type checking.
inline int kind(const json& j) {
  if (j.is_number()) return 0;
  if (j.is_string()) return 1;
  if (j.is_boolean()) return 2;
  if (j.is_array()) return 3;
  if (j.is_object()) return 4;
  return 5;
}

inline void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw InputError("config: " + (path.empty() ? "top level" : path) + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string p = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw InputError("config: unknown key '" + p + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), p);
    } else {
      if (kind(slot) != kind(it.value())) throw InputError("config: wrong value type for '" + p + "'");
      slot = it.value();
    }
  }
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  const auto& s = c.system;
  const auto& t = c.train;
  const auto& b = c.bv;
  const auto& w = c.wmmse;
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["system"] = {{"cell_radius_m", s.cell_radius_m},
                 {"d_min_m", s.d_min_m},
                 {"pathloss_a0_db", s.pathloss_a0_db},
                 {"pathloss_slope", s.pathloss_slope},
                 {"p_max_dbm", s.p_max_dbm},
                 {"n_antennas", s.n_antennas},
                 {"n0_dbm_per_hz", s.n0_dbm_per_hz},
                 {"eps_max", s.eps_max},
                 {"eps_train", s.eps_train},
                 {"d_max_ms", s.d_max_ms},
                 {"d_queue_ms", s.d_queue_ms},
                 {"tau_ms", s.tau_ms},
                 {"frame_ms", s.frame_ms},
                 {"packet_bits", s.packet_bits},
                 {"arrival_rate", s.arrival_rate},
                 {"theta_delay", s.theta_delay == urllc::ThetaDelay::d_max ? "d_max" : "d_queue"}};
  j["train"] = {{"epochs", t.penn.epochs},
                {"batch", t.penn.batch},
                {"lr", detail::lr_to_json(t.penn.lr)},
                {"lr_index", trainer::to_string(t.penn.lr_index)},
                {"hidden_width", t.penn.hidden_width},
                {"bandwidth_unit_hz", t.penn.bandwidth_unit_hz},
                {"n_mc_validation", t.penn.n_mc_validation},
                {"validation_checks", t.penn.validation_checks},
                {"bandwidth_prior", t.penn.bandwidth_prior},
                {"zero_cross_init", t.penn.zero_cross_init},
                {"train_sets", detail::pairs_to_json(t.data.train)},
                {"validation_sets", detail::pairs_to_json(t.data.validation)},
                {"test_sets", detail::pairs_to_json(t.data.test)},
                {"n_mc_eval", t.n_mc_eval},
                {"m_penn_eps_train", t.m_penn_eps_train},
                {"fnn_eps_train", t.fnn_eps_train},
                {"fnn_k_max", t.fnn_k_max},
                {"fnn_hidden", t.fnn_hidden},
                {"fnn_batch", t.fnn_batch},
                {"fnn_lr", detail::lr_to_json(t.fnn_lr)},
                {"fnn_train_sets", detail::pairs_to_json(t.fnn_train)}};
  j["bv"] = {{"n_labels", b.n_labels},
             {"k_max", b.k_max},
             {"unit_hz", b.unit_hz},
             {"hidden", b.hidden},
             {"crn_draws", b.labels.crn_draws},
             {"crn_seed", b.labels.crn_seed},
             {"tol_fraction", b.labels.tol_fraction},
             {"epochs", b.fit.epochs},
             {"batch", b.fit.batch},
             {"lr", detail::lr_to_json(b.fit.lr)},
             {"validation_fraction", b.fit.validation_fraction}};
  j["wmmse"] = {{"k_list", w.k_list},
                {"realizations", w.realizations},
                {"half_width", w.half_width},
                {"g_grid", w.g_grid},
                {"p_max", w.p_max},
                {"sigma0", w.sigma0},
                {"max_iters", w.wmmse.max_iters},
                {"tol", w.wmmse.tol}};
  j["theory"] = {{"k1", c.theory.k1},
                 {"k2", c.theory.k2},
                 {"trials", c.theory.trials},
                 {"decomposition_trials", c.theory.decomposition_trials}};
  return j;
}

/// `j` must already contain every key (see load()).
inline ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.out_dir = j.at("out_dir").get<std::string>();
    const json& s = j.at("system");
    auto& u = c.system;
    u.cell_radius_m = s.at("cell_radius_m").get<double>();
    u.d_min_m = s.at("d_min_m").get<double>();
    u.pathloss_a0_db = s.at("pathloss_a0_db").get<double>();
    u.pathloss_slope = s.at("pathloss_slope").get<double>();
    u.p_max_dbm = s.at("p_max_dbm").get<double>();
    u.n_antennas = s.at("n_antennas").get<int>();
    u.n0_dbm_per_hz = s.at("n0_dbm_per_hz").get<double>();
    u.eps_max = s.at("eps_max").get<double>();
    u.eps_train = s.at("eps_train").get<double>();
    u.d_max_ms = s.at("d_max_ms").get<double>();
    u.d_queue_ms = s.at("d_queue_ms").get<double>();
    u.tau_ms = s.at("tau_ms").get<double>();
    u.frame_ms = s.at("frame_ms").get<double>();
    u.packet_bits = s.at("packet_bits").get<double>();
    u.arrival_rate = s.at("arrival_rate").get<double>();
    const auto td = s.at("theta_delay").get<std::string>();
    if (td == "d_max") u.theta_delay = urllc::ThetaDelay::d_max;
    else if (td == "d_queue") u.theta_delay = urllc::ThetaDelay::d_queue;
    else throw InputError("config: system.theta_delay must be d_max or d_queue");

    const json& t = j.at("train");
    auto& tr = c.train;
    tr.penn.epochs = t.at("epochs").get<std::size_t>();
    tr.penn.batch = t.at("batch").get<std::size_t>();
    tr.penn.lr = detail::lr_from_json(t.at("lr"));
    tr.penn.lr_index = trainer::lr_index_from_string(t.at("lr_index").get<std::string>());
    tr.penn.hidden_width = t.at("hidden_width").get<std::size_t>();
    tr.penn.bandwidth_unit_hz = t.at("bandwidth_unit_hz").get<double>();
    tr.penn.n_mc_validation = t.at("n_mc_validation").get<std::size_t>();
    tr.penn.validation_checks = t.at("validation_checks").get<std::size_t>();
    tr.penn.bandwidth_prior = t.at("bandwidth_prior").get<bool>();
    tr.penn.zero_cross_init = t.at("zero_cross_init").get<bool>();
    tr.data.train = detail::pairs_from_json(t.at("train_sets"), "train.train_sets");
    tr.data.validation = detail::pairs_from_json(t.at("validation_sets"), "train.validation_sets");
    tr.data.test = detail::pairs_from_json(t.at("test_sets"), "train.test_sets");
    tr.n_mc_eval = t.at("n_mc_eval").get<std::size_t>();
    tr.m_penn_eps_train = t.at("m_penn_eps_train").get<double>();
    tr.fnn_eps_train = t.at("fnn_eps_train").get<double>();
    tr.fnn_k_max = t.at("fnn_k_max").get<std::size_t>();
    tr.fnn_hidden = t.at("fnn_hidden").get<std::size_t>();
    tr.fnn_batch = t.at("fnn_batch").get<std::size_t>();
    tr.fnn_lr = detail::lr_from_json(t.at("fnn_lr"));
    tr.fnn_train = detail::pairs_from_json(t.at("fnn_train_sets"), "train.fnn_train_sets");

    const json& b = j.at("bv");
    c.bv.n_labels = b.at("n_labels").get<std::size_t>();
    c.bv.k_max = b.at("k_max").get<std::size_t>();
    c.bv.unit_hz = b.at("unit_hz").get<double>();
    c.bv.hidden = b.at("hidden").get<std::vector<std::size_t>>();
    c.bv.labels.crn_draws = b.at("crn_draws").get<std::size_t>();
    c.bv.labels.crn_seed = b.at("crn_seed").get<std::uint64_t>();
    c.bv.labels.tol_fraction = b.at("tol_fraction").get<double>();
    c.bv.fit.epochs = b.at("epochs").get<std::size_t>();
    c.bv.fit.batch = b.at("batch").get<std::size_t>();
    c.bv.fit.lr = detail::lr_from_json(b.at("lr"));
    c.bv.fit.validation_fraction = b.at("validation_fraction").get<double>();

    const json& w = j.at("wmmse");
    c.wmmse.k_list = w.at("k_list").get<std::vector<std::size_t>>();
    c.wmmse.realizations = w.at("realizations").get<std::size_t>();
    c.wmmse.half_width = w.at("half_width").get<double>();
    c.wmmse.g_grid = w.at("g_grid").get<std::vector<double>>();
    c.wmmse.p_max = w.at("p_max").get<double>();
    c.wmmse.sigma0 = w.at("sigma0").get<double>();
    c.wmmse.wmmse.max_iters = w.at("max_iters").get<int>();
    c.wmmse.wmmse.tol = w.at("tol").get<double>();

    const json& th = j.at("theory");
    c.theory.k1 = th.at("k1").get<std::size_t>();
    c.theory.k2 = th.at("k2").get<std::size_t>();
    c.theory.trials = th.at("trials").get<std::size_t>();
    c.theory.decomposition_trials = th.at("decomposition_trials").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

inline void validate(const ExperimentConfig& c) {
  c.system.validate();
  const auto& t = c.train;
  if (t.penn.epochs < 1 || t.penn.batch < 1) throw InputError("config: train.epochs and train.batch must be >= 1");
  if (t.penn.hidden_width < 1) throw InputError("config: train.hidden_width must be >= 1");
  if (!(t.penn.bandwidth_unit_hz > 0.0)) throw InputError("config: train.bandwidth_unit_hz must be positive");
  if (t.data.train.empty() || t.data.test.empty()) throw InputError("config: train and test sets must be non-empty");
  std::size_t n_train = 0;
  for (const auto& [k, n] : t.data.train) {
    if (k < 1 || n < 1) throw InputError("config: train_sets entries need K >= 1 and count >= 1");
    n_train += n;
  }
  if (t.penn.batch > n_train) throw InputError("config: train.batch exceeds the training set size");
  std::size_t n_fnn = 0;
  for (const auto& [k, n] : t.fnn_train) {
    if (k < 1 || n < 1 || k > t.fnn_k_max) throw InputError("config: fnn_train_sets need 1 <= K <= fnn_k_max");
    n_fnn += n;
  }
  if (t.fnn_batch < 1 || t.fnn_batch > n_fnn) throw InputError("config: train.fnn_batch must be in [1, |fnn train|]");
  for (const auto* set : {&t.data.validation, &t.data.test})
    for (const auto& [k, n] : *set)
      if (k < 1 || n < 1) throw InputError("config: dataset entries need K >= 1 and count >= 1");
  for (double e : {t.m_penn_eps_train, t.fnn_eps_train})
    if (!(e > 0.0 && e <= c.system.eps_max)) throw InputError("config: baseline eps_train must be in (0, eps_max]");
  if (t.n_mc_eval < 1) throw InputError("config: train.n_mc_eval must be >= 1");
  if (c.bv.k_max < 1 || c.bv.n_labels < 2) throw InputError("config: bv.k_max >= 1 and bv.n_labels >= 2 required");
  if (c.bv.hidden.empty()) throw InputError("config: bv.hidden must list at least one layer");
  if (c.wmmse.realizations < 1 || c.wmmse.k_list.empty()) throw InputError("config: wmmse needs K values and realizations");
  if (c.theory.k1 < 64 || c.theory.k2 < 64) throw InputError("config: theory.k1 and theory.k2 must be >= 64");
}

/// Defaults, then the user's file, then dotted overrides.
inline ExperimentConfig load(const json* user, const std::vector<std::string>& overrides) {
  json merged = to_json(ExperimentConfig{});
  if (user) detail::merge_checked(merged, *user, "");
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // bare strings such as lr_index=epoch
    }
    json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
      parts.push_back(rest.substr(0, pos));
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    detail::merge_checked(merged, patch, "");
  }
  ExperimentConfig c = from_json(merged);
  validate(c);
  return c;
}

inline ExperimentConfig load_file(const std::string& path, const std::vector<std::string>& overrides) {
  json user;
  try {
    user = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  return load(&user, overrides);
}

/// Canonical text (sorted keys) used for hashing and manifests.
inline std::string canonical(const ExperimentConfig& c) { return to_json(c).dump(); }

inline std::string config_hash(const ExperimentConfig& c) { return io::hex64(io::fnv1a64(canonical(c))); }

}  // namespace pealloc::config
