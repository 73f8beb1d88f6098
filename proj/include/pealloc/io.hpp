#pragma once

// Text persistence: model files (exact round trip via %.17g), CSV tables
// with a "# seed=... config_hash=..." comment line, the B^v label cache and
// the gains files read by the closed-form command.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pealloc/common.hpp"
#include "pealloc/nn_core.hpp"
#include "pealloc/penn.hpp"
#include "pealloc/pretrain.hpp"
#include "pealloc/trainer.hpp"

namespace pealloc::io {

using nn::DenseParam;
using nn::Mat;
using nn::Vec;

inline std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Fixed-precision rendering used in every CSV.
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
  if (!out) throw InputError("write failed: " + p.string());
}

// ---------------------------------------------------------------- CSV

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
};

class CsvTable {
 public:
  CsvTable(Provenance prov, std::vector<std::string> columns) : prov_(std::move(prov)), columns_(std::move(columns)) {}

  void add(std::vector<std::string> row) {
    if (row.size() != columns_.size())
      throw ContractViolation("csv: row has " + std::to_string(row.size()) + " fields, expected " +
                              std::to_string(columns_.size()));
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out = "# seed=" + std::to_string(prov_.seed) + " config_hash=" + prov_.config_hash + "\n";
    out += join(columns_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  void save(const std::filesystem::path& p) const { write_file(p, str()); }

 private:
  static std::string join(const std::vector<std::string>& f) {
    std::string line;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) line += ',';
      line += f[i];
    }
    return line + "\n";
  }

  Provenance prov_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Non-comment, non-blank lines split on commas.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string f;
    std::istringstream ls(line);
    while (std::getline(ls, f, ',')) {
      const auto b = f.find_first_not_of(" \t");
      const auto e = f.find_last_not_of(" \t");
      fields.push_back(b == std::string::npos ? "" : f.substr(b, e - b + 1));
    }
    if (line.back() == ',') fields.push_back("");
    out.push_back(std::move(fields));
  }
  return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
  if (s.empty()) throw InputError(where + ": empty field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw InputError(where + ": not a number: '" + s + "'");
  return v;
}

inline bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

/// One gain per row (single column, optional header line "g").
inline Vec read_gains_csv(const std::filesystem::path& p) {
  const auto rows = parse_csv(read_file(p));
  std::vector<double> g;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = p.string() + " row " + std::to_string(i + 1);
    if (r.size() != 1) throw InputError(where + ": expected exactly one column");
    if (i == 0 && !is_number(r[0])) continue;  // header
    g.push_back(parse_number(r[0], where));
  }
  if (g.empty()) throw InputError(p.string() + ": no gains");
  return Eigen::Map<const Vec>(g.data(), static_cast<Eigen::Index>(g.size()));
}

inline CsvTable label_table(const std::vector<pretrain::BvSample>& labels, const Provenance& prov) {
  CsvTable t(prov, {"alpha", "K", "B_v_star"});
  for (const auto& s : labels) t.add({exact(s.alpha), std::to_string(s.k), exact(s.label_hz)});
  return t;
}

inline std::vector<pretrain::BvSample> read_labels(const std::filesystem::path& p) {
  const auto rows = parse_csv(read_file(p));
  if (rows.empty() || rows[0] != std::vector<std::string>{"alpha", "K", "B_v_star"})
    throw InputError(p.string() + ": expected header alpha,K,B_v_star");
  std::vector<pretrain::BvSample> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::string where = p.string() + " row " + std::to_string(i + 1);
    if (rows[i].size() != 3) throw InputError(where + ": expected 3 fields");
    const double k = parse_number(rows[i][1], where);
    if (k < 1 || k != std::floor(k)) throw InputError(where + ": K must be a positive integer");
    out.push_back({parse_number(rows[i][0], where), static_cast<std::size_t>(k), parse_number(rows[i][2], where)});
  }
  return out;
}

// ---------------------------------------------------------------- models

class TokenReader {
 public:
  TokenReader(const std::string& text, std::string source) : in_(text), source_(std::move(source)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw InputError(source_ + ": unexpected end of model file");
    return w;
  }
  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw InputError(source_ + ": expected '" + w + "', found '" + got + "'");
  }
  double number() { return parse_number(word(), source_); }
  std::size_t count() {
    const double v = number();
    if (v < 0 || v != std::floor(v) || v > 1e9) throw InputError(source_ + ": bad count");
    return static_cast<std::size_t>(v);
  }
  bool done() {
    std::string w;
    return !(in_ >> w);
  }

 private:
  std::istringstream in_;
  std::string source_;
};

inline void write_dense(std::ostream& os, const DenseParam& p) {
  os << "dense " << p.weight.rows() << ' ' << p.weight.cols() << '\n';
  for (Eigen::Index r = 0; r < p.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.weight.cols(); ++c) os << (c ? " " : "") << exact(p.weight(r, c));
    os << '\n';
  }
  for (Eigen::Index r = 0; r < p.bias.size(); ++r) os << (r ? " " : "") << exact(p.bias(r));
  os << '\n';
}

inline DenseParam read_dense(TokenReader& in) {
  in.expect("dense");
  const auto rows = static_cast<Eigen::Index>(in.count());
  const auto cols = static_cast<Eigen::Index>(in.count());
  DenseParam p(Mat(rows, cols), Vec(rows));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) p.weight(r, c) = in.number();
  for (Eigen::Index r = 0; r < rows; ++r) p.bias(r) = in.number();
  return p;
}

inline void write_penn(std::ostream& os, const penn::PennModel& m) {
  os << "penn " << m.num_layers() << " head " << penn::to_string(m.head()) << " p_max " << exact(m.p_max()) << '\n';
  for (const auto& layer : m.layers()) {
    os << "layer " << nn::to_string(layer.act) << ' ' << penn::to_string(layer.agg) << '\n';
    write_dense(os, layer.self_map);
    write_dense(os, layer.cross_map);
  }
}

inline penn::PennModel read_penn(TokenReader& in) {
  in.expect("penn");
  const std::size_t n = in.count();
  in.expect("head");
  const penn::Head head = penn::head_from_string(in.word());
  in.expect("p_max");
  const double p_max = in.number();
  std::vector<penn::PennLayer> layers;
  for (std::size_t l = 0; l < n; ++l) {
    in.expect("layer");
    const auto act = nn::activation_from_string(in.word());
    const auto agg = penn::aggregator_from_string(in.word());
    DenseParam self = read_dense(in);
    DenseParam cross = read_dense(in);
    layers.push_back({std::move(self), std::move(cross), act, agg});
  }
  return penn::PennModel(std::move(layers), head, p_max);
}

inline void write_mlp(std::ostream& os, const nn::Mlp& m) {
  os << "mlp " << m.params().size() << " hidden " << nn::to_string(m.hidden_activation()) << " output "
     << nn::to_string(m.output_activation()) << '\n';
  for (const auto& p : m.params()) write_dense(os, p);
}

inline nn::Mlp read_mlp(TokenReader& in) {
  in.expect("mlp");
  const std::size_t n = in.count();
  in.expect("hidden");
  const auto hidden = nn::activation_from_string(in.word());
  in.expect("output");
  const auto output = nn::activation_from_string(in.word());
  std::vector<DenseParam> layers;
  for (std::size_t l = 0; l < n; ++l) layers.push_back(read_dense(in));
  return nn::Mlp(std::move(layers), hidden, output);
}

inline constexpr int kFormatVersion = 1;

inline std::string serialize(const penn::PennModel& m) {
  std::ostringstream os;
  os << "pealloc-penn-model " << kFormatVersion << '\n';
  write_penn(os, m);
  return os.str();
}

inline std::string serialize(const pretrain::BvNet& net) {
  std::ostringstream os;
  os << "pealloc-bv-net " << kFormatVersion << "\nk_max " << net.k_max() << " unit_hz " << exact(net.unit_hz())
     << '\n';
  write_mlp(os, net.mlp());
  return os.str();
}

inline std::string serialize(const trainer::PennPolicy& p) {
  std::ostringstream os;
  os << "pealloc-penn-policy " << kFormatVersion << '\n';
  write_penn(os, p.power_net());
  write_penn(os, p.bandwidth_net());
  write_penn(os, p.multiplier_net());
  return os.str();
}

inline std::string serialize(const trainer::PaddedFnnPolicy& p) {
  std::ostringstream os;
  os << "pealloc-fnn-policy " << kFormatVersion << "\np_max " << exact(p.p_max()) << '\n';
  write_mlp(os, p.power_net());
  write_mlp(os, p.bandwidth_net());
  write_mlp(os, p.multiplier_net());
  return os.str();
}

inline void read_header(TokenReader& in, const std::string& magic, const std::string& source) {
  const std::string got = in.word();
  if (got != magic) throw InputError(source + ": expected a " + magic + " file, found '" + got + "'");
  const std::size_t v = in.count();
  if (v != kFormatVersion) throw InputError(source + ": unsupported format version " + std::to_string(v));
}

inline void expect_end(TokenReader& in, const std::string& source) {
  if (!in.done()) throw InputError(source + ": trailing data after model");
}

inline penn::PennModel parse_penn_model(const std::string& text, const std::string& source = "model") {
  TokenReader in(text, source);
  read_header(in, "pealloc-penn-model", source);
  auto m = read_penn(in);
  expect_end(in, source);
  return m;
}

inline pretrain::BvNet parse_bv_net(const std::string& text, const std::string& source = "model") {
  TokenReader in(text, source);
  read_header(in, "pealloc-bv-net", source);
  in.expect("k_max");
  const std::size_t k_max = in.count();
  in.expect("unit_hz");
  const double unit = in.number();
  auto mlp = read_mlp(in);
  expect_end(in, source);
  if (mlp.in_width() != 2 || mlp.out_width() != 1) throw InputError(source + ": B^v net must map 2 -> 1");
  return pretrain::BvNet(std::move(mlp), k_max, unit);
}

inline trainer::PennPolicy parse_penn_policy(const std::string& text, const std::string& source = "model") {
  TokenReader in(text, source);
  read_header(in, "pealloc-penn-policy", source);
  auto p = read_penn(in);
  auto b = read_penn(in);
  auto l = read_penn(in);
  expect_end(in, source);
  return trainer::PennPolicy(std::move(p), std::move(b), std::move(l));
}

inline trainer::PaddedFnnPolicy parse_fnn_policy(const std::string& text, const std::string& source = "model") {
  TokenReader in(text, source);
  read_header(in, "pealloc-fnn-policy", source);
  in.expect("p_max");
  const double p_max = in.number();
  auto p = read_mlp(in);
  auto b = read_mlp(in);
  auto l = read_mlp(in);
  expect_end(in, source);
  return trainer::PaddedFnnPolicy(std::move(p), std::move(b), std::move(l), p_max);
}

}  // namespace pealloc::io
