#include "autonomy/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "autonomy/cartan.hpp"
#include "autonomy/diffusion.hpp"
#include "autonomy/heterodyne.hpp"
#include "autonomy/quadrature.hpp"
#include "autonomy/records.hpp"

namespace autonomy::cli {

using nlohmann::json;

namespace {

// Stream ids above this offset feed the ostensible (state-independent) samples.
constexpr std::uint64_t kOstensibleStreams = 1ULL << 40;
// Stream ids above this offset feed the random identity sweeps and cooling draws.
constexpr std::uint64_t kAuxiliaryStreams = 1ULL << 41;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw UsageError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

StateSpec default_state(const std::string& experiment) {
  StateSpec s;
  if (experiment == "heterodyne-ensemble") {
    s.kind = StateSpec::Kind::Coherent;
    s.alpha = 1.0;
  } else {
    s.kind = StateSpec::Kind::Fock;
    s.n = experiment == "photodetect-ensemble" ? 5 : 0;
  }
  return s;
}

double tolerance_scale(std::size_t n, double reference) {
  return std::max(1.0, std::sqrt(reference / static_cast<double>(n)));
}

/// Born-rule weight Tr(K^dag K rho) through the pure components of rho.
class BornWeight {
 public:
  BornWeight(const DensityOperator& rho, const InstrumentParams& p, double horizon)
      : mix_(decompose(rho)), p_(p), horizon_(horizon) {}

  double operator()(Complex zeta) const {
    double w = 0.0;
    for (std::size_t i = 0; i < mix_.states.size(); ++i) {
      w += mix_.probabilities[i] * kraus_weight_het(zeta, mix_.states[i], horizon_, p_);
    }
    return w;
  }

 private:
  PureMixture mix_;
  InstrumentParams p_;
  double horizon_;
};

}  // namespace

// ---------------------------------------------------------------- config

ExperimentConfig parse_config(const json& j, const std::string& experiment) {
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), experiment) == kinds.end()) {
    throw UsageError("unknown experiment '" + experiment + "'");
  }
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  const json root = j.is_null() ? json::object() : j;
  try {
    reject_unknown(root,
                   {"experiment", "kappa", "dt", "horizon", "dim", "subblock", "state", "trajectories", "seed", "ode",
                    "grid", "quadrature", "histogram", "sweep", "cooling_samples", "series"},
                   "config");
    if (root.contains("experiment") && root.at("experiment").get<std::string>() != experiment) {
      throw UsageError("config names experiment '" + root.at("experiment").get<std::string>() +
                       "' but the command is '" + experiment + "'");
    }
    read(root, "kappa", cfg.params.kappa);
    read(root, "dt", cfg.params.dt);
    read(root, "horizon", cfg.params.horizon);
    read(root, "dim", cfg.params.dim);
    read(root, "subblock", cfg.subblock);
    read(root, "trajectories", cfg.trajectories);
    read(root, "seed", cfg.seed);
    read(root, "sweep", cfg.sweep);
    read(root, "cooling_samples", cfg.cooling_samples);
    if (root.contains("series")) cfg.series = root.at("series").get<std::vector<std::string>>();
    if (root.contains("state")) {
      const json& s = root.at("state");
      reject_unknown(s, {"kind", "n", "re", "im", "path"}, "state");
      StateSpec spec;
      const std::string kind = s.at("kind").get<std::string>();
      if (kind == "fock") {
        spec.kind = StateSpec::Kind::Fock;
        read(s, "n", spec.n);
      } else if (kind == "coherent") {
        spec.kind = StateSpec::Kind::Coherent;
        double re = 0.0, im = 0.0;
        read(s, "re", re);
        read(s, "im", im);
        spec.alpha = {re, im};
      } else if (kind == "density") {
        spec.kind = StateSpec::Kind::DensityFile;
        spec.path = s.at("path").get<std::string>();
      } else {
        throw UsageError("state.kind must be fock, coherent or density");
      }
      cfg.state = spec;
    }
    if (root.contains("ode")) {
      const json& o = root.at("ode");
      reject_unknown(o, {"steps", "n_max"}, "ode");
      read(o, "steps", cfg.ode_steps);
      read(o, "n_max", cfg.n_max);
    }
    if (root.contains("grid")) {
      const json& g = root.at("grid");
      reject_unknown(g, {"spacing", "extent", "steps", "initial_variance"}, "grid");
      read(g, "spacing", cfg.grid.spacing);
      read(g, "extent", cfg.grid.extent);
      read(g, "steps", cfg.grid.steps);
      read(g, "initial_variance", cfg.grid.initial_variance);
    }
    if (root.contains("quadrature")) {
      const json& q = root.at("quadrature");
      reject_unknown(q, {"order"}, "quadrature");
      read(q, "order", cfg.quadrature_order);
    }
    if (root.contains("histogram")) {
      const json& h = root.at("histogram");
      reject_unknown(h, {"bins"}, "histogram");
      read(h, "bins", cfg.histogram_bins);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }

  try {
    cfg.params.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (!(cfg.params.kappa > 0.0)) throw UsageError("config: kappa must be > 0");
  if (cfg.subblock < 1 || cfg.subblock > cfg.params.dim) throw UsageError("config: subblock must lie in [1, dim]");
  if (!cfg.state) cfg.state = default_state(experiment);
  if (cfg.state->kind == StateSpec::Kind::Fock && (cfg.state->n < 0 || cfg.state->n >= cfg.params.dim)) {
    throw UsageError("config: state.n must lie in [0, dim)");
  }
  if (cfg.state->kind == StateSpec::Kind::Coherent && std::norm(cfg.state->alpha) > 0.25 * cfg.params.dim) {
    throw UsageError("config: coherent amplitude too large for the truncation");
  }
  if (cfg.trajectories > 100'000'000) throw UsageError("config: trajectories must not exceed 1e8");
  if (cfg.ode_steps < 100) throw UsageError("config: ode.steps must be >= 100");
  if (cfg.n_max < 30) throw UsageError("config: ode.n_max must be >= 30");
  if (!(cfg.grid.spacing > 0.0) || cfg.grid.spacing > 0.5) throw UsageError("config: grid.spacing must lie in (0, 0.5]");
  if (!(cfg.grid.extent >= 5.0)) throw UsageError("config: grid.extent must be >= 5");
  if (cfg.grid.steps < 1) throw UsageError("config: grid.steps must be >= 1");
  if (!(cfg.grid.initial_variance > 0.0)) throw UsageError("config: grid.initial_variance must be > 0");
  if (cfg.quadrature_order < 4 || cfg.quadrature_order > 128) throw UsageError("config: quadrature.order must lie in [4, 128]");
  if (cfg.histogram_bins < 2 || cfg.histogram_bins > 32) throw UsageError("config: histogram.bins must lie in [2, 32]");
  if (cfg.sweep.size() < 2) throw UsageError("config: sweep needs at least two kappa*T values");
  for (double v : cfg.sweep) {
    if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("config: sweep values must be positive");
  }
  if (!std::is_sorted(cfg.sweep.begin(), cfg.sweep.end())) throw UsageError("config: sweep must be increasing");
  if (cfg.cooling_samples < 1) throw UsageError("config: cooling_samples must be >= 1");
  if (cfg.series) {
    const auto& names = plot_series_names();
    for (const auto& s : *cfg.series) {
      if (std::find(names.begin(), names.end(), s) == names.end()) throw UsageError("config: unknown series '" + s + "'");
    }
  }
  return cfg;
}

json canonical_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["kappa"] = cfg.params.kappa;
  j["dt"] = cfg.params.dt;
  j["horizon"] = cfg.params.horizon;
  j["dim"] = cfg.params.dim;
  j["subblock"] = cfg.subblock;
  j["trajectories"] = cfg.trajectories;
  j["seed"] = cfg.seed;
  j["ode"] = {{"steps", cfg.ode_steps}, {"n_max", cfg.n_max}};
  j["grid"] = {{"spacing", cfg.grid.spacing},
               {"extent", cfg.grid.extent},
               {"steps", cfg.grid.steps},
               {"initial_variance", cfg.grid.initial_variance}};
  j["quadrature"] = {{"order", cfg.quadrature_order}};
  j["histogram"] = {{"bins", cfg.histogram_bins}};
  j["sweep"] = cfg.sweep;
  j["cooling_samples"] = cfg.cooling_samples;
  if (cfg.series) j["series"] = *cfg.series;
  const StateSpec s = cfg.state.value_or(default_state(cfg.experiment));
  switch (s.kind) {
    case StateSpec::Kind::Fock:
      j["state"] = {{"kind", "fock"}, {"n", s.n}};
      break;
    case StateSpec::Kind::Coherent:
      j["state"] = {{"kind", "coherent"}, {"re", s.alpha.real()}, {"im", s.alpha.imag()}};
      break;
    case StateSpec::Kind::DensityFile:
      j["state"] = {{"kind", "density"}, {"path", s.path}, {"sha256", sha256_hex(read_file(s.path))}};
      break;
  }
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_json(cfg).dump()); }

DensityOperator resolve_state(const ExperimentConfig& cfg) {
  const int d = cfg.params.dim;
  const StateSpec s = cfg.state.value_or(default_state(cfg.experiment));
  switch (s.kind) {
    case StateSpec::Kind::Fock:
      return DensityOperator::pure(StateVector::number(d, s.n));
    case StateSpec::Kind::Coherent:
      return DensityOperator::pure(coherent_state(d, s.alpha).normalized());
    case StateSpec::Kind::DensityFile:
      break;
  }
  json j;
  try {
    j = json::parse(read_file(s.path));
    reject_unknown(j, {"real", "imag"}, "density file");
    const auto re = j.at("real").get<std::vector<std::vector<double>>>();
    std::vector<std::vector<double>> im;
    if (j.contains("imag")) im = j.at("imag").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(re.size()) != d || (!im.empty() && static_cast<int>(im.size()) != d)) {
      throw UsageError("density file: matrix must be dim x dim");
    }
    Matrix m(d, d);
    for (int r = 0; r < d; ++r) {
      if (static_cast<int>(re[r].size()) != d || (!im.empty() && static_cast<int>(im[r].size()) != d)) {
        throw UsageError("density file: matrix must be dim x dim");
      }
      for (int c = 0; c < d; ++c) m(r, c) = Complex(re[r][c], im.empty() ? 0.0 : im[r][c]);
    }
    return DensityOperator(std::move(m));
  } catch (const json::exception& e) {
    throw UsageError(std::string("density file: ") + e.what());
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string("density file: ") + e.what());
  }
}

// ---------------------------------------------------------------- report

bool VerificationReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void VerificationReport::upper(std::string name, double measured, double threshold) {
  checks.push_back({std::move(name), measured, threshold, measured <= threshold});
}

void VerificationReport::lower(std::string name, double measured, double threshold) {
  checks.push_back({std::move(name), measured, threshold, measured >= threshold});
}

json VerificationReport::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["pass"] = pass();
  json list = json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.name},
                    {"measured", std::isfinite(c.measured) ? json(c.measured) : json(format_number(c.measured))},
                    {"threshold", c.threshold},
                    {"pass", c.pass}});
  }
  j["checks"] = std::move(list);
  j["provenance"] = {{"seed", seed}, {"version", version}, {"config_hash", config_hash}};
  j["outputs"] = outputs;
  return j;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

void Table::write(const std::filesystem::path& path) const {
  std::string text;
  auto line = [&text](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text += ',';
      text += csv_field(fields[i]);
    }
    text += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  write_text(path, text);
}

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag) {
    if (*flag == 0) throw UsageError("--threads must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv("INSTRUMENT_AUTONOMY_THREADS")) {
    unsigned v = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v == 0) {
      throw UsageError("INSTRUMENT_AUTONOMY_THREADS must be a positive integer");
    }
    return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- experiments

namespace {

using Row = std::vector<std::string>;

struct Outcome {
  Table table;
  std::vector<std::string> default_series;
};

std::string num(double v) { return format_number(v); }

Outcome photodetect_ensemble(const ExperimentConfig& cfg, VerificationReport& rep) {
  const InstrumentParams& p = cfg.params;
  const double horizon = p.horizon;
  const DensityOperator rho = resolve_state(cfg);
  const std::vector<double> born = born_pmf(rho, horizon, p);
  const PoissonKOD kod = kod_poisson(horizon, p.kappa);
  const PoissonKOD evolved = evolve_kod_poisson(horizon, p.kappa, cfg.n_max, cfg.ode_steps);

  double born_mass = 0.0;
  for (double v : born) born_mass += v;
  rep.upper("born_normalization", std::abs(born_mass - 1.0), 1e-6);
  double kod_err = 0.0;
  for (int n = 0; n <= cfg.n_max; ++n) kod_err = std::max(kod_err, std::abs(evolved.weights[n] - kod.probability(n)));
  rep.upper("kod_evolution_max_error", kod_err, 1e-8);

  const std::size_t count = cfg.trajectories;
  std::vector<int> jumps(count);
  std::vector<int> ostensible(count);
  const PhotodetectorSampler sampler(rho, p);
  parallel_for_index(count, cfg.threads, [&](std::size_t i) {
    SeededStream rng(cfg.seed, i);
    jumps[i] = sampler.sample(rng).count();
    SeededStream ost(cfg.seed, kOstensibleStreams + i);
    ostensible[i] = sample_ostensible(horizon, p.kappa, ost);
  });

  std::vector<double> weight(static_cast<std::size_t>(p.dim));
  for (int n = 0; n < p.dim; ++n) weight[n] = ostensible_weight(n, rho, horizon, p);

  Histogram traj = Histogram::integer_bins(0, p.dim - 1);
  Histogram ost = Histogram::integer_bins(0, p.dim - 1);
  for (std::size_t i = 0; i < count; ++i) {
    traj.add(jumps[i]);
    if (ostensible[i] < p.dim) ost.add(ostensible[i], weight[ostensible[i]]);
  }

  std::vector<double> traj_pmf, ost_pmf;
  if (count > 0) {
    traj_pmf = traj.normalized();
    if (ost.total() > 0.0) ost_pmf = ost.normalized();
    const double scale = tolerance_scale(count, 1e5);
    rep.upper("trajectory_tv_vs_born", tv_distance(traj_pmf, born), 0.01 * scale);
    if (!ost_pmf.empty()) {
      rep.upper("ostensible_weighted_tv_vs_born", tv_distance(ost_pmf, born), 0.02 * scale);
    } else {
      rep.upper("ostensible_weighted_tv_vs_born", 1.0, 0.02 * scale);
    }
    rep.lower("trajectory_chi_square_p", chi_square_gof(traj, born), 1e-3);
  }

  Outcome out;
  out.table.header = {"n", "kod_analytic", "kod_evolved", "born", "trajectory_empirical", "ostensible_weighted",
                      "config_hash"};
  for (int n = 0; n < p.dim; ++n) {
    out.table.rows.push_back({std::to_string(n), num(kod.probability(n)),
                              n <= cfg.n_max ? num(evolved.weights[n]) : "", num(born[n]),
                              traj_pmf.empty() ? "" : num(traj_pmf[n]), ost_pmf.empty() ? "" : num(ost_pmf[n]),
                              rep.config_hash});
  }
  out.default_series = {"lambda", "poisson_vacuum_weight"};
  return out;
}

struct PdfMoments {
  double mass = 0.0;
  Complex mean{};
  double var_re = 0.0;
  double var_im = 0.0;
};

PdfMoments born_moments(const BornWeight& weight, double sigma, int order) {
  const QuadratureRule rule = gauss_hermite(order);
  const double s = std::sqrt(sigma);
  PdfMoments m;
  double m2_re = 0.0, m2_im = 0.0;
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      const Complex z(s * rule.nodes[i], s * rule.nodes[j]);
      const double w = rule.weights[i] * rule.weights[j] / std::numbers::pi * weight(z);
      m.mass += w;
      m.mean += w * z;
      m2_re += w * z.real() * z.real();
      m2_im += w * z.imag() * z.imag();
    }
  }
  m.var_re = m2_re - m.mean.real() * m.mean.real();
  m.var_im = m2_im - m.mean.imag() * m.mean.imag();
  return m;
}

Outcome heterodyne_ensemble(const ExperimentConfig& cfg, VerificationReport& rep) {
  const InstrumentParams& p = cfg.params;
  const double horizon = p.horizon;
  if (!(horizon > 0.0)) throw UsageError("heterodyne-ensemble needs horizon > 0");
  const double sigma = effective_covariance(horizon, p.kappa);
  const DensityOperator rho = resolve_state(cfg);
  const BornWeight weight(rho, p, horizon);

  const PdfMoments born = born_moments(weight, sigma, std::max(cfg.quadrature_order, 48));
  rep.upper("born_pdf_normalization", std::abs(born.mass - 1.0), 1e-6);
  const double born_cov = born.var_re + born.var_im;

  // 8x8 cells over mean +- 3 sd plus one outer cell.
  const int bins = cfg.histogram_bins;
  const double sd_re = std::sqrt(std::max(born.var_re, 1e-12));
  const double sd_im = std::sqrt(std::max(born.var_im, 1e-12));
  const double lo_re = born.mean.real() - 3.0 * sd_re, w_re = 6.0 * sd_re / bins;
  const double lo_im = born.mean.imag() - 3.0 * sd_im, w_im = 6.0 * sd_im / bins;
  auto cell_of = [&](Complex z) {
    const int i = static_cast<int>(std::floor((z.real() - lo_re) / w_re));
    const int j = static_cast<int>(std::floor((z.imag() - lo_im) / w_im));
    if (i < 0 || i >= bins || j < 0 || j >= bins) return bins * bins;
    return i * bins + j;
  };
  std::vector<double> cell_prob(static_cast<std::size_t>(bins) * bins + 1, 0.0);
  {
    const QuadratureRule gl = gauss_legendre(8);
    const GaussianKOD kod = kod_gaussian(horizon, p.kappa);
    std::vector<double> flat(cell_prob.size() - 1);
    parallel_for_index(flat.size(), cfg.threads, [&](std::size_t c) {
      const int i = static_cast<int>(c) / bins, j = static_cast<int>(c) % bins;
      double acc = 0.0;
      for (std::size_t a = 0; a < gl.nodes.size(); ++a) {
        for (std::size_t b = 0; b < gl.nodes.size(); ++b) {
          const Complex z(lo_re + w_re * (i + 0.5 + 0.5 * gl.nodes[a]), lo_im + w_im * (j + 0.5 + 0.5 * gl.nodes[b]));
          acc += gl.weights[a] * gl.weights[b] * kod.density(z) * weight(z);
        }
      }
      flat[c] = acc * 0.25 * w_re * w_im / std::numbers::pi;
    });
    double inside = 0.0;
    for (std::size_t c = 0; c < flat.size(); ++c) {
      cell_prob[c] = flat[c];
      inside += flat[c];
    }
    cell_prob.back() = std::max(0.0, born.mass - inside);
  }

  const std::size_t count = cfg.trajectories;
  std::vector<Complex> zeta(count);
  std::vector<Complex> ost(count);
  const HeterodyneSampler sampler(rho, p);
  parallel_for_index(count, cfg.threads, [&](std::size_t i) {
    SeededStream rng(cfg.seed, i);
    zeta[i] = record_functional(sampler.sample(rng), p.kappa);
    SeededStream o(cfg.seed, kOstensibleStreams + i);
    ost[i] = sample_het_ostensible(horizon, p.kappa, o);
  });
  std::vector<double> ost_w(count);
  parallel_for_index(count, cfg.threads, [&](std::size_t i) { ost_w[i] = weight(ost[i]); });

  Histogram traj_hist = Histogram::integer_bins(0, bins * bins);
  Histogram ost_hist = Histogram::integer_bins(0, bins * bins);
  std::vector<double> traj_freq, ost_freq;
  if (count > 0) {
    const double nn = static_cast<double>(count);
    Complex mean{};
    for (const auto& z : zeta) {
      mean += z;
      traj_hist.add(cell_of(z));
    }
    mean /= nn;
    double v_re = 0.0, v_im = 0.0;
    for (const auto& z : zeta) {
      v_re += std::pow(z.real() - mean.real(), 2);
      v_im += std::pow(z.imag() - mean.imag(), 2);
    }
    v_re /= std::max(1.0, nn - 1.0);
    v_im /= std::max(1.0, nn - 1.0);
    const double z_re = std::abs(mean.real() - born.mean.real()) / std::sqrt(std::max(born.var_re, 1e-300) / nn);
    const double z_im = std::abs(mean.imag() - born.mean.imag()) / std::sqrt(std::max(born.var_im, 1e-300) / nn);
    rep.upper("trajectory_mean_zscore", std::max(z_re, z_im), 3.0);
    rep.upper("trajectory_covariance_rel_error", std::abs(v_re + v_im - born_cov) / born_cov,
              0.03 * tolerance_scale(count, 1e4));
    rep.lower("trajectory_chi_square_p", chi_square_gof(traj_hist, cell_prob), 1e-3);
    traj_freq = traj_hist.normalized();

    double wsum = 0.0;
    Complex wmean{};
    for (std::size_t i = 0; i < count; ++i) {
      wsum += ost_w[i];
      wmean += ost_w[i] * ost[i];
      ost_hist.add(cell_of(ost[i]), ost_w[i]);
    }
    if (wsum > 0.0) {
      wmean /= wsum;
      double se_re = 0.0, se_im = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        se_re += std::pow(ost_w[i] * (ost[i].real() - wmean.real()), 2);
        se_im += std::pow(ost_w[i] * (ost[i].imag() - wmean.imag()), 2);
      }
      se_re = std::sqrt(se_re) / wsum;
      se_im = std::sqrt(se_im) / wsum;
      const double zr = se_re > 0.0 ? std::abs(wmean.real() - born.mean.real()) / se_re : 0.0;
      const double zi = se_im > 0.0 ? std::abs(wmean.imag() - born.mean.imag()) / se_im : 0.0;
      rep.upper("ostensible_weighted_mean_zscore", std::max(zr, zi), 3.0);
      ost_freq = ost_hist.normalized();
    }
  }

  Outcome out;
  out.table.header = {"cell", "re_center", "im_center", "born_probability", "trajectory_frequency",
                      "ostensible_weighted_frequency", "config_hash"};
  for (int c = 0; c <= bins * bins; ++c) {
    const bool outer = c == bins * bins;
    const int i = c / bins, j = c % bins;
    out.table.rows.push_back({outer ? "outside" : std::to_string(c), outer ? "" : num(lo_re + w_re * (i + 0.5)),
                              outer ? "" : num(lo_im + w_im * (j + 0.5)), num(cell_prob[c]),
                              traj_freq.empty() ? "" : num(traj_freq[c]), ost_freq.empty() ? "" : num(ost_freq[c]),
                              rep.config_hash});
  }
  out.default_series = {"sigma"};
  return out;
}

Outcome evolve_kod(const ExperimentConfig& cfg, VerificationReport& rep) {
  const InstrumentParams& p = cfg.params;
  const double horizon = p.horizon;
  const PoissonKOD kod = kod_poisson(horizon, p.kappa);

  double drift = 0.0;
  const PoissonKOD evolved = evolve_kod_poisson(horizon, p.kappa, cfg.n_max, cfg.ode_steps,
                                                [&](long, double, const std::vector<double>& w) {
                                                  double s = 0.0;
                                                  for (double v : w) s += v;
                                                  drift = std::max(drift, std::abs(s - 1.0));
                                                });
  auto max_err = [&](const PoissonKOD& e) {
    double m = 0.0;
    for (int n = 0; n <= cfg.n_max; ++n) m = std::max(m, std::abs(e.weights[n] - kod.probability(n)));
    return m;
  };
  const double err = max_err(evolved);
  rep.upper("poisson_max_error", err, 1e-8);
  rep.upper("poisson_mass_drift", drift, 1e-10);
  const double coarse = max_err(evolve_kod_poisson(horizon, p.kappa, cfg.n_max, 100));
  const double fine = max_err(evolve_kod_poisson(horizon, p.kappa, cfg.n_max, 200));
  rep.lower("poisson_step_halving_ratio", coarse / fine, 8.0);

  const double sigma = effective_covariance(horizon, p.kappa);
  const double target = sigma + cfg.grid.initial_variance;
  DiffusionSettings settings;
  settings.initial_variance = cfg.grid.initial_variance;
  double step_drift = 0.0;
  double last_mass = 0.0;
  const GaussianKOD pde = evolve_kod_diffusion(horizon, p.kappa, {cfg.grid.spacing, cfg.grid.extent}, cfg.grid.steps,
                                               settings, [&](long step, const GridField& f) {
                                                 const double m = f.mass();
                                                 if (step > 0) step_drift = std::max(step_drift, std::abs(m - last_mass));
                                                 last_mass = m;
                                               });
  const double pde_err = grid_max_error(*pde.grid, target);
  rep.upper("diffusion_max_error", pde_err, 1e-3);
  rep.upper("diffusion_mass_drift_per_step", step_drift, 1e-8);
  const GaussianKOD half =
      evolve_kod_diffusion(horizon, p.kappa, {0.5 * cfg.grid.spacing, cfg.grid.extent}, cfg.grid.steps, settings);
  rep.lower("diffusion_spacing_halving_ratio", pde_err / grid_max_error(*half.grid, target), 3.5);

  Outcome out;
  out.table.header = {"series", "coordinate", "analytic", "numerical", "config_hash"};
  for (int n = 0; n <= cfg.n_max; ++n) {
    out.table.rows.push_back({"poisson", std::to_string(n), num(kod.probability(n)), num(evolved.weights[n]),
                              rep.config_hash});
  }
  const GridField& g = *pde.grid;
  const int mid = g.nodes / 2;
  for (int i = 0; i < g.nodes; ++i) {
    const double x = g.coord(i);
    out.table.rows.push_back(
        {"diffusion_slice", num(x), num(std::exp(-x * x / target) / target), num(g.at(i, mid)), rep.config_hash});
  }
  out.default_series = {"lambda", "sigma", "poisson_vacuum_weight"};
  return out;
}

double record_product_defect(const InstrumentParams& p) {
  // Three jumps on the grid; the jump step acts as K_0 K_1.
  const long steps = p.steps();
  const double step = p.step();
  const std::vector<long> at = {steps / 7, steps / 3, (5 * steps) / 6};
  const FockOperator k0 = kraus_no_jump(p);
  const FockOperator k1 = kraus_jump(p);
  const FockOperator jump = k0 * k1;
  FockOperator prod = FockOperator::identity(p.dim);
  PhotoRecord rec{{}, p.horizon};
  std::size_t next = 0;
  for (long j = 0; j < steps; ++j) {
    if (next < at.size() && at[next] == j) {
      prod = jump * prod;
      rec.jump_times.push_back(static_cast<double>(j) * step);
      ++next;
    } else {
      prod = k0 * prod;
    }
  }
  const RecordReduction red = reduce_record(rec, p);
  const FockOperator expect =
      Complex(std::sqrt(red.weight)) * (number_exp(p.dim, 0.5 * p.kappa * p.horizon) * lowering_power(p.dim, red.count));
  const int sub = safe_subblock(p.dim);
  return subblock_norm_diff(prod, expect, sub) / spectral_norm(expect.matrix().topLeftCorner(sub, sub));
}

Outcome verify_identities(const ExperimentConfig& cfg, VerificationReport& rep) {
  const InstrumentParams& p = cfg.params;
  const int d = p.dim;
  const int sub = cfg.subblock;
  SeededStream rng(cfg.seed, kAuxiliaryStreams);

  // Canonical commutator on the truncated space.
  {
    const FockOperator a = make_lowering(d);
    Matrix expect = Matrix::Identity(d, d);
    expect(d - 1, d - 1) = -(d - 1.0);
    rep.upper("commutator_truncation_pattern", spectral_norm((a * a.adjoint() - a.adjoint() * a).matrix() - expect),
              1e-12);
  }
  {
    const FockOperator a = make_lowering(d);
    double worst_a = 0.0, worst_c = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double r = 3.0 * rng.uniform();
      const double rad = std::sqrt(rng.uniform());
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      const Complex c = std::polar(rad, phase);
      const FockOperator e = number_exp(d, r);
      worst_a = std::max(worst_a, spectral_norm((a * e - Complex(std::exp(-r)) * (e * a)).matrix()));
      worst_c = std::max(worst_c, subblock_norm_diff(exp_lowering(d, c) * e, e * exp_lowering(d, c * std::exp(-r)), d));
    }
    rep.upper("renormalization_lowering_max", worst_a, 1e-12);
    rep.upper("renormalization_exp_lowering_max", worst_c, 1e-12);
  }
  {
    const FockOperator k0 = kraus_no_jump(p);
    const FockOperator k1 = kraus_jump(p);
    // e^{-n g} + n g - 1 <= (n g)^2 / 2 with g = kappa dt.
    const int block = std::min(25, d);
    const double g = p.kappa * p.step();
    rep.upper("step_kraus_completeness",
              subblock_norm_diff(k0.adjoint() * k0 + k1.adjoint() * k1, FockOperator::identity(d), block),
              0.5 * std::pow(g * (block - 1), 2));
    rep.upper("record_product_relative_defect", record_product_defect(p), 1e-8);
  }
  {
    // Three heterodyne steps: the exact product is K_T at the shrunk functional.
    InstrumentParams q = p;
    q.horizon = 3.0 * p.dt;
    HeterodyneRecord rec{{}, q.step(), q.horizon};
    FockOperator prod = FockOperator::identity(d);
    for (int j = 0; j < 3; ++j) {
      rec.increments.push_back(wiener_increment(rng, q.step()));
      prod = kraus_increment(rec.increments.back(), q) * prod;
    }
    const double r = 0.5 * q.kappa * q.step();
    const Complex zeta = record_functional(rec, q.kappa);
    const FockOperator exact = kraus_class_het(zeta * (-std::expm1(-r) / r), q.horizon, q);
    const FockOperator left_point = kraus_class_het(zeta, q.horizon, q);
    const double norm = spectral_norm(exact.matrix().topLeftCorner(sub, sub));
    rep.upper("het_product_relative_defect", subblock_norm_diff(prod, exact, sub) / norm, 1e-10);
    rep.upper("het_product_left_endpoint_relative_defect", subblock_norm_diff(prod, left_point, sub) / norm,
              q.kappa * q.step());
  }
  {
    const double horizon = 1.0 / p.kappa;
    rep.upper("photodetector_povm_completeness", povm_completeness(horizon, p, d - 1, sub), 1e-8);
    const double lambda = effective_mean(horizon, p.kappa);
    double mandel = 0.0;
    for (int n = 0; n < d; ++n) {
      const FockOperator an = lowering_power(d, n);
      const FockOperator rhs = Complex(std::exp(n * std::log(lambda) - std::lgamma(n + 1.0))) *
                               (an.adjoint() * number_exp(d, p.kappa * horizon) * an);
      const double scale = std::max(1.0, rhs.matrix().cwiseAbs().maxCoeff());
      mandel = std::max(mandel, (povm_element(n, horizon, p).matrix() - rhs.matrix()).cwiseAbs().maxCoeff() / scale);
    }
    rep.upper("mandel_form_relative_defect", mandel, 1e-12);
    const double d16 = povm_completeness_het(horizon, p, 16, sub);
    const double d32 = povm_completeness_het(horizon, p, 32, sub);
    rep.upper("heterodyne_povm_completeness", d32, 1e-6);
    rep.upper("heterodyne_quadrature_refinement", d32 - d16, 1e-12);
  }
  {
    const double lambda = effective_mean(std::numbers::ln2 / p.kappa, p.kappa);
    const std::vector<double> pmf = born_pmf(DensityOperator::pure(StateVector::number(d, std::min(5, d - 1))),
                                             std::numbers::ln2 / p.kappa, p);
    const int m = std::min(5, d - 1);
    double worst = 0.0;
    for (int n = 0; n < d; ++n) {
      const double binom = n <= m ? std::exp(std::lgamma(m + 1.0) - std::lgamma(n + 1.0) - std::lgamma(m - n + 1.0) +
                                             n * std::log(lambda) + (m - n) * std::log1p(-lambda))
                                  : 0.0;
      worst = std::max(worst, std::abs(pmf[n] - binom));
    }
    rep.upper("born_binomial_max_error", worst, 1e-10);
  }
  {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Complex zeta = std::polar(2.0 * std::sqrt(rng.uniform()), 2.0 * std::numbers::pi * rng.uniform());
      const double r = 0.1 + 2.9 * rng.uniform();
      worst = std::max(worst, cartan_identity_defect(zeta, r, d, sub));
    }
    rep.upper("cartan_identity_max", worst, 1e-9);
    const double base = cartan_identity_defect({1.0, 0.5}, 0.7, d, sub);
    double spread = 0.0;
    for (int k = 0; k < 8; ++k) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      spread = std::max(spread, std::abs(cartan_identity_defect(std::polar(1.0, theta) * Complex(1.0, 0.5), 0.7, d, sub) - base));
    }
    rep.upper("cartan_phase_covariance", spread, 1e-10);
  }
  {
    const double horizon = std::numbers::ln2 / p.kappa;
    const double sigma = effective_covariance(horizon, p.kappa);
    const int dd = std::max(d, 50);
    const double allowance = 8.0 * std::numeric_limits<double>::epsilon() / sigma;
    rep.upper("trace_identity_defect", trace_identity_defect(horizon, p.kappa, dd),
              trace_tail_bound(horizon, p.kappa, dd) + allowance);
    rep.upper("groundstate_quadrature_deviation", groundstate_completeness(horizon, p.kappa, dd).deviation, 1e-6);
  }
  {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Complex alpha = std::polar(std::sqrt(rng.uniform()), 2.0 * std::numbers::pi * rng.uniform());
      worst = std::max(worst, left_invariance_defect(alpha, 1.0 / p.kappa, p));
    }
    rep.upper("left_invariance_max", worst, 1e-8);
  }

  Outcome out;
  out.table.header = {"check", "measured", "threshold", "pass", "config_hash"};
  for (const auto& c : rep.checks) {
    out.table.rows.push_back({c.name, num(c.measured), num(c.threshold), c.pass ? "true" : "false", rep.config_hash});
  }
  return out;
}

double ratio_factor(const std::vector<double>& defects, const std::vector<double>& kappa_t) {
  double worst = 1.0;
  for (std::size_t k = 0; k + 1 < defects.size(); ++k) {
    const double measured = defects[k + 1] / defects[k];
    const double expected = std::exp(-(kappa_t[k + 1] - kappa_t[k]));
    worst = std::max({worst, measured / expected, expected / measured});
  }
  return worst;
}

Outcome povm_convergence(const ExperimentConfig& cfg, VerificationReport& rep) {
  const InstrumentParams& p = cfg.params;
  Outcome out;
  out.table.header = {"quantity", "parameter", "kappa_t", "value", "reference", "config_hash"};

  for (int n : {0, 1, 2}) {
    std::vector<double> defects;
    for (double kt : cfg.sweep) {
      defects.push_back(projector_convergence(n, kt / p.kappa, p));
      out.table.rows.push_back({"photodetector_projector_defect", std::to_string(n), num(kt), num(defects.back()),
                                num(std::exp(-kt)), rep.config_hash});
    }
    rep.upper("photodetector_projector_ratio_factor_n" + std::to_string(n), ratio_factor(defects, cfg.sweep), 2.0);
  }
  for (double z : {0.0, 0.5}) {
    std::vector<double> defects;
    for (double kt : cfg.sweep) {
      defects.push_back(het_projector_convergence(z, kt / p.kappa, p));
      out.table.rows.push_back({"heterodyne_projector_defect", num(z), num(kt), num(defects.back()),
                                num(std::exp(-kt)), rep.config_hash});
    }
    rep.upper("heterodyne_projector_ratio_factor_zeta" + num(z), ratio_factor(defects, cfg.sweep), 2.0);
  }

  std::vector<double> points = {std::numbers::ln2};
  points.insert(points.end(), cfg.sweep.begin(), cfg.sweep.end());
  std::vector<CoolingEstimate> est(points.size());
  parallel_for_index(points.size(), cfg.threads, [&](std::size_t k) {
    SeededStream rng(cfg.seed, kAuxiliaryStreams + 1 + k);
    est[k] = covariance_cooling(points[k] / p.kappa, p.kappa, cfg.cooling_samples, rng);
  });
  const double tol = 0.03 * tolerance_scale(cfg.cooling_samples, 1e5);
  double worst_sweep = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double kt = points[k];
    const double alpha_ref = 1.0 / -std::expm1(-kt);
    const double beta_ref = 1.0 / std::expm1(kt);
    out.table.rows.push_back({"cooling_alpha_sq", "", num(kt), num(est[k].alpha_sq), num(alpha_ref), rep.config_hash});
    out.table.rows.push_back({"cooling_beta_sq", "", num(kt), num(est[k].beta_sq), num(beta_ref), rep.config_hash});
    if (k == 0) {
      rep.upper("cooling_alpha_rel_error_ln2", std::abs(est[k].alpha_sq - alpha_ref) / alpha_ref, tol);
      rep.upper("cooling_beta_rel_error_ln2", std::abs(est[k].beta_sq - beta_ref) / beta_ref, tol);
    } else {
      worst_sweep = std::max(worst_sweep, std::abs(est[k].beta_sq - beta_ref) / beta_ref);
    }
  }
  rep.upper("cooling_beta_sweep_max_rel_error", worst_sweep, tol);
  out.default_series = {"photodetector_projector_defect", "heterodyne_projector_defect", "beta_cooling",
                        "beta_cooling_exact"};
  return out;
}

}  // namespace

// ---------------------------------------------------------------- plots

const std::vector<std::string>& plot_series_names() {
  static const std::vector<std::string> names = {"lambda",
                                                 "sigma",
                                                 "poisson_vacuum_weight",
                                                 "photodetector_projector_defect",
                                                 "heterodyne_projector_defect",
                                                 "alpha_cooling",
                                                 "beta_cooling",
                                                 "beta_cooling_exact"};
  return names;
}

std::vector<std::string> emit_plot_data(const VerificationReport& report, const std::vector<std::string>& series,
                                        const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  (void)report;
  const auto& names = plot_series_names();
  for (const auto& s : series) {
    if (std::find(names.begin(), names.end(), s) == names.end()) throw SpecError("unknown plot series '" + s + "'");
  }
  const InstrumentParams& p = cfg.params;
  std::vector<std::string> files;
  for (const auto& s : series) {
    Table t;
    if (s == "lambda" || s == "sigma") {
      t.header = {"t", s};
      for (int k = 0; k <= 100; ++k) {
        const double time = 5.0 / p.kappa * k / 100.0;
        const double v = s == "lambda" ? effective_mean(time, p.kappa) : effective_covariance(time, p.kappa);
        t.rows.push_back({num(time), num(v)});
      }
    } else if (s == "poisson_vacuum_weight") {
      t.header = {"t", "vacuum_weight"};
      evolve_kod_poisson(p.horizon, p.kappa, cfg.n_max, cfg.ode_steps,
                         [&](long step, double time, const std::vector<double>& w) {
                           if (step % 10 == 0) t.rows.push_back({num(time), num(w[0])});
                         });
    } else if (s == "photodetector_projector_defect" || s == "heterodyne_projector_defect") {
      t.header = {"kappa_t", "defect"};
      for (double kt : cfg.sweep) {
        const double v = s == "photodetector_projector_defect" ? projector_convergence(1, kt / p.kappa, p)
                                                               : het_projector_convergence(0.5, kt / p.kappa, p);
        t.rows.push_back({num(kt), num(v)});
      }
    } else if (s == "beta_cooling_exact") {
      t.header = {"kappa_t", "beta_sq"};
      for (double kt : cfg.sweep) t.rows.push_back({num(kt), num(1.0 / std::expm1(kt))});
    } else {
      const bool alpha = s == "alpha_cooling";
      t.header = {"kappa_t", alpha ? "alpha_sq" : "beta_sq"};
      std::vector<CoolingEstimate> est(cfg.sweep.size());
      parallel_for_index(cfg.sweep.size(), cfg.threads, [&](std::size_t k) {
        // Same draws as the sweep points of the cooling checks.
        SeededStream rng(cfg.seed, kAuxiliaryStreams + 2 + k);
        est[k] = covariance_cooling(cfg.sweep[k] / p.kappa, p.kappa, cfg.cooling_samples, rng);
      });
      for (std::size_t k = 0; k < cfg.sweep.size(); ++k) {
        t.rows.push_back({num(cfg.sweep[k]), num(alpha ? est[k].alpha_sq : est[k].beta_sq)});
      }
    }
    const std::string file = "plot_" + s + ".csv";
    t.write(dir / file);
    files.push_back(file);
  }
  return files;
}

// ---------------------------------------------------------------- run

VerificationReport run(const ExperimentConfig& cfg) {
  VerificationReport rep;
  rep.experiment = cfg.experiment;
  rep.seed = cfg.seed;
  rep.config_hash = config_hash(cfg);

  Outcome out;
  if (cfg.experiment == "photodetect-ensemble") {
    out = photodetect_ensemble(cfg, rep);
  } else if (cfg.experiment == "heterodyne-ensemble") {
    out = heterodyne_ensemble(cfg, rep);
  } else if (cfg.experiment == "evolve-kod") {
    out = evolve_kod(cfg, rep);
  } else if (cfg.experiment == "verify-identities") {
    out = verify_identities(cfg, rep);
  } else if (cfg.experiment == "povm-convergence") {
    out = povm_convergence(cfg, rep);
  } else {
    throw UsageError("unknown experiment '" + cfg.experiment + "'");
  }

  std::filesystem::create_directories(cfg.out);
  out.table.write(cfg.out / "results.csv");
  rep.outputs.push_back("results.csv");
  const auto plots = emit_plot_data(rep, cfg.series.value_or(out.default_series), cfg, cfg.out);
  rep.outputs.insert(rep.outputs.end(), plots.begin(), plots.end());
  rep.outputs.push_back("report.json");
  write_text(cfg.out / "report.json", rep.to_json().dump(2) + "\n");
  return rep;
}

}  // namespace autonomy::cli
