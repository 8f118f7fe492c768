#include "autonomy/records.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "autonomy/errors.hpp"

namespace autonomy {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SeededStream::SeededStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id))) {}

double SeededStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SeededStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

std::complex<double> SeededStream::complex_normal(double variance) {
  const double s = std::sqrt(0.5 * variance);
  const double re = normal();
  const double im = normal();
  return {s * re, s * im};
}

Histogram::Histogram(std::vector<double> edges) : edges_(std::move(edges)) {
  if (edges_.size() < 2) throw SpecError("histogram needs at least two edges");
  if (!std::is_sorted(edges_.begin(), edges_.end()) ||
      std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw SpecError("histogram edges must be strictly increasing");
  }
  counts_.assign(edges_.size() - 1, 0.0);
}

Histogram Histogram::integer_bins(int lo, int hi) {
  if (hi < lo) throw SpecError("integer_bins: empty range");
  std::vector<double> edges;
  for (int k = lo; k <= hi + 1; ++k) edges.push_back(k - 0.5);
  return Histogram(std::move(edges));
}

void Histogram::add(double x, double weight) {
  if (!(x >= edges_.front())) {
    underflow_ += weight;
    return;
  }
  if (x >= edges_.back()) {
    overflow_ += weight;
    return;
  }
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  counts_[static_cast<std::size_t>(it - edges_.begin()) - 1] += weight;
}

double Histogram::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0.0); }

std::vector<double> Histogram::normalized() const {
  const double t = total();
  if (!(t > 0.0)) throw DataError("histogram is empty");
  std::vector<double> p(counts_);
  for (double& v : p) v /= t;
  return p;
}

EnsembleSummary summarize(std::span<const double> samples, Histogram bins) {
  EnsembleSummary s{samples.size(), {}, 0.0, std::move(bins)};
  double sum = 0.0;
  double sq = 0.0;
  for (double x : samples) {
    sum += x;
    sq += x * x;
    s.histogram.add(x);
  }
  if (!samples.empty()) {
    s.mean = sum / static_cast<double>(samples.size());
    s.second_moment = sq / static_cast<double>(samples.size());
  }
  return s;
}

EnsembleSummary summarize(std::span<const std::complex<double>> samples, Histogram bins) {
  EnsembleSummary s{samples.size(), {}, 0.0, std::move(bins)};
  std::complex<double> sum{};
  double sq = 0.0;
  for (const auto& z : samples) {
    sum += z;
    sq += std::norm(z);
    s.histogram.add(std::abs(z));
  }
  if (!samples.empty()) {
    s.mean = sum / static_cast<double>(samples.size());
    s.second_moment = sq / static_cast<double>(samples.size());
  }
  return s;
}

std::vector<double> poisson_thinning_times(const std::function<double(double)>& rate, double horizon, double dt,
                                           SeededStream& rng) {
  if (!(dt > 0.0)) throw DomainError("poisson_thinning_times: dt must be positive");
  if (!(horizon >= 0.0)) throw DomainError("poisson_thinning_times: negative horizon");
  const auto steps = static_cast<long>(std::llround(horizon / dt));
  std::vector<double> times;
  for (long j = 0; j < steps; ++j) {
    const double t = static_cast<double>(j) * dt;
    const double r = rate(t);
    if (!(r >= 0.0)) throw DomainError("poisson_thinning_times: negative rate");
    const double p = r * dt;
    if (p > 0.1) throw DomainError("poisson_thinning_times: step too coarse (rate*dt > 0.1)");
    if (rng.uniform() < p) times.push_back(t);
  }
  return times;
}

double two_sample_tv(const Histogram& h1, const Histogram& h2) {
  if (!h1.same_bins(h2)) throw SpecError("two_sample_tv: bin specifications differ");
  const auto p = h1.normalized();
  const auto q = h2.normalized();
  return tv_distance(p, q);
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw SpecError("tv_distance: lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

ChiSquareResult chi_square_test(const Histogram& h, std::span<const double> pmf) {
  if (pmf.size() != h.bins()) throw SpecError("chi_square_test: pmf length differs from bin count");
  const double n = h.total();
  if (!(n > 0.0)) throw DataError("chi_square_test: histogram is empty");
  const double mass = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  if (!(mass > 0.0)) throw SpecError("chi_square_test: pmf has no mass");

  std::vector<double> observed;
  std::vector<double> expected;
  double obs_acc = 0.0;
  double exp_acc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    obs_acc += h.count(i);
    exp_acc += n * pmf[i] / mass;
    if (exp_acc >= 5.0) {
      observed.push_back(obs_acc);
      expected.push_back(exp_acc);
      obs_acc = exp_acc = 0.0;
    }
  }
  if (exp_acc > 0.0 || obs_acc > 0.0) {
    if (expected.empty()) {
      observed.push_back(obs_acc);
      expected.push_back(exp_acc);
    } else {
      observed.back() += obs_acc;
      expected.back() += exp_acc;
    }
  }

  ChiSquareResult r;
  r.merged_bins = static_cast<int>(expected.size());
  r.degrees_of_freedom = r.merged_bins - 1;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double diff = observed[i] - expected[i];
    r.statistic += diff * diff / expected[i];
  }
  if (r.degrees_of_freedom < 1) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.degrees_of_freedom);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

}  // namespace autonomy
