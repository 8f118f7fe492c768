#pragma once

// Seeded random streams, histograms and the small amount of ensemble
// statistics the acceptance checks need.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace autonomy {

/// Reproducible random stream addressed by (seed, stream_id).
///
/// The engine state is derived from the pair with SplitMix64, so opening
/// stream i costs O(1) and never depends on streams 0..i-1. Only the engine
/// (std::mt19937_64) and arithmetic on its raw output are used; no
/// implementation-defined std:: distributions.
class SeededStream {
 public:
  SeededStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller, pairs cached).
  double normal();
  /// Circular complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_normal(double variance);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// SplitMix64 finalizer, exposed for deriving sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Binned tallies over [edges.front(), edges.back()). Values outside the
/// range are tallied as underflow/overflow and excluded from bin mass.
class Histogram {
 public:
  explicit Histogram(std::vector<double> edges);

  /// Unit-width bins centred on the integers lo..hi.
  static Histogram integer_bins(int lo, int hi);

  void add(double x, double weight = 1.0);

  std::size_t bins() const { return counts_.size(); }
  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& counts() const { return counts_; }
  double count(std::size_t bin) const { return counts_.at(bin); }
  double total() const;
  double underflow() const { return underflow_; }
  double overflow() const { return overflow_; }

  /// Counts divided by the in-range total.
  std::vector<double> normalized() const;

  bool same_bins(const Histogram& other) const { return edges_ == other.edges_; }

 private:
  std::vector<double> edges_;
  std::vector<double> counts_;
  double underflow_ = 0.0;
  double overflow_ = 0.0;
};

/// Moments and histogram of a sample.
struct EnsembleSummary {
  std::size_t count = 0;
  std::complex<double> mean{};
  double second_moment = 0.0;  // mean of |x|^2
  Histogram histogram;

  double variance() const { return second_moment - std::norm(mean); }
};

EnsembleSummary summarize(std::span<const double> samples, Histogram bins);
EnsembleSummary summarize(std::span<const std::complex<double>> samples, Histogram bins);

/// Inhomogeneous Poisson process on the dt grid: a jump at t = j dt with
/// probability rate(t) dt. Throws DomainError if rate(t) dt > 0.1 or rate < 0.
std::vector<double> poisson_thinning_times(const std::function<double(double)>& rate, double horizon, double dt,
                                           SeededStream& rng);

/// Total-variation distance between two normalized histograms.
double two_sample_tv(const Histogram& h1, const Histogram& h2);

/// Total-variation distance between two probability vectors of equal length.
double tv_distance(std::span<const double> p, std::span<const double> q);

struct ChiSquareResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  int merged_bins = 0;
  double p_value = 1.0;
};

/// Pearson goodness of fit of histogram counts against `pmf` (one entry per
/// bin, renormalized over the bins). Adjacent bins are merged in order until
/// every retained bin expects at least five counts.
ChiSquareResult chi_square_test(const Histogram& h, std::span<const double> pmf);

inline double chi_square_gof(const Histogram& h, std::span<const double> pmf) {
  return chi_square_test(h, pmf).p_value;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Indices are
/// split into contiguous blocks; callers write results by index, so the
/// outcome never depends on the thread count.
template <class Fn>
void parallel_for_index(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, threads);
  if (threads == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  const std::size_t block = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(count, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

}  // namespace autonomy
