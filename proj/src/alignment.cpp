#include "hrc/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hrc::align {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact ratio comparison for non-negative numerators and positive
// denominators: a/b < c/d  <=>  a*d < c*b. Avoids rounding from the division
// so candidate ordering (and therefore tie-breaking) is deterministic.
bool ratioLess(double c1, double w1, double c2, double w2) { return c1 * w2 < c2 * w1; }
}  // namespace

LocalCost LocalCost::fromTable(std::vector<Action> alphabet,
                               std::vector<std::vector<double>> table) {
  if (table.size() != alphabet.size())
    throw std::invalid_argument("cost table must be square over the alphabet");
  for (size_t i = 0; i < table.size(); ++i) {
    if (table[i].size() != alphabet.size())
      throw std::invalid_argument("cost table must be square over the alphabet");
    for (size_t j = 0; j < table[i].size(); ++j)
      if (table[i][j] < 0.0) throw std::invalid_argument("cost table entries must be >= 0");
    if (table[i][i] != 0.0)
      throw std::invalid_argument("cost table must be zero on the diagonal");
  }
  LocalCost c;
  c.use_table = true;
  c.alphabet = std::move(alphabet);
  c.table = std::move(table);
  return c;
}

int LocalCost::indexOf(const Action& a) const {
  for (size_t i = 0; i < alphabet.size(); ++i)
    if (alphabet[i] == a) return static_cast<int>(i);
  throw std::invalid_argument("symbol not present in cost alphabet");
}

double LocalCost::operator()(const Action& q, const Action& r) const {
  if (!use_table) return q == r ? 0.0 : 1.0;
  return table[static_cast<size_t>(indexOf(q))][static_cast<size_t>(indexOf(r))];
}

namespace {

void checkInputs(std::span<const Action> query, std::span<const Action> ref,
                 const StepPattern& steps) {
  if (query.empty()) throw std::invalid_argument("alignment query must be non-empty");
  if (ref.empty()) throw std::invalid_argument("alignment reference must be non-empty");
  if (steps.diag <= 0.0 || steps.ref <= 0.0 || steps.query <= 0.0 || steps.init <= 0.0)
    throw std::invalid_argument("step weights must be positive");
}

// Weight sum of any path ending at (ref j, query i) with k diagonal steps:
// counts of the other step kinds are fully determined by the endpoint.
double weightSum(const StepPattern& s, int i, int j, int k) {
  return s.init + k * s.diag + (j - k) * s.ref + (i - k) * s.query;
}

struct DpTable {
  int M, N, K;
  std::vector<double> c;

  DpTable(int m, int n) : M(m), N(n), K(std::min(m, n)), c(static_cast<size_t>(m) * n * K, kInf) {}
  double& at(int i, int j, int k) {
    return c[(static_cast<size_t>(i) * N + j) * K + k];
  }
  double get(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || k >= K) return kInf;
    return c[(static_cast<size_t>(i) * N + j) * K + k];
  }
};

// Fills the cube of minimal raw costs. Entry (i, j, k) is the cheapest
// unnormalized cost of a monotone path from (0,0) to (j, i) using exactly k
// diagonal steps; +inf where unreachable under the step pattern.
DpTable fillTable(std::span<const Action> query, std::span<const Action> ref,
                  const LocalCost& cost, const StepPattern& steps) {
  const int M = static_cast<int>(query.size());
  const int N = static_cast<int>(ref.size());
  DpTable t(M, N);
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      const double d = cost(query[static_cast<size_t>(i)], ref[static_cast<size_t>(j)]);
      const int kmax = std::min(i, j);
      for (int k = 0; k <= kmax; ++k) {
        double best;
        if (i == 0 && j == 0) {
          best = k == 0 ? d * steps.init : kInf;
        } else {
          best = kInf;
          const double diag = t.get(i - 1, j - 1, k - 1);
          if (diag < kInf) best = diag + d * steps.diag;
          if (steps.allow_ref) {
            const double left = t.get(i, j - 1, k);
            if (left < kInf) best = std::min(best, left + d * steps.ref);
          }
          if (steps.allow_query) {
            const double up = t.get(i - 1, j, k);
            if (up < kInf) best = std::min(best, up + d * steps.query);
          }
        }
        t.at(i, j, k) = best;
      }
    }
  }
  return t;
}

std::vector<std::pair<int, int>> backtrack(const DpTable& t, std::span<const Action> query,
                                           std::span<const Action> ref, const LocalCost& cost,
                                           const StepPattern& steps, int j_end, int k_end) {
  std::vector<std::pair<int, int>> path;
  int i = t.M - 1, j = j_end, k = k_end;
  while (true) {
    path.emplace_back(j, i);
    if (i == 0 && j == 0) break;
    const double cur = t.get(i, j, k);
    const double d = cost(query[static_cast<size_t>(i)], ref[static_cast<size_t>(j)]);
    // Predecessor whose DP value reproduces `cur` exactly; the DP minimum was
    // computed from these same expressions, so one of them matches bitwise.
    if (t.get(i - 1, j - 1, k - 1) + d * steps.diag == cur && i > 0 && j > 0 && k > 0) {
      --i, --j, --k;
    } else if (steps.allow_ref && j > 0 && t.get(i, j - 1, k) + d * steps.ref == cur) {
      --j;
    } else if (steps.allow_query && i > 0 && t.get(i - 1, j, k) + d * steps.query == cur) {
      --i;
    } else {
      throw std::logic_error("alignment backtrack lost the optimal path");
    }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

AlignmentResult readOut(const DpTable& t, std::span<const Action> query,
                        std::span<const Action> ref, const LocalCost& cost,
                        const StepPattern& steps, bool open_end) {
  const int M = t.M, N = t.N;
  AlignmentResult r;
  int best_j = -1, best_k = -1;
  double best_c = kInf, best_w = 1.0;
  const int j_lo = open_end ? 0 : N - 1;
  // j ascending / k descending: first strict improvement wins, so ties resolve
  // to the smallest matched length and then the most diagonal steps.
  for (int j = j_lo; j < N; ++j) {
    for (int k = std::min(M - 1, j); k >= 0; --k) {
      const double c = t.get(M - 1, j, k);
      if (c >= kInf) continue;
      const double w = weightSum(steps, M - 1, j, k);
      if (best_j < 0 || ratioLess(c, w, best_c, best_w)) {
        best_j = j, best_k = k, best_c = c, best_w = w;
      }
    }
  }
  if (best_j < 0) return r;  // no admissible path under this step pattern

  r.feasible = true;
  r.raw_cost = best_c;
  r.weight_sum = best_w;
  r.distance = best_c / best_w;
  r.matched_length = best_j + 1;
  r.path = backtrack(t, query, ref, cost, steps, best_j, best_k);

  r.min_raw_cost = kInf;
  for (int j = j_lo; j < N; ++j)
    for (int k = 0; k <= std::min(M - 1, j); ++k)
      r.min_raw_cost = std::min(r.min_raw_cost, t.get(M - 1, j, k));
  return r;
}

}  // namespace

AlignmentResult dtw(std::span<const Action> query, std::span<const Action> ref,
                    const LocalCost& cost, const StepPattern& steps) {
  checkInputs(query, ref, steps);
  return readOut(fillTable(query, ref, cost, steps), query, ref, cost, steps, false);
}

AlignmentResult openEndDtw(std::span<const Action> query, std::span<const Action> ref,
                           const LocalCost& cost, const StepPattern& steps) {
  checkInputs(query, ref, steps);
  return readOut(fillTable(query, ref, cost, steps), query, ref, cost, steps, true);
}

bool pathConsistent(const AlignmentResult& r, std::span<const Action> query,
                    std::span<const Action> ref, const LocalCost& cost,
                    const StepPattern& steps) {
  if (!r.feasible || r.path.empty()) return false;
  if (r.path.front() != std::make_pair(0, 0)) return false;
  if (r.path.back() != std::make_pair(r.matched_length - 1, static_cast<int>(query.size()) - 1))
    return false;
  double raw = cost(query[0], ref[0]) * steps.init;
  double wsum = steps.init;
  for (size_t t = 1; t < r.path.size(); ++t) {
    const auto [pj, pi] = r.path[t - 1];
    const auto [j, i] = r.path[t];
    const int dj = j - pj, di = i - pi;
    double w;
    if (dj == 1 && di == 1) {
      w = steps.diag;
    } else if (dj == 1 && di == 0 && steps.allow_ref) {
      w = steps.ref;
    } else if (dj == 0 && di == 1 && steps.allow_query) {
      w = steps.query;
    } else {
      return false;  // non-monotone or disallowed step
    }
    raw += cost(query[static_cast<size_t>(i)], ref[static_cast<size_t>(j)]) * w;
    wsum += w;
  }
  const double tol = 1e-12 * (1.0 + std::abs(raw) + std::abs(wsum));
  return std::abs(raw - r.raw_cost) <= tol && std::abs(wsum - r.weight_sum) <= tol &&
         std::abs(raw / wsum - r.distance) <= tol;
}

IncrementalOpenEnd::IncrementalOpenEnd(std::vector<Action> ref, LocalCost cost, StepPattern steps)
    : ref_(std::move(ref)), cost_(std::move(cost)), steps_(steps) {
  if (ref_.empty()) throw std::invalid_argument("alignment reference must be non-empty");
  kdim_ = static_cast<int>(ref_.size());
  reset();
}

void IncrementalOpenEnd::reset() {
  query_len_ = 0;
  row_.assign(ref_.size() * static_cast<size_t>(kdim_), kInf);
}

void IncrementalOpenEnd::append(const Action& a) {
  const int N = static_cast<int>(ref_.size());
  const int i = query_len_;
  std::vector<double> next(static_cast<size_t>(N) * kdim_, kInf);
  auto prev_at = [&](int j, int k) -> double {
    if (j < 0 || k < 0 || k >= kdim_) return kInf;
    return row_[static_cast<size_t>(j) * kdim_ + k];
  };
  auto next_at = [&](int j, int k) -> double& {
    return next[static_cast<size_t>(j) * kdim_ + k];
  };
  for (int j = 0; j < N; ++j) {
    const double d = cost_(a, ref_[static_cast<size_t>(j)]);
    const int kmax = std::min(i, j);
    for (int k = 0; k <= kmax; ++k) {
      double best;
      if (i == 0 && j == 0) {
        best = k == 0 ? d * steps_.init : kInf;
      } else {
        best = kInf;
        const double diag = prev_at(j - 1, k - 1);
        if (diag < kInf) best = diag + d * steps_.diag;
        if (steps_.allow_ref && j > 0) {
          const double left = next_at(j - 1, k);
          if (left < kInf) best = std::min(best, left + d * steps_.ref);
        }
        if (steps_.allow_query) {
          const double up = prev_at(j, k);
          if (up < kInf) best = std::min(best, up + d * steps_.query);
        }
      }
      next_at(j, k) = best;
    }
  }
  row_.swap(next);
  ++query_len_;
}

IncrementalOpenEnd::Best IncrementalOpenEnd::best() const {
  Best b;
  if (query_len_ == 0) return b;
  const int N = static_cast<int>(ref_.size());
  const int i = query_len_ - 1;
  for (int j = 0; j < N; ++j) {
    for (int k = std::min(i, j); k >= 0; --k) {
      const double c = row_[static_cast<size_t>(j) * kdim_ + k];
      if (c >= kInf) continue;
      const double w = weightSum(steps_, i, j, k);
      if (!b.feasible || ratioLess(c, w, b.raw_cost, b.weight_sum)) {
        b.feasible = true;
        b.raw_cost = c;
        b.weight_sum = w;
        b.matched_length = j + 1;
      }
    }
  }
  if (b.feasible) b.distance = b.raw_cost / b.weight_sum;
  return b;
}

}  // namespace hrc::align
