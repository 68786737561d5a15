#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hrc/domain.hpp"

namespace hrc::align {

// Local distance d(query symbol, reference symbol). Default is the discrete
// 0/1 mismatch cost; a dense table over an explicit alphabet is supported for
// graded costs. Invariants: d >= 0 and d(a, a) == 0.
struct LocalCost {
  bool use_table = false;
  std::vector<Action> alphabet;
  std::vector<std::vector<double>> table;  // [query symbol][reference symbol]

  static LocalCost discrete01() { return {}; }
  static LocalCost fromTable(std::vector<Action> alphabet,
                             std::vector<std::vector<double>> table);

  double operator()(const Action& q, const Action& r) const;

 private:
  int indexOf(const Action& a) const;
};

// Step set is a subset of {(1,0),(0,1),(1,1)}; the diagonal is always allowed.
// Weights multiply the local cost collected at the step's arrival cell; the
// path's first cell carries `init`.
struct StepPattern {
  double diag = 1.0;
  double ref = 1.0;    // (1,0): advance reference only
  double query = 1.0;  // (0,1): advance query only
  double init = 1.0;
  bool allow_ref = true;
  bool allow_query = true;
};

struct AlignmentResult {
  bool feasible = false;
  double distance = 0.0;      // minimal normalized cost: raw / weight sum
  double raw_cost = 0.0;      // unnormalized cost of the returned path
  double weight_sum = 0.0;    // sum of step weights (incl. init) of the returned path
  double min_raw_cost = 0.0;  // unnormalized optimum over all admissible endpoints
  int matched_length = 0;     // leading reference symbols consumed, in [1, N]
  std::vector<std::pair<int, int>> path;  // (ref idx, query idx), 0-based, monotone
};

// Full alignment: both sequences consumed end to end.
AlignmentResult dtw(std::span<const Action> query, std::span<const Action> ref,
                    const LocalCost& cost = LocalCost::discrete01(),
                    const StepPattern& steps = StepPattern{});

// Open-end alignment: the minimum of the normalized full-DTW cost over all
// truncations of the reference. Computed in one DP pass; the normalized
// objective is minimized exactly by tracking the diagonal-step count per
// state (path weight sums differ, so the cheapest raw path is not always the
// cheapest normalized one). Ties: smaller matched length, then more diagonal
// steps; backtracking prefers diagonal, then (1,0), then (0,1).
AlignmentResult openEndDtw(std::span<const Action> query, std::span<const Action> ref,
                           const LocalCost& cost = LocalCost::discrete01(),
                           const StepPattern& steps = StepPattern{});

// Checks monotonicity/continuity/boundary of a path and recomputes its costs;
// used by tests and trace audits.
bool pathConsistent(const AlignmentResult& r, std::span<const Action> query,
                    std::span<const Action> ref, const LocalCost& cost,
                    const StepPattern& steps);

// Streaming form of openEndDtw over an append-only query. Keeps one DP row
// (reference index x diagonal count) per reference; append() is
// O(N * min(M, N)). best() equals openEndDtw on the full prefix (distance and
// matched length; paths are not materialized here).
class IncrementalOpenEnd {
 public:
  IncrementalOpenEnd() = default;
  IncrementalOpenEnd(std::vector<Action> ref, LocalCost cost, StepPattern steps);

  void append(const Action& query_symbol);
  void reset();

  struct Best {
    bool feasible = false;
    double distance = 0.0;
    double raw_cost = 0.0;
    double weight_sum = 0.0;
    int matched_length = 0;
  };
  // Valid after at least one append.
  Best best() const;
  int queryLength() const { return query_len_; }

 private:
  std::vector<Action> ref_;
  LocalCost cost_;
  StepPattern steps_;
  int query_len_ = 0;
  // row_[j * kdim_ + k]: min raw cost to (ref j, last query row) with k diagonals.
  std::vector<double> row_;
  int kdim_ = 0;
};

}  // namespace hrc::align
