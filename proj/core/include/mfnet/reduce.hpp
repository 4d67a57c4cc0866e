#pragma once

#include <cstddef>
#include <future>
#include <memory>
#include <vector>

#include "mfnet/common.hpp"

namespace mfnet {

// All sums in this library are pairwise tree reductions over a fixed index
// range: ranges of at most kReduceLeaf elements are summed sequentially, and
// longer ranges split at lo + (hi-lo)/2 and add the two halves.  The tree
// shape depends only on the range length, so results carry the same bits no
// matter how the work is scheduled.  Threaded variants hand whole subtrees
// to tasks and combine in tree order.
inline constexpr std::size_t kReduceLeaf = 8;

inline double pairwise_sum(const double* v, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= kReduceLeaf) {
    double s = v[0];
    for (std::size_t i = 1; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t m = n / 2;
  return pairwise_sum(v, m) + pairwise_sum(v + m, n - m);
}

/// sum_i a[i]*b[i] with the same tree shape as pairwise_sum.
inline double pairwise_dot(const double* a, const double* b, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= kReduceLeaf) {
    double s = a[0] * b[0];
    for (std::size_t i = 1; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  std::size_t m = n / 2;
  return pairwise_dot(a, b, m) + pairwise_dot(a + m, b + m, n - m);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

/// Generic block-tree reduction over [0, n).  Acc is the accumulator type;
/// `eval_leaf(lo, hi, acc)` must overwrite acc with the leaf value, and
/// `add(into, from)` must combine entrywise.  Fresh accumulators come from
/// `make()` and are recycled through a small pool, so at most tree-depth
/// many live at once per task.  With threads > 1, right subtrees above
/// `par_depth` levels run as std::async tasks; the combine order is the
/// sequential one either way.
template <class Acc, class EvalLeaf, class Add, class Make>
class BlockTreeReducer {
 public:
  BlockTreeReducer(EvalLeaf eval_leaf, Add add, Make make)
      : eval_leaf_(std::move(eval_leaf)), add_(std::move(add)), make_(std::move(make)) {}

  void run(std::size_t n, Acc& out, const ExecContext& exec) {
    if (n == 0) throw DomainError("BlockTreeReducer: empty range");
    int par_depth = 0;
    if (exec.threads > 1) {
      int t = 1;
      while (t < exec.threads && par_depth < 10) {
        t *= 2;
        ++par_depth;
      }
    }
    Pool pool;
    reduce(0, n, out, par_depth, pool);
  }

 private:
  struct Pool {
    std::vector<std::unique_ptr<Acc>> free;
  };

  std::unique_ptr<Acc> acquire(Pool& pool) {
    if (!pool.free.empty()) {
      auto a = std::move(pool.free.back());
      pool.free.pop_back();
      return a;
    }
    return std::make_unique<Acc>(make_());
  }

  void reduce(std::size_t lo, std::size_t hi, Acc& out, int par_depth, Pool& pool) {
    if (hi - lo <= kReduceLeaf) {
      eval_leaf_(lo, hi, out);
      return;
    }
    std::size_t mid = lo + (hi - lo) / 2;
    if (par_depth > 0) {
      auto rhs = acquire(pool);
      auto fut = std::async(std::launch::async, [&, this]() {
        Pool local;
        reduce(mid, hi, *rhs, par_depth - 1, local);
      });
      reduce(lo, mid, out, par_depth - 1, pool);
      fut.get();
      add_(out, *rhs);
      pool.free.push_back(std::move(rhs));
    } else {
      reduce(lo, mid, out, 0, pool);
      auto rhs = acquire(pool);
      reduce(mid, hi, *rhs, 0, pool);
      add_(out, *rhs);
      pool.free.push_back(std::move(rhs));
    }
  }

  EvalLeaf eval_leaf_;
  Add add_;
  Make make_;
};

template <class Acc, class EvalLeaf, class Add, class Make>
void block_tree_reduce(std::size_t n, Acc& out, EvalLeaf eval_leaf, Add add, Make make,
                       const ExecContext& exec) {
  BlockTreeReducer<Acc, EvalLeaf, Add, Make> r(std::move(eval_leaf), std::move(add),
                                               std::move(make));
  r.run(n, out, exec);
}

}  // namespace mfnet
