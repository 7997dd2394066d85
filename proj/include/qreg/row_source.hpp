#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

#include "qreg/core.hpp"

namespace qreg {

/// Rows of a single matrix, visited as ascending row blocks that partition [0, rows()).
/// Every data pass in the library is written against this interface, so an in-memory
/// matrix and an on-disk chunk series run through the same per-row kernels.
class RowSource {
 public:
  using BlockFn = std::function<void(Index row_begin, const Design& block)>;
  virtual ~RowSource() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual void for_each_block(const BlockFn& fn) const = 0;
};

/// Rows of a problem (A, b), visited in ascending blocks.
class ProblemSource {
 public:
  using BlockFn = std::function<void(Index row_begin, const Design& A, const Vector& b)>;
  virtual ~ProblemSource() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual void for_each_block(const BlockFn& fn) const = 0;
};

/// Non-owning view of an in-memory design. block_rows = 0 means one block.
class DesignSource final : public RowSource {
 public:
  explicit DesignSource(const Design& m, Index block_rows = 0) : m_(m), block_rows_(block_rows) {}
  Index rows() const override { return m_.rows(); }
  Index cols() const override { return m_.cols(); }
  void for_each_block(const BlockFn& fn) const override;

 private:
  const Design& m_;
  Index block_rows_;
};

/// Non-owning view of an in-memory problem. block_rows = 0 means one block.
class InMemoryProblemSource final : public ProblemSource {
 public:
  InMemoryProblemSource(const Design& A, const Vector& b, Index block_rows = 0)
      : A_(A), b_(b), block_rows_(block_rows) {}
  explicit InMemoryProblemSource(const QuantileProblem& p, Index block_rows = 0)
      : InMemoryProblemSource(p.A, p.b, block_rows) {}
  Index rows() const override { return A_.rows(); }
  Index cols() const override { return A_.cols(); }
  void for_each_block(const BlockFn& fn) const override;

 private:
  const Design& A_;
  const Vector& b_;
  Index block_rows_;
};

/// The augmented rows [b_i, -A_i] of a problem source.
class AugmentedSource final : public RowSource {
 public:
  explicit AugmentedSource(const ProblemSource& src) : src_(src) {}
  Index rows() const override { return src_.rows(); }
  Index cols() const override { return src_.cols() + 1; }
  void for_each_block(const BlockFn& fn) const override;

 private:
  const ProblemSource& src_;
};

/// Execution options shared by the data passes.
struct PassPlan {
  /// Worker threads used inside each block. Results never depend on this value.
  int workers = 1;
};

/// Splits [0, count) into at most `workers` contiguous ranges and runs
/// f(begin, end, worker) on each, joining before returning.
template <typename F>
void parallel_ranges(int workers, Index count, F&& f) {
  const Index w = std::max<Index>(1, std::min<Index>(workers, count));
  if (w == 1) {
    f(Index(0), count, 0);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<size_t>(w));
  for (Index k = 0; k < w; ++k) {
    const Index begin = count * k / w;
    const Index end = count * (k + 1) / w;
    pool.emplace_back([&f, begin, end, k] { f(begin, end, static_cast<int>(k)); });
  }
}

/// Runs f(worker) on `workers` threads.
template <typename F>
void run_workers(int workers, F&& f) {
  if (workers <= 1) {
    f(0);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int k = 0; k < workers; ++k) pool.emplace_back([&f, k] { f(k); });
}

}  // namespace qreg
