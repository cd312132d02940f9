#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "storalloc/instance.hpp"

namespace storalloc {

/// Integer allocation matrix W with cached row/column aggregates so that
/// single-cell edits and move evaluation are O(1). W[x][y] is the number of
/// atoms x stores at y.
class AllocationMatrix {
  public:
    AllocationMatrix() = default;
    explicit AllocationMatrix(int n)
        : n_(n),
          w_(static_cast<std::size_t>(n) * n, 0),
          row_sum_(n, 0),
          col_sum_(n, 0),
          col_support_(n, 0),
          row_sq_(n, 0) {}

    int n() const { return n_; }
    int at(int x, int y) const { return w_[idx(x, y)]; }

    int row_sum(int x) const { return row_sum_[x]; }
    int col_sum(int y) const { return col_sum_[y]; }
    int col_support(int y) const { return col_support_[y]; }
    long long row_sq_sum(int x) const { return row_sq_[x]; }
    long long total() const { return total_; }

    void add(int x, int y, int delta) {
        int& cell = w_[idx(x, y)];
        const int before = cell;
        cell += delta;
        assert(cell >= 0);
        row_sum_[x] += delta;
        col_sum_[y] += delta;
        total_ += delta;
        row_sq_[x] += static_cast<long long>(cell) * cell - static_cast<long long>(before) * before;
        if (before == 0 && cell > 0) ++col_support_[y];
        if (before > 0 && cell == 0) --col_support_[y];
    }

    void set_row(int x, const std::vector<int>& row) {
        for (int y = 0; y < n_; ++y) {
            const int d = row[y] - at(x, y);
            if (d != 0) add(x, y, d);
        }
    }

    std::vector<int> row(int x) const {
        return std::vector<int>(w_.begin() + idx(x, 0), w_.begin() + idx(x, 0) + n_);
    }

    /// W is complete (a member of the allocation-state set) when every unit
    /// has placed all of its data.
    bool is_complete(const Instance& inst) const {
        for (int x = 0; x < n_; ++x)
            if (row_sum_[x] != inst.alpha[x]) return false;
        return true;
    }

    const std::vector<int>& cells() const { return w_; }

    friend bool operator==(const AllocationMatrix& a, const AllocationMatrix& b) {
        return a.w_ == b.w_;
    }

  private:
    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(x) * n_ + y; }

    int n_ = 0;
    std::vector<int> w_;
    std::vector<int> row_sum_, col_sum_, col_support_;
    std::vector<long long> row_sq_;
    long long total_ = 0;
};

/// P1 (graph support), P2 (row sums <= alpha), P3 (column sums <= beta).
inline bool validate_partial(const Instance& inst, const AllocationMatrix& w) {
    if (w.n() != inst.n) return false;
    for (int x = 0; x < inst.n; ++x) {
        if (w.row_sum(x) > inst.alpha[x]) return false;
        for (int y = 0; y < inst.n; ++y) {
            const int v = w.at(x, y);
            if (v < 0) return false;
            if (v > 0 && !inst.has_edge(x, y)) return false;
        }
    }
    for (int y = 0; y < inst.n; ++y)
        if (w.col_sum(y) > inst.beta[y]) return false;
    return true;
}

inline AllocationMatrix matrix_from_rows(const std::vector<std::vector<int>>& rows) {
    AllocationMatrix w(static_cast<int>(rows.size()));
    for (int x = 0; x < w.n(); ++x)
        for (int y = 0; y < w.n(); ++y)
            if (rows[x][y] != 0) w.add(x, y, rows[x][y]);
    return w;
}

struct VecIntHash {
    std::size_t operator()(const std::vector<int>& v) const {
        std::size_t h = 0x9e3779b97f4a7c15ULL ^ v.size();
        for (int x : v) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
        return h;
    }
};

}  // namespace storalloc
