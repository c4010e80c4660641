#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace sse {

/// Twin tabular critics with Polyak-averaged target copies.
///
/// The target tables follow target <- (1 - tau) * target + tau * online once
/// per tick(). Blending is evaluated lazily per entry: between two writes the
/// online value is constant, so after k ticks the target equals
/// online + (1 - tau)^k * (target_at_write - online). This keeps a tick O(1)
/// regardless of table size while reproducing the eager blend.
class TwinQTable {
 public:
  TwinQTable() = default;
  TwinQTable(std::size_t rows, std::size_t cols, double init, double tau);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double init() const { return init_; }
  double tau() const { return tau_; }
  std::uint64_t ticks() const { return tick_; }

  /// Appends a row filled with the initial value; returns its index.
  std::size_t add_row();

  double online(std::size_t r, std::size_t c, int twin) const { return at(r, c).q[twin]; }
  /// Mean of the two online twins; used for acting and reporting. Targets
  /// take the min (target_min).
  double estimate(std::size_t r, std::size_t c) const;
  double target(std::size_t r, std::size_t c, int twin) const;
  /// min over the two target twins (clipped double-Q target).
  double target_min(std::size_t r, std::size_t c) const;

  /// Moves one online twin toward `y` with step `lr`.
  void update(std::size_t r, std::size_t c, int twin, double y, double lr);
  /// Overwrites both online twins and both targets with `value`.
  void set(std::size_t r, std::size_t c, double value);
  /// Copies the online and current target values of another table's entry.
  void copy_entry(std::size_t r, std::size_t c, const TwinQTable& from, std::size_t from_r, std::size_t from_c);

  /// Polyak blend of the target tables toward the online tables.
  void tick() { ++tick_; }

  void write(std::ostream& out) const;
  void read(std::istream& in);

  friend bool operator==(const TwinQTable& a, const TwinQTable& b);

 private:
  struct Entry {
    double q[2];
    double t[2];  // target value as of tick `sync`
    std::uint64_t sync;
  };

  const Entry& at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  Entry& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double decay(std::uint64_t k) const;
  void materialize(Entry& e) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double init_ = 0.0;
  double tau_ = 0.005;
  std::uint64_t tick_ = 0;
  std::vector<Entry> data_;
  std::vector<double> decay_table_;
};

}  // namespace sse
