#include "sse/twin_table.hpp"

#include <algorithm>
#include <stdexcept>

#include "sse/binary_io.hpp"

namespace sse {

namespace {

// (1 - tau)^k is treated as zero once it drops below this.
constexpr double kNegligible = 1e-20;

std::vector<double> build_decay(double tau) {
  std::vector<double> table{1.0};
  if (tau <= 0.0) return table;
  double v = 1.0;
  while (true) {
    v *= (1.0 - tau);
    if (v < kNegligible) break;
    table.push_back(v);
  }
  return table;
}

}  // namespace

TwinQTable::TwinQTable(std::size_t rows, std::size_t cols, double init, double tau)
    : rows_(rows), cols_(cols), init_(init), tau_(tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("tau outside [0,1]");
  data_.assign(rows * cols, Entry{{init, init}, {init, init}, 0});
  decay_table_ = build_decay(tau);
}

std::size_t TwinQTable::add_row() {
  data_.resize(data_.size() + cols_, Entry{{init_, init_}, {init_, init_}, 0});
  return rows_++;
}

double TwinQTable::decay(std::uint64_t k) const {
  if (tau_ <= 0.0) return 1.0;
  return k < decay_table_.size() ? decay_table_[k] : 0.0;
}

double TwinQTable::estimate(std::size_t r, std::size_t c) const {
  const Entry& e = at(r, c);
  return 0.5 * (e.q[0] + e.q[1]);
}

double TwinQTable::target(std::size_t r, std::size_t c, int twin) const {
  const Entry& e = at(r, c);
  const double f = decay(tick_ - e.sync);
  return e.q[twin] + f * (e.t[twin] - e.q[twin]);
}

double TwinQTable::target_min(std::size_t r, std::size_t c) const {
  return std::min(target(r, c, 0), target(r, c, 1));
}

void TwinQTable::materialize(Entry& e) const {
  const double f = decay(tick_ - e.sync);
  for (int i = 0; i < 2; ++i) e.t[i] = e.q[i] + f * (e.t[i] - e.q[i]);
  e.sync = tick_;
}

void TwinQTable::update(std::size_t r, std::size_t c, int twin, double y, double lr) {
  Entry& e = at(r, c);
  materialize(e);
  e.q[twin] += lr * (y - e.q[twin]);
}

void TwinQTable::set(std::size_t r, std::size_t c, double value) {
  Entry& e = at(r, c);
  e.q[0] = e.q[1] = e.t[0] = e.t[1] = value;
  e.sync = tick_;
}

void TwinQTable::copy_entry(std::size_t r, std::size_t c, const TwinQTable& from, std::size_t from_r,
                            std::size_t from_c) {
  Entry& e = at(r, c);
  for (int i = 0; i < 2; ++i) {
    e.q[i] = from.online(from_r, from_c, i);
    e.t[i] = from.target(from_r, from_c, i);
  }
  e.sync = tick_;
}

void TwinQTable::write(std::ostream& out) const {
  binary::put<std::uint64_t>(out, rows_);
  binary::put<std::uint64_t>(out, cols_);
  binary::put(out, init_);
  binary::put(out, tau_);
  binary::put(out, tick_);
  binary::put_vector(out, data_);
}

void TwinQTable::read(std::istream& in) {
  rows_ = binary::get<std::uint64_t>(in);
  cols_ = binary::get<std::uint64_t>(in);
  init_ = binary::get<double>(in);
  tau_ = binary::get<double>(in);
  tick_ = binary::get<std::uint64_t>(in);
  data_ = binary::get_vector<Entry>(in);
  if (data_.size() != rows_ * cols_) throw std::runtime_error("Q table size mismatch");
  decay_table_ = build_decay(tau_);
}

bool operator==(const TwinQTable& a, const TwinQTable& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.init_ != b.init_ || a.tau_ != b.tau_ ||
      a.tick_ != b.tick_ || a.data_.size() != b.data_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.data_.size(); ++i) {
    const auto& x = a.data_[i];
    const auto& y = b.data_[i];
    if (x.q[0] != y.q[0] || x.q[1] != y.q[1] || x.t[0] != y.t[0] || x.t[1] != y.t[1] ||
        x.sync != y.sync) {
      return false;
    }
  }
  return true;
}

}  // namespace sse
