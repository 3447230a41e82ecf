// Copyright 2026 The partape Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <span>

#include "partape/ad/runtime.hpp"
#include "partape/errors.hpp"

namespace partape {

// The overloaded computation type: a primal value and the identifier of its
// adjoint slot (0 = passive). Every arithmetic operation records one
// statement with its analytic partials when the calling thread's tape is
// active and at least one argument is active.
class ActiveScalar {
 public:
  ActiveScalar() = default;
  ActiveScalar(double v) : value_(v) {}  // NOLINT: implicit passive promotion

  ActiveScalar(const ActiveScalar& o) : value_(o.value_) { assign_copy(o); }
  ActiveScalar(ActiveScalar&& o) noexcept : value_(o.value_), id_(o.id_) { o.id_ = 0; }

  ~ActiveScalar() { release(); }

  ActiveScalar& operator=(const ActiveScalar& o) {
    if (this == &o) return *this;
    value_ = o.value_;
    release();
    assign_copy(o);
    return *this;
  }

  ActiveScalar& operator=(ActiveScalar&& o) noexcept {
    if (this == &o) return *this;
    release();
    value_ = o.value_;
    id_ = o.id_;
    o.id_ = 0;
    return *this;
  }

  // Passive overwrite: drops the adjoint association.
  ActiveScalar& operator=(double v) {
    release();
    value_ = v;
    return *this;
  }

  double value() const { return value_; }
  Identifier identifier() const { return id_; }
  bool active() const { return id_ != 0; }

  ActiveScalar& operator+=(const ActiveScalar& o) {
    return update(value_ + o.value_, 1.0, 1.0, o.id_);
  }
  ActiveScalar& operator-=(const ActiveScalar& o) {
    return update(value_ - o.value_, 1.0, -1.0, o.id_);
  }
  ActiveScalar& operator*=(const ActiveScalar& o) {
    return update(value_ * o.value_, o.value_, value_, o.id_);
  }
  ActiveScalar& operator/=(const ActiveScalar& o) {
    const double inv = 1.0 / o.value_;
    return update(value_ * inv, inv, -value_ * inv * inv, o.id_);
  }

  // Builds a result from up to N arguments. Passive arguments are dropped;
  // with no active argument nothing is recorded.
  template <std::size_t N>
  static ActiveScalar record(double value, const std::array<double, N>& partials,
                             const std::array<Identifier, N>& ids) {
    ActiveScalar r(value);
    Runtime& rt = Runtime::get();
    Tape& tape = rt.tape();
    if (!tape.active()) return r;
    std::array<double, N> p{};
    std::array<Identifier, N> a{};
    int n = 0;
    for (std::size_t i = 0; i < N; ++i) {
      if (ids[i] != 0) {
        p[static_cast<std::size_t>(n)] = partials[i];
        a[static_cast<std::size_t>(n)] = ids[i];
        ++n;
      }
    }
    if (n == 0) return r;
    r.id_ = rt.ids().acquire();
    tape.push_statement(r.id_, p.data(), a.data(), n);
    return r;
  }

 private:
  friend void register_input(ActiveScalar&);
  friend void register_output(ActiveScalar&);
  friend void record_statement(ActiveScalar&, std::span<const double>,
                               std::span<const Identifier>);

  void release() {
    if (id_ != 0) {
      Runtime::get().ids().release(id_);
      id_ = 0;
    }
  }

  // Identifier handling of copies: the linear scheme shares the identifier
  // without recording, the reuse scheme records a copy statement.
  void assign_copy(const ActiveScalar& o) {
    if (o.id_ == 0) return;
    Runtime& rt = Runtime::get();
    if (rt.scheme() == Scheme::Linear) {
      id_ = o.id_;
      return;
    }
    Tape& tape = rt.tape();
    if (!tape.active()) return;
    const double one = 1.0;
    id_ = rt.ids().acquire();
    tape.push_statement(id_, &one, &o.id_, 1);
  }

  // this = phi(this, other) with partials (d_self, d_other). The old
  // identifier is released before the new one is drawn.
  ActiveScalar& update(double value, double d_self, double d_other, Identifier other) {
    Runtime& rt = Runtime::get();
    Tape& tape = rt.tape();
    const Identifier self = id_;
    value_ = value;
    if (!tape.active() || (self == 0 && other == 0)) {
      release();
      return *this;
    }
    std::array<double, 2> p{};
    std::array<Identifier, 2> a{};
    int n = 0;
    if (self != 0) {
      p[0] = d_self;
      a[0] = self;
      n = 1;
    }
    if (other != 0) {
      p[static_cast<std::size_t>(n)] = d_other;
      a[static_cast<std::size_t>(n)] = other;
      ++n;
    }
    release();
    id_ = rt.ids().acquire();
    tape.push_statement(id_, p.data(), a.data(), n);
    return *this;
  }

  double value_ = 0.0;
  Identifier id_ = 0;
};

// Gives v a fresh identifier without recording a statement.
inline void register_input(ActiveScalar& v) {
  Runtime& rt = Runtime::get();
  if (!rt.tape().active()) {
    throw ContractViolation("register_input requires an active tape");
  }
  v.release();
  v.id_ = rt.ids().acquire();
}

// Gives an active output its own identifier through a recorded copy, so that
// seeding it cannot alias any input.
inline void register_output(ActiveScalar& v) {
  Runtime& rt = Runtime::get();
  Tape& tape = rt.tape();
  if (!tape.active() || v.id_ == 0) return;
  const Identifier old = v.id_;
  const double one = 1.0;
  v.id_ = rt.ids().acquire();
  tape.push_statement(v.id_, &one, &old, 1);
  rt.ids().release(old);
}

// Low-level recording entry point: result keeps its value and receives a
// fresh identifier for the statement result = phi(args) with the given
// partials. Passive arguments are skipped.
inline void record_statement(ActiveScalar& result, std::span<const double> partials,
                             std::span<const Identifier> ids) {
  if (partials.size() != ids.size()) {
    throw ContractViolation("record_statement: partials and identifiers differ in length");
  }
  Runtime& rt = Runtime::get();
  Tape& tape = rt.tape();
  if (!tape.active()) throw ContractViolation("record_statement requires an active tape");
  std::vector<double> p;
  std::vector<Identifier> a;
  p.reserve(ids.size());
  a.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != 0) {
      p.push_back(partials[i]);
      a.push_back(ids[i]);
    }
  }
  result.release();
  if (a.empty()) return;
  result.id_ = rt.ids().acquire();
  tape.push_statement(result.id_, p.data(), a.data(), static_cast<int>(a.size()));
}

// Arithmetic. Each operator records exactly one statement.

inline ActiveScalar operator+(const ActiveScalar& a, const ActiveScalar& b) {
  return ActiveScalar::record<2>(a.value() + b.value(), {1.0, 1.0},
                                 {a.identifier(), b.identifier()});
}
inline ActiveScalar operator-(const ActiveScalar& a, const ActiveScalar& b) {
  return ActiveScalar::record<2>(a.value() - b.value(), {1.0, -1.0},
                                 {a.identifier(), b.identifier()});
}
inline ActiveScalar operator*(const ActiveScalar& a, const ActiveScalar& b) {
  return ActiveScalar::record<2>(a.value() * b.value(), {b.value(), a.value()},
                                 {a.identifier(), b.identifier()});
}
inline ActiveScalar operator/(const ActiveScalar& a, const ActiveScalar& b) {
  const double inv = 1.0 / b.value();
  return ActiveScalar::record<2>(a.value() * inv, {inv, -a.value() * inv * inv},
                                 {a.identifier(), b.identifier()});
}
inline ActiveScalar operator-(const ActiveScalar& a) {
  return ActiveScalar::record<1>(-a.value(), {-1.0}, {a.identifier()});
}
inline ActiveScalar operator+(const ActiveScalar& a) { return a; }

inline ActiveScalar operator+(const ActiveScalar& a, double b) {
  return ActiveScalar::record<1>(a.value() + b, {1.0}, {a.identifier()});
}
inline ActiveScalar operator+(double a, const ActiveScalar& b) { return b + a; }
inline ActiveScalar operator-(const ActiveScalar& a, double b) {
  return ActiveScalar::record<1>(a.value() - b, {1.0}, {a.identifier()});
}
inline ActiveScalar operator-(double a, const ActiveScalar& b) {
  return ActiveScalar::record<1>(a - b.value(), {-1.0}, {b.identifier()});
}
inline ActiveScalar operator*(const ActiveScalar& a, double b) {
  return ActiveScalar::record<1>(a.value() * b, {b}, {a.identifier()});
}
inline ActiveScalar operator*(double a, const ActiveScalar& b) { return b * a; }
inline ActiveScalar operator/(const ActiveScalar& a, double b) {
  return ActiveScalar::record<1>(a.value() / b, {1.0 / b}, {a.identifier()});
}
inline ActiveScalar operator/(double a, const ActiveScalar& b) {
  const double inv = 1.0 / b.value();
  return ActiveScalar::record<1>(a * inv, {-a * inv * inv}, {b.identifier()});
}

inline bool operator==(const ActiveScalar& a, const ActiveScalar& b) { return a.value() == b.value(); }
inline auto operator<=>(const ActiveScalar& a, const ActiveScalar& b) { return a.value() <=> b.value(); }
inline bool operator==(const ActiveScalar& a, double b) { return a.value() == b; }
inline auto operator<=>(const ActiveScalar& a, double b) { return a.value() <=> b; }

inline ActiveScalar sin(const ActiveScalar& x) {
  return ActiveScalar::record<1>(std::sin(x.value()), {std::cos(x.value())}, {x.identifier()});
}
inline ActiveScalar cos(const ActiveScalar& x) {
  return ActiveScalar::record<1>(std::cos(x.value()), {-std::sin(x.value())}, {x.identifier()});
}
inline ActiveScalar tan(const ActiveScalar& x) {
  const double t = std::tan(x.value());
  return ActiveScalar::record<1>(t, {1.0 + t * t}, {x.identifier()});
}
inline ActiveScalar exp(const ActiveScalar& x) {
  const double e = std::exp(x.value());
  return ActiveScalar::record<1>(e, {e}, {x.identifier()});
}
inline ActiveScalar log(const ActiveScalar& x) {
  return ActiveScalar::record<1>(std::log(x.value()), {1.0 / x.value()}, {x.identifier()});
}
inline ActiveScalar sqrt(const ActiveScalar& x) {
  const double s = std::sqrt(x.value());
  return ActiveScalar::record<1>(s, {0.5 / s}, {x.identifier()});
}
inline ActiveScalar tanh(const ActiveScalar& x) {
  const double t = std::tanh(x.value());
  return ActiveScalar::record<1>(t, {1.0 - t * t}, {x.identifier()});
}
inline ActiveScalar atan(const ActiveScalar& x) {
  const double v = x.value();
  return ActiveScalar::record<1>(std::atan(v), {1.0 / (1.0 + v * v)}, {x.identifier()});
}
// abs is differentiated with derivative sign(x) (0 at the kink).
inline ActiveScalar abs(const ActiveScalar& x) {
  const double v = x.value();
  return ActiveScalar::record<1>(std::abs(v), {v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0)},
                                 {x.identifier()});
}
inline ActiveScalar pow(const ActiveScalar& x, double e) {
  const double v = x.value();
  return ActiveScalar::record<1>(std::pow(v, e), {e * std::pow(v, e - 1.0)}, {x.identifier()});
}
inline ActiveScalar pow(const ActiveScalar& x, const ActiveScalar& y) {
  const double v = std::pow(x.value(), y.value());
  return ActiveScalar::record<2>(
      v, {y.value() * std::pow(x.value(), y.value() - 1.0), v * std::log(x.value())},
      {x.identifier(), y.identifier()});
}

inline std::ostream& operator<<(std::ostream& os, const ActiveScalar& x) {
  return os << x.value();
}

}  // namespace partape
