#pragma once

#include <cstdint>
#include <limits>
#include <string>

namespace astarkg {

// Exact path algebras. A value aggregates walks (oplus) built by composing
// edge weights along a walk (otimes). zero() is the oplus identity and otimes
// annihilator; one() is the otimes identity (the empty-walk value).
struct MinPlusAlgebra {
  using Value = double;
  static constexpr bool is_semiring = true;
  static const char* name() { return "min-plus"; }
  static Value zero() { return std::numeric_limits<double>::infinity(); }
  static Value one() { return 0.0; }
  static Value default_weight() { return 1.0; }
  static Value oplus(Value a, Value b) { return a < b ? a : b; }
  static Value otimes(Value a, Value b) { return a + b; }
};

struct CountingAlgebra {
  using Value = std::int64_t;
  static constexpr bool is_semiring = true;
  static const char* name() { return "counting"; }
  static Value zero() { return 0; }
  static Value one() { return 1; }
  static Value default_weight() { return 1; }
  static Value oplus(Value a, Value b) { return a + b; }
  static Value otimes(Value a, Value b) { return a * b; }
};

struct BooleanAlgebra {
  using Value = std::uint8_t;
  static constexpr bool is_semiring = true;
  static const char* name() { return "boolean"; }
  static Value zero() { return 0; }
  static Value one() { return 1; }
  static Value default_weight() { return 1; }
  static Value oplus(Value a, Value b) { return a | b; }
  static Value otimes(Value a, Value b) { return static_cast<Value>(a & b); }
};

// The learned vector algebra (elementwise product / sum aggregation over
// d-dimensional states) lives in model.hpp; it drops the semiring guarantees
// (no exact distributivity in floating point, PNA aggregation has no oplus
// identity), so it is flagged rather than pretending.
struct NeuralAlgebraInfo {
  static constexpr bool is_semiring = false;
  std::uint32_t dim = 32;
};

enum class AlgebraKind { kMinPlus, kCounting, kBoolean, kNeural };

inline const char* algebra_name(AlgebraKind k) {
  switch (k) {
    case AlgebraKind::kMinPlus: return "min-plus";
    case AlgebraKind::kCounting: return "counting";
    case AlgebraKind::kBoolean: return "boolean";
    case AlgebraKind::kNeural: return "neural";
  }
  return "?";
}

// How edge weights are produced for the neural algebra.
enum class EdgeWeightMode {
  kEmbedding,  // one d-vector per (relation, layer)
  kLinear,     // W_r q + b_r per (relation, layer)
};

}  // namespace astarkg
