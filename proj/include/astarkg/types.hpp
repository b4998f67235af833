#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace astarkg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr EntityId kNoEntity = static_cast<EntityId>(-1);

struct Triplet {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triplet& a, const Triplet& b) {
    return a.head == b.head && a.relation == b.relation && a.tail == b.tail;
  }
  friend bool operator<(const Triplet& a, const Triplet& b) {
    if (a.head != b.head) return a.head < b.head;
    if (a.relation != b.relation) return a.relation < b.relation;
    return a.tail < b.tail;
  }
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace astarkg
