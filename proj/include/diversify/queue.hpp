#pragma once

// Pattern distribution queue: dispenses pattern labels one build at a time
// and persists its state so dispensing survives process restarts. Policies
// govern what happens when the queue runs dry:
//
//   strict  pop fails; the operator must decide what to do next
//   reuse   the queue refills with the original dispensing order and cycles
//   extend  pop fails with a hint to generate a complementary pattern set
//
// Pops are serialized by an internal mutex (single-writer contract within a
// process); persistence is write-to-temp + atomic rename, so a crash leaves
// either the old state file or the new one, never a torn write.

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "diversify/patterns.hpp"

namespace diversify {

enum class QueuePolicy : uint8_t { Strict, Reuse, Extend };

std::string policy_name(QueuePolicy p);
QueuePolicy policy_from_name(const std::string& name);  // ValidationError on unknown

struct DispensedEntry {
  std::string label;
  std::string at;  // ISO 8601 UTC, seconds precision
  bool operator==(const DispensedEntry&) const = default;
};

class DistributionQueue {
 public:
  DistributionQueue() = default;
  DistributionQueue(const DistributionQueue& other);
  DistributionQueue& operator=(const DistributionQueue& other);

  // remaining = seeded uniform shuffle of the set's labels.
  static DistributionQueue enqueue(const PatternSet& set, uint64_t seed,
                                   QueuePolicy policy);

  // Next label in order; under Reuse an empty queue refills with the original
  // dispensing order (the first full cycle of the dispensed log). Throws
  // QueueExhausted under Strict and Extend.
  std::string pop_next();

  void save(const std::string& path) const;
  static DistributionQueue load(const std::string& path);

  std::vector<std::string> remaining() const;
  std::vector<DispensedEntry> dispensed() const;
  uint64_t seed() const { return seed_; }
  QueuePolicy policy() const { return policy_; }

  // Timestamps are excluded: two queues are equal when they would dispense
  // the same labels in the same order under the same policy.
  bool operator==(const DistributionQueue& other) const;

 private:
  std::vector<std::string> remaining_;
  std::vector<DispensedEntry> dispensed_;
  uint64_t seed_ = 0;
  QueuePolicy policy_ = QueuePolicy::Strict;
  uint32_t cycle_ = 0;  // distinct label count; length of one full cycle
  mutable std::mutex mu_;
};

}  // namespace diversify
