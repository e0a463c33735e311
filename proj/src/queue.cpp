#include "diversify/queue.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <set>

#include "diversify/rng.hpp"

namespace diversify {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

uint32_t distinct_labels(const std::vector<std::string>& remaining,
                         const std::vector<DispensedEntry>& dispensed) {
  std::set<std::string> all(remaining.begin(), remaining.end());
  for (const auto& e : dispensed) all.insert(e.label);
  return static_cast<uint32_t>(all.size());
}

}  // namespace

std::string policy_name(QueuePolicy p) {
  switch (p) {
    case QueuePolicy::Strict: return "strict";
    case QueuePolicy::Reuse: return "reuse";
    case QueuePolicy::Extend: return "extend";
  }
  return "?";
}

QueuePolicy policy_from_name(const std::string& name) {
  if (name == "strict") return QueuePolicy::Strict;
  if (name == "reuse") return QueuePolicy::Reuse;
  if (name == "extend") return QueuePolicy::Extend;
  fail("unknown queue policy '" + name + "'");
}

DistributionQueue::DistributionQueue(const DistributionQueue& other) {
  std::lock_guard<std::mutex> lock(other.mu_);
  remaining_ = other.remaining_;
  dispensed_ = other.dispensed_;
  seed_ = other.seed_;
  policy_ = other.policy_;
  cycle_ = other.cycle_;
}

DistributionQueue& DistributionQueue::operator=(const DistributionQueue& other) {
  if (this == &other) return *this;
  DistributionQueue copy(other);
  std::lock_guard<std::mutex> lock(mu_);
  remaining_ = std::move(copy.remaining_);
  dispensed_ = std::move(copy.dispensed_);
  seed_ = copy.seed_;
  policy_ = copy.policy_;
  cycle_ = copy.cycle_;
  return *this;
}

DistributionQueue DistributionQueue::enqueue(const PatternSet& set, uint64_t seed,
                                             QueuePolicy policy) {
  if (set.patterns.empty()) fail("cannot enqueue an empty pattern set");
  DistributionQueue q;
  q.remaining_ = set.labels();
  Rng::derive(seed, kStreamQueue).shuffle(q.remaining_);
  q.seed_ = seed;
  q.policy_ = policy;
  q.cycle_ = distinct_labels(q.remaining_, {});
  if (q.cycle_ != q.remaining_.size()) fail("pattern labels must be unique");
  return q;
}

std::string DistributionQueue::pop_next() {
  std::lock_guard<std::mutex> lock(mu_);
  if (remaining_.empty()) {
    switch (policy_) {
      case QueuePolicy::Strict:
        throw QueueExhausted(
            "queue exhausted under the strict policy; either re-init with "
            "--policy reuse to cycle the recorded dispensing order, or generate "
            "a complementary pattern set and init a fresh queue (--policy extend)");
      case QueuePolicy::Extend:
        throw QueueExhausted(
            "queue exhausted under the extend policy: generate a complementary "
            "pattern set for this program and init a new queue from it (or use "
            "--policy reuse to cycle the recorded order)");
      case QueuePolicy::Reuse:
        for (uint32_t i = 0; i < cycle_; ++i) remaining_.push_back(dispensed_[i].label);
        break;
    }
  }
  std::string label = remaining_.front();
  remaining_.erase(remaining_.begin());
  dispensed_.push_back({label, utc_now_iso8601()});
  return label;
}

void DistributionQueue::save(const std::string& path) const {
  nlohmann::ordered_json j;
  {
    std::lock_guard<std::mutex> lock(mu_);
    j["seed"] = seed_;
    j["policy"] = policy_name(policy_);
    j["remaining"] = remaining_;
    auto& arr = j["dispensed"] = nlohmann::ordered_json::array();
    for (const auto& e : dispensed_) {
      nlohmann::ordered_json je;
      je["label"] = e.label;
      je["at"] = e.at;
      arr.push_back(std::move(je));
    }
  }
  const std::string tmp = path + ".tmp";
  write_text_file(tmp, j.dump(2) + "\n");
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail("cannot replace '" + path + "': " + ec.message());
}

DistributionQueue DistributionQueue::load(const std::string& path) {
  const nlohmann::json j = load_json_file(path);
  DistributionQueue q;
  try {
    q.seed_ = j.at("seed").get<uint64_t>();
    q.policy_ = policy_from_name(j.at("policy").get<std::string>());
    q.remaining_ = j.at("remaining").get<std::vector<std::string>>();
    for (const auto& je : j.at("dispensed"))
      q.dispensed_.push_back(
          {je.at("label").get<std::string>(), je.at("at").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed queue state json: ") + e.what());
  }
  q.cycle_ = distinct_labels(q.remaining_, q.dispensed_);
  if (q.cycle_ == 0) fail("queue state holds no labels");
  return q;
}

std::vector<std::string> DistributionQueue::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  return remaining_;
}

std::vector<DispensedEntry> DistributionQueue::dispensed() const {
  std::lock_guard<std::mutex> lock(mu_);
  return dispensed_;
}

bool DistributionQueue::operator==(const DistributionQueue& other) const {
  if (this == &other) return true;
  std::scoped_lock lock(mu_, other.mu_);
  if (seed_ != other.seed_ || policy_ != other.policy_ || remaining_ != other.remaining_)
    return false;
  if (dispensed_.size() != other.dispensed_.size()) return false;
  for (size_t i = 0; i < dispensed_.size(); ++i)
    if (dispensed_[i].label != other.dispensed_[i].label) return false;
  return true;
}

}  // namespace diversify
