#include <algorithm>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"

#include "diversify/queue.hpp"

using namespace diversify;
namespace fs = std::filesystem;

namespace {

PatternSet make_set(uint32_t n, const std::string& prefix = "pad") {
  PatternSet set;
  set.method = Method::Pad;
  set.population = n;
  set.seed = 1;
  for (uint32_t i = 0; i < n; ++i) {
    GeneratedPattern gp;
    gp.generation_index = i;
    gp.pattern.kind = PatternKind::NopInsertion;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%04u", prefix.c_str(), i);
    gp.pattern.label = buf;
    set.patterns.push_back(std::move(gp));
  }
  return set;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("divq-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("enqueue shuffles labels deterministically per seed") {
  const PatternSet set = make_set(12);
  const auto a = DistributionQueue::enqueue(set, 7, QueuePolicy::Strict);
  const auto b = DistributionQueue::enqueue(set, 7, QueuePolicy::Strict);
  const auto c = DistributionQueue::enqueue(set, 8, QueuePolicy::Strict);
  CHECK(a.remaining() == b.remaining());
  CHECK(a.remaining() != c.remaining());
  // same multiset either way
  auto sa = a.remaining();
  auto sc = c.remaining();
  std::sort(sa.begin(), sa.end());
  std::sort(sc.begin(), sc.end());
  CHECK(sa == sc);
  CHECK(sa == [&] {
    auto l = set.labels();
    std::sort(l.begin(), l.end());
    return l;
  }());
}

TEST_CASE("strict drain dispenses each label exactly once, then fails with guidance") {
  auto q = DistributionQueue::enqueue(make_set(25), 3, QueuePolicy::Strict);
  std::set<std::string> seen;
  for (int i = 0; i < 25; ++i) CHECK(seen.insert(q.pop_next()).second);
  CHECK(seen.size() == 25);
  CHECK(q.remaining().empty());
  try {
    q.pop_next();
    FAIL("expected QueueExhausted");
  } catch (const QueueExhausted& e) {
    const std::string msg = e.what();
    CHECK(msg.find("reuse") != std::string::npos);
    CHECK(msg.find("extend") != std::string::npos);
  }
}

TEST_CASE("singleton queue") {
  auto q = DistributionQueue::enqueue(make_set(1), 9, QueuePolicy::Strict);
  CHECK(q.pop_next() == "pad-0000");
  CHECK_THROWS_AS(q.pop_next(), QueueExhausted);
}

TEST_CASE("reuse policy wraps to the recorded dispensing order") {
  auto q = DistributionQueue::enqueue(make_set(5), 11, QueuePolicy::Reuse);
  std::vector<std::string> first, second, third;
  for (int i = 0; i < 5; ++i) first.push_back(q.pop_next());
  for (int i = 0; i < 5; ++i) second.push_back(q.pop_next());
  for (int i = 0; i < 5; ++i) third.push_back(q.pop_next());
  CHECK(second == first);
  CHECK(third == first);
  CHECK(q.dispensed().size() == 15);
}

TEST_CASE("extend policy fails with a complementary-set hint") {
  auto q = DistributionQueue::enqueue(make_set(2), 4, QueuePolicy::Extend);
  q.pop_next();
  q.pop_next();
  try {
    q.pop_next();
    FAIL("expected QueueExhausted");
  } catch (const QueueExhausted& e) {
    CHECK(std::string(e.what()).find("complementary") != std::string::npos);
  }
}

TEST_CASE("save/load round-trips exactly, timestamps included") {
  TempDir dir;
  auto q = DistributionQueue::enqueue(make_set(8), 21, QueuePolicy::Reuse);
  for (int i = 0; i < 3; ++i) q.pop_next();
  const std::string path = dir.file("queue.json");
  q.save(path);
  auto back = DistributionQueue::load(path);
  CHECK(back == q);
  CHECK(back.remaining() == q.remaining());
  CHECK(back.dispensed() == q.dispensed());  // DispensedEntry == includes `at`
  CHECK(back.seed() == q.seed());
  CHECK(back.policy() == q.policy());
  // both continue identically
  CHECK(back.pop_next() == q.pop_next());
  // no stray temp file left behind
  CHECK(!fs::exists(path + ".tmp"));
}

TEST_CASE("reuse wrap survives a save/load cycle") {
  TempDir dir;
  auto q = DistributionQueue::enqueue(make_set(4), 5, QueuePolicy::Reuse);
  std::vector<std::string> first;
  for (int i = 0; i < 4; ++i) first.push_back(q.pop_next());
  q.save(dir.file("q.json"));
  auto back = DistributionQueue::load(dir.file("q.json"));
  for (int i = 0; i < 4; ++i) CHECK(back.pop_next() == first[i]);
}

TEST_CASE("equality ignores timestamps but not order or policy") {
  const PatternSet set = make_set(6);
  auto a = DistributionQueue::enqueue(set, 2, QueuePolicy::Strict);
  auto b = DistributionQueue::enqueue(set, 2, QueuePolicy::Strict);
  CHECK(a == b);
  a.pop_next();
  CHECK_FALSE(a == b);
  b.pop_next();
  CHECK(a == b);  // same label popped; wall-clock stamps may differ
  const auto c = DistributionQueue::enqueue(set, 2, QueuePolicy::Reuse);
  CHECK_FALSE(b == c);
  const auto d = DistributionQueue::enqueue(set, 3, QueuePolicy::Strict);
  CHECK_FALSE(b == d);
}

TEST_CASE("concurrent pops never dispense a label twice") {
  auto q = DistributionQueue::enqueue(make_set(200), 6, QueuePolicy::Strict);
  std::mutex collect_mu;
  std::vector<std::string> popped;
  auto worker = [&] {
    for (;;) {
      try {
        std::string label = q.pop_next();
        std::lock_guard<std::mutex> lock(collect_mu);
        popped.push_back(std::move(label));
      } catch (const QueueExhausted&) {
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  CHECK(popped.size() == 200);
  CHECK(std::set<std::string>(popped.begin(), popped.end()).size() == 200);
}

TEST_CASE("enqueue input validation") {
  CHECK_THROWS_AS(DistributionQueue::enqueue(PatternSet{}, 1, QueuePolicy::Strict),
                  ValidationError);
  PatternSet dup = make_set(3);
  dup.patterns[2].pattern.label = dup.patterns[0].pattern.label;
  CHECK_THROWS_AS(DistributionQueue::enqueue(dup, 1, QueuePolicy::Strict),
                  ValidationError);
}

TEST_CASE("policy names round-trip and reject junk") {
  for (auto p : {QueuePolicy::Strict, QueuePolicy::Reuse, QueuePolicy::Extend})
    CHECK(policy_from_name(policy_name(p)) == p);
  CHECK_THROWS_AS(policy_from_name("lenient"), ValidationError);
}

TEST_CASE("load rejects broken state files") {
  TempDir dir;
  CHECK_THROWS_AS(DistributionQueue::load(dir.file("missing.json")), ValidationError);

  std::ofstream(dir.file("junk.json")) << "{ not json";
  CHECK_THROWS_AS(DistributionQueue::load(dir.file("junk.json")), ValidationError);

  std::ofstream(dir.file("partial.json")) << R"({"seed": 1, "policy": "strict"})";
  CHECK_THROWS_AS(DistributionQueue::load(dir.file("partial.json")), ValidationError);

  std::ofstream(dir.file("empty.json"))
      << R"({"seed": 1, "policy": "strict", "remaining": [], "dispensed": []})";
  CHECK_THROWS_AS(DistributionQueue::load(dir.file("empty.json")), ValidationError);

  std::ofstream(dir.file("badpolicy.json"))
      << R"({"seed": 1, "policy": "nope", "remaining": ["a"], "dispensed": []})";
  CHECK_THROWS_AS(DistributionQueue::load(dir.file("badpolicy.json")), ValidationError);
}
