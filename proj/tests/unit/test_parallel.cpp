#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <string>
#include <vector>

#include "faceret/parallel.hpp"

using namespace faceret;

TEST_CASE("every index runs once") {
  for (std::size_t threads : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("called"); });
  CHECK(default_thread_count() >= 1);
}

TEST_CASE("lowest failing index wins") {
  for (std::size_t threads : {1u, 3u, 16u}) {
    try {
      parallel_for(200, threads, [](std::size_t i) {
        if (i % 50 == 17) throw std::runtime_error(std::to_string(i));
      });
      FAIL("no exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "17");
    }
  }
}
