#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "roa/parallel.hpp"
#include "roa/random.hpp"

using namespace roa;

TEST_CASE("derived seeds are stable and label-sensitive") {
  CHECK(derive_seed(1, "ucb.candidates.1") == derive_seed(1, "ucb.candidates.1"));
  CHECK(derive_seed(1, "ucb.candidates.1") != derive_seed(1, "ucb.candidates.2"));
  CHECK(derive_seed(1, "region.volume") != derive_seed(2, "region.volume"));
}

TEST_CASE("uniform draws stay in range and repeat under the same seed") {
  Rng a(42, "test"), b(42, "test");
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
  const Eigen::VectorXd p = a.uniform_point(Eigen::Vector2d(-1, 5), Eigen::Vector2d(1, 6));
  CHECK(p[0] >= -1.0);
  CHECK(p[0] <= 1.0);
  CHECK(p[1] >= 5.0);
  CHECK(p[1] <= 6.0);
}

TEST_CASE("parallel_for covers every index once regardless of thread count") {
  for (const char* threads : {"1", "3", "8"}) {
    setenv("ROA_THREADS", threads, 1);
    CHECK(thread_count() == static_cast<unsigned>(std::stoi(threads)));
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += static_cast<int>(i); });
    for (std::size_t i = 0; i < hits.size(); ++i) CHECK(hits[i] == static_cast<int>(i));
  }
  std::atomic<int> calls{0};
  parallel_for(0, [&](std::size_t) { ++calls; });
  CHECK(calls == 0);
  unsetenv("ROA_THREADS");
  CHECK(thread_count() >= 1);
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  setenv("ROA_THREADS", "4", 1);
  CHECK_THROWS_AS(parallel_for(100,
                               [](std::size_t i) {
                                 if (i == 77) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  unsetenv("ROA_THREADS");
}
