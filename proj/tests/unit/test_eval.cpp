#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "vhd/errors.hpp"
#include "vhd/eval.hpp"
#include "vhd/rng.hpp"

using namespace vhd;

namespace {

// All-prefix precision oracle: recounts positives from scratch per prefix.
double ap_oracle(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)]; });
  int total_pos = 0;
  for (auto l : labels) total_pos += l;
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    if (!labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])]) continue;
    int hits = 0;
    for (int i = 0; i < k; ++i) hits += labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    sum += static_cast<double>(hits) / k;
  }
  return sum / total_pos;
}

double top5_oracle(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)]; });
  int total_pos = 0;
  for (auto l : labels) total_pos += l;
  double sum = 0.0;
  for (int k = 1; k <= 5; ++k) {
    if (!labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])]) continue;
    int hits = 0;
    for (int i = 0; i < k; ++i) hits += labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    sum += static_cast<double>(hits) / k;
  }
  return sum / std::min(total_pos, 5);
}

}  // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("average precision basics") {
  // perfect ranking
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.2, 0.1},
                          std::vector<std::uint8_t>{1, 1, 0, 0}) == 1.0);
  // hand-computed precision-at-hit value
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.7},
                          std::vector<std::uint8_t>{1, 0, 1}) ==
        doctest::Approx(0.5 * (1.0 + 2.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(average_precision(std::vector<double>{0.5, 0.4},
                                    std::vector<std::uint8_t>{0, 0}),
                  DataError);
  CHECK_THROWS_AS(average_precision(std::vector<double>{0.5},
                                    std::vector<std::uint8_t>{0, 1}),
                  ShapeError);
}

TEST_CASE("average precision matches the prefix oracle exhaustively (T <= 6)") {
  for (int t = 1; t <= 6; ++t) {
    std::vector<double> scores(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) scores[static_cast<std::size_t>(i)] = t - i;
    std::sort(scores.begin(), scores.end());
    do {
      for (unsigned bits = 1; bits < (1u << t); ++bits) {
        std::vector<std::uint8_t> labels(static_cast<std::size_t>(t));
        for (int i = 0; i < t; ++i) labels[static_cast<std::size_t>(i)] = (bits >> i) & 1u;
        CHECK(average_precision(scores, labels) == ap_oracle(scores, labels));
      }
    } while (std::next_permutation(scores.begin(), scores.end()));
  }
}

TEST_CASE("average precision is invariant under monotone transforms and tie order") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int t = 2 + static_cast<int>(rng.next_below(15));
    std::vector<double> scores(static_cast<std::size_t>(t));
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(t));
    for (auto& s : scores) s = rng.next_uniform(-2, 2);
    for (auto& l : labels) l = rng.next_below(2) ? 1 : 0;
    labels[0] = 1;
    const double base = average_precision(scores, labels);
    std::vector<double> squashed = scores;
    for (double& s : squashed) s = std::tanh(s) * 3.0 + 10.0;  // strictly increasing
    CHECK(average_precision(squashed, labels) == doctest::Approx(base).epsilon(1e-12));

    // promoting a positive over the negative directly above it never hurts
    std::vector<int> order(static_cast<std::size_t>(t));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    for (int r = 1; r < t; ++r) {
      const int hi = order[static_cast<std::size_t>(r - 1)], lo = order[static_cast<std::size_t>(r)];
      if (!labels[static_cast<std::size_t>(hi)] && labels[static_cast<std::size_t>(lo)]) {
        std::vector<double> swapped = scores;
        std::swap(swapped[static_cast<std::size_t>(hi)], swapped[static_cast<std::size_t>(lo)]);
        CHECK(average_precision(swapped, labels) >= base - 1e-12);
        break;
      }
    }
  }
}

TEST_CASE("top5 map truncation") {
  // five positives at the top
  CHECK(top5_map(std::vector<double>{9, 8, 7, 6, 5, 1, 0},
                 std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0, 1}) == 1.0);
  // exactly the frozen truncated pattern [1,0,1,0,0] with P=2
  CHECK(top5_map(std::vector<double>{9, 8, 7, 6, 5, 4},
                 std::vector<std::uint8_t>{1, 0, 1, 0, 0, 0}) ==
        doctest::Approx(0.5 * (1.0 + 2.0 / 3.0)).epsilon(1e-15));
  // positives exist but none ranked inside the top five
  CHECK(top5_map(std::vector<double>{9, 8, 7, 6, 5, 4, 3},
                 std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1, 1}) == 0.0);
  CHECK_THROWS_AS(top5_map(std::vector<double>{1, 2, 3},
                           std::vector<std::uint8_t>{1, 0, 1}),
                  DataError);

  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = 5 + static_cast<int>(rng.next_below(30));
    std::vector<double> scores(static_cast<std::size_t>(t));
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(t));
    for (auto& s : scores) {
      s = rng.next_uniform(-1, 1);
      if (rng.next_below(2)) s = std::round(s * 10) / 10;  // inject ties
    }
    for (auto& l : labels) l = rng.next_below(3) == 0 ? 1 : 0;
    labels[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(t)))] = 1;
    CHECK(top5_map(scores, labels) == doctest::Approx(top5_oracle(scores, labels)).epsilon(1e-12));
  }
}

TEST_CASE("report aggregation follows category means") {
  {
    const EvalReport r = aggregate_report({{"v1", "dog", 0.8}}, "map");
    CHECK(r.dataset_average == 0.8);
    CHECK(r.category_map.at("dog") == 0.8);
  }
  {
    const EvalReport r = aggregate_report(
        {{"v1", "a", 0.5}, {"v2", "a", 0.7}, {"v3", "b", 0.8}}, "map");
    CHECK(r.category_map.at("a") == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.category_map.at("b") == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.dataset_average == doctest::Approx(0.7).epsilon(1e-15));
  }
  {
    // six-category fixture averaged by hand
    std::vector<VideoScore> scores;
    const char* cats[6] = {"dog", "gym", "parkour", "skate", "ski", "surf"};
    const double aps[6][2] = {{0.4, 0.6}, {0.5, 0.7}, {0.9, 0.9},
                              {0.3, 0.5}, {1.0, 0.8}, {0.6, 0.6}};
    double want = 0.0;
    for (int c = 0; c < 6; ++c) {
      scores.push_back({std::string("v") + std::to_string(2 * c), cats[c], aps[c][0]});
      scores.push_back({std::string("v") + std::to_string(2 * c + 1), cats[c], aps[c][1]});
      want += 0.5 * (aps[c][0] + aps[c][1]);
    }
    want /= 6.0;
    const EvalReport r = aggregate_report(scores, "map");
    CHECK(r.dataset_average == doctest::Approx(want).epsilon(1e-15));
    CHECK(r.video_ap.size() == 12);
  }
  CHECK_THROWS_AS(aggregate_report({}, "map"), DataError);
}

TEST_SUITE_END();
