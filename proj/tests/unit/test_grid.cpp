#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "meltpool/error.hpp"
#include "meltpool/grid.hpp"

using namespace meltpool;

namespace {

GridSpec small_spec() {
  GridSpec s;
  s.domain = DomainBox{1.0, 0.5, 2.0};
  s.coarse_spacing = 0.1;
  s.bands[0] = RefinementBand{-0.1, 0.1, 0.025};
  s.bands[1] = RefinementBand{-0.1, 0.0, 0.025};
  s.bands[2] = RefinementBand{0.5, 1.0, 0.025};
  return s;
}

TemperatureField affine_field(const std::shared_ptr<const GradedGrid>& g) {
  TemperatureField f(g, 0.0);
  for (std::size_t k = 0; k < g->nodes(2); ++k) {
    for (std::size_t j = 0; j < g->nodes(1); ++j) {
      for (std::size_t i = 0; i < g->nodes(0); ++i) {
        const Point3 p = g->node(i, j, k);
        f.values[g->index(i, j, k)] = 3.0 + 2.0 * p.x - 5.0 * p.y + 0.7 * p.z;
      }
    }
  }
  return f;
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("uniform axis has ceil(L/h)+1 nodes") {
    for (double h : {0.1, 0.3, 0.07}) {
      const auto x = build_axis(0.0, 2.0, h, std::nullopt, 1.3);
      CHECK(x.size() == static_cast<std::size_t>(std::ceil(2.0 / h - 1e-12)) + 1);
      CHECK(x.front() == 0.0);
      CHECK(x.back() == 2.0);
    }
  }

  TEST_CASE("refined axis respects band spacing and growth limit") {
    const auto x = build_axis(-1.0, 1.0, 0.1, RefinementBand{-0.15, 0.15, 0.01}, 1.3);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      const double h = x[i + 1] - x[i];
      CHECK(h > 0.0);
      if (x[i] >= -0.15 - 1e-12 && x[i + 1] <= 0.15 + 1e-12) CHECK(h <= 0.01 + 1e-12);
      CHECK(h <= 0.1 + 1e-12);
      if (i + 2 < x.size()) {
        const double h2 = x[i + 2] - x[i + 1];
        CHECK(std::max(h, h2) / std::min(h, h2) <= kMaxCellRatio + 1e-9);
      }
    }
  }

  TEST_CASE("degenerate axis rejected") {
    CHECK_THROWS_AS(build_axis(0.0, 0.1, 0.5, std::nullopt, 1.3), InvalidInput);
    CHECK_THROWS_AS(build_axis(0.0, 0.0, 0.1, std::nullopt, 1.3), InvalidInput);
    CHECK_THROWS_AS(build_axis(0.0, 1.0, 0.1, RefinementBand{0.5, 1.5, 0.01}, 1.3), InvalidInput);
  }

  TEST_CASE("build is deterministic") {
    const auto a = build_grid(small_spec());
    const auto b = build_grid(small_spec());
    for (int axis = 0; axis < 3; ++axis) CHECK(a->coords(axis) == b->coords(axis));
  }

  TEST_CASE("interpolation at nodes and cell centres") {
    const auto g = build_grid(small_spec());
    TemperatureField f(g, 0.0);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1000.0);
    for (auto& v : f.values) v = U(rng);
    for (std::size_t n = 0; n < 50; ++n) {
      const std::size_t i = rng() % g->nodes(0), j = rng() % g->nodes(1), k = rng() % g->nodes(2);
      CHECK(interpolate(f, g->node(i, j, k)) == f.at(i, j, k));
    }
    const std::size_t i = 7, j = 3, k = 12;
    double mean = 0.0;
    for (int c = 0; c < 8; ++c) mean += f.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
    mean /= 8.0;
    const Point3 lo = g->node(i, j, k), hi = g->node(i + 1, j + 1, k + 1);
    const Point3 centre{0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), 0.5 * (lo.z + hi.z)};
    CHECK(interpolate(f, centre) == doctest::Approx(mean));
  }

  TEST_CASE("interpolation reproduces affine fields and is bounded") {
    const auto g = build_grid(small_spec());
    const TemperatureField f = affine_field(g);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> X(-0.5, 0.5), Y(-0.5, 0.0), Z(0.0, 2.0);
    for (int n = 0; n < 500; ++n) {
      const Point3 p{X(rng), Y(rng), Z(rng)};
      CHECK(interpolate(f, p) == doctest::Approx(3.0 + 2.0 * p.x - 5.0 * p.y + 0.7 * p.z).epsilon(1e-12));
    }
    TemperatureField r(g, 0.0);
    for (auto& v : r.values) v = Z(rng);
    for (int n = 0; n < 500; ++n) {
      const Point3 p{X(rng), Y(rng), Z(rng)};
      const auto [i, fx] = g->locate(0, p.x);
      const auto [j, fy] = g->locate(1, p.y);
      const auto [k, fz] = g->locate(2, p.z);
      double lo = 1e300, hi = -1e300;
      for (int c = 0; c < 8; ++c) {
        const double v = r.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double v = interpolate(r, p);
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    }
    CHECK_THROWS_AS(interpolate(f, Point3{0.0, 0.1, 1.0}), InvalidInput);
  }
}
