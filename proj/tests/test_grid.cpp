#include "boldlle/grid.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>

using namespace boldlle;

TEST_CASE("linear_index examples") {
  const GridDims d{57, 68, 42, 1};
  CHECK(linear_index({0, 0, 0}, d) == 0);
  CHECK(linear_index({1, 0, 0}, d) == 1);
  CHECK(linear_index({56, 67, 41}, d) == 56 + 57 * (67 + 68 * 41));
  CHECK(linear_index({56, 67, 41}, d) == 162791);
  CHECK_THROWS_AS(linear_index({57, 0, 0}, d), std::out_of_range);
  CHECK_THROWS_AS(linear_index({0, -1, 0}, d), std::out_of_range);
  CHECK_THROWS_AS(linear_index({0, 0, 42}, d), std::out_of_range);
}

TEST_CASE("linear_index and voxel_coord are inverse") {
  const GridDims d{4, 3, 5, 1};
  std::set<Index> seen;
  for (Index z = 0; z < d.H; ++z)
    for (Index y = 0; y < d.W; ++y)
      for (Index x = 0; x < d.L; ++x) {
        const Index i = linear_index({x, y, z}, d);
        seen.insert(i);
        const Coord c = voxel_coord(i, d);
        CHECK((c.x == x && c.y == y && c.z == z));
      }
  CHECK(seen.size() == static_cast<std::size_t>(d.voxels()));
  for (Index i = 0; i < d.voxels(); ++i) CHECK(linear_index(voxel_coord(i, d), d) == i);
}

TEST_CASE("cube_neighborhood counts") {
  const GridDims d{7, 7, 7, 1};
  CHECK(cube_neighborhood(linear_index({3, 3, 3}, d), 1, d).size() == 26);
  CHECK(cube_neighborhood(linear_index({3, 3, 3}, d), 2, d).size() == 124);
  CHECK(interior_neighbor_count(1) == 26);
  CHECK(interior_neighbor_count(2) == 124);
  const GridDims small{3, 3, 3, 1};
  CHECK(cube_neighborhood(0, 1, small).size() == 7);
  CHECK(cube_neighborhood(26, 1, small).size() == 7);
  CHECK_THROWS(cube_neighborhood(0, 0, small));
}

TEST_CASE("cube_neighborhood matches brute force and is sorted") {
  for (const GridDims d : {GridDims{5, 4, 3, 1}, GridDims{1, 1, 6, 1}, GridDims{6, 6, 6, 1}})
    for (int r = 1; r <= 3; ++r)
      for (Index i = 0; i < d.voxels(); ++i) {
        const auto got = cube_neighborhood(i, r, d);
        CHECK(got == oracle::brute_neighbors(i, r, d));
        CHECK(std::is_sorted(got.begin(), got.end()));
        CHECK(std::find(got.begin(), got.end(), i) == got.end());
      }
}

TEST_CASE("neighborhood symmetry and interior count on 8^3") {
  const GridDims d{8, 8, 8, 1};
  for (int r = 1; r <= 2; ++r) {
    const NeighborhoodSpec topo(d, r);
    for (Index i = 0; i < d.voxels(); ++i) {
      for (Index j : topo[i]) CHECK(std::binary_search(topo[j].begin(), topo[j].end(), i));
      const Coord c = voxel_coord(i, d);
      const bool interior = c.x >= r && c.y >= r && c.z >= r && c.x < d.L - r && c.y < d.W - r && c.z < d.H - r;
      if (interior) CHECK(static_cast<Index>(topo[i].size()) == interior_neighbor_count(r));
      else CHECK(static_cast<Index>(topo[i].size()) < interior_neighbor_count(r));
    }
  }
}

TEST_CASE("validate_scan") {
  const GridDims d{3, 4, 5, 6};
  auto scan = oracle::random_scan(d, 1);
  CHECK(validate_scan(scan).constant_voxels.empty());

  auto bad = scan;
  bad.samples(linear_index({1, 2, 3}, d), 4) = std::numeric_limits<double>::quiet_NaN();
  try {
    validate_scan(bad);
    FAIL("expected ScanError");
  } catch (const ScanError& e) {
    CHECK(std::string(e.what()).find("(1,2,3,4)") != std::string::npos);
  }
  bad.samples(linear_index({1, 2, 3}, d), 4) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate_scan(bad), ScanError);

  auto flat = scan;
  flat.samples.row(0).setConstant(2.5);
  const auto v = validate_scan(flat);
  CHECK(v.constant_voxels == std::vector<Index>{0});
}

TEST_CASE("ScanVolume rejects mismatched shapes") {
  CHECK_THROWS(ScanVolume(GridDims{2, 2, 2, 3}, Eigen::MatrixXd::Zero(8, 2)));
  CHECK_THROWS(ScanVolume(GridDims{0, 2, 2, 3}, Eigen::MatrixXd::Zero(0, 3)));
  CHECK_NOTHROW(ScanVolume(GridDims{1, 1, 1, 1}, Eigen::MatrixXd::Zero(1, 1)));
}
