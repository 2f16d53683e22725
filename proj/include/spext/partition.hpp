#pragma once

#include <cstdint>
#include <vector>

namespace spext {

/// Assignment of stations to composite-likelihood groups.
struct GroupPartition {
  std::vector<int> group_of_station;
  int group_count = 0;
  int target_size = 0;

  std::size_t station_count() const { return group_of_station.size(); }
  /// Station indices per group, ascending within each group.
  std::vector<std::vector<int>> members() const;
  void validate() const;
};

/// Random balanced partition of m stations into ceil(m / n_g) groups whose
/// sizes differ by at most one. Deterministic given the seed.
GroupPartition make_partition(int m, int n_g, std::uint64_t seed);

/// Every station in a group of its own.
GroupPartition singleton_partition(int m);

}  // namespace spext
