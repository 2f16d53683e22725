#include "spext/partition.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace spext {

std::vector<std::vector<int>> GroupPartition::members() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(group_count));
  for (std::size_t i = 0; i < group_of_station.size(); ++i)
    out[static_cast<std::size_t>(group_of_station[i])].push_back(static_cast<int>(i));
  return out;
}

void GroupPartition::validate() const {
  if (group_count < 1 && !group_of_station.empty()) throw std::domain_error("partition has no groups");
  std::vector<int> sizes(static_cast<std::size_t>(std::max(group_count, 0)), 0);
  for (int g : group_of_station) {
    if (g < 0 || g >= group_count) throw std::domain_error("partition group index out of range");
    ++sizes[static_cast<std::size_t>(g)];
  }
  for (int s : sizes)
    if (s == 0) throw std::domain_error("partition has an empty group");
}

GroupPartition make_partition(int m, int n_g, std::uint64_t seed) {
  if (m < 1 || n_g < 1 || n_g > m) throw std::domain_error("make_partition: need 1 <= n_g <= m");
  const int groups = (m + n_g - 1) / n_g;
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  GroupPartition p;
  p.group_count = groups;
  p.target_size = n_g;
  p.group_of_station.assign(static_cast<std::size_t>(m), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    p.group_of_station[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % groups);
  return p;
}

GroupPartition singleton_partition(int m) {
  GroupPartition p;
  p.group_count = m;
  p.target_size = 1;
  p.group_of_station.resize(static_cast<std::size_t>(m));
  std::iota(p.group_of_station.begin(), p.group_of_station.end(), 0);
  return p;
}

}  // namespace spext
