#pragma once
/// Seed derivation and uniform sampling in Euclidean balls.

#include "sgdk/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace sgdk {

using Rng = std::mt19937_64;

/// One round of the splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

/// 64-bit FNV-1a hash of a string.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of one run, independent of the order in which runs execute.
constexpr std::uint64_t run_seed(std::uint64_t master_seed, std::string_view cell_id, std::uint64_t run_index) {
  return hash_combine(hash_combine(master_seed, fnv1a(cell_id)), run_index);
}

/// A point uniform in the closed ball of the given radius about center.
inline Vec uniform_in_ball(const Vec& center, double radius, Rng& rng) {
  const Eigen::Index p = center.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec dir(p);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < p; ++i) dir(i) = normal(rng);
    norm = dir.norm();
  } while (norm == 0.0);
  const double rad = radius * std::pow(unif(rng), 1.0 / static_cast<double>(p));
  return center + (rad / norm) * dir;
}

}  // namespace sgdk
