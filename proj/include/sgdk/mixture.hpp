#pragma once
/// Requirements on the discrete mixtures consumed by the SGD-k runner and the
/// local-geometry estimator.

#include "sgdk/linalg.hpp"

#include <concepts>
#include <cstddef>
#include <vector>

namespace sgdk {

/// A finite mixture of differentiable components with sampling weights.
template <class F>
concept Mixture = requires(const F& f, std::size_t i, const Vec& x) {
  { f.size() } -> std::convertible_to<std::size_t>;
  { f.dim() } -> std::convertible_to<Eigen::Index>;
  { f.probs() } -> std::convertible_to<const std::vector<double>&>;
  { f.gradient(i, x) } -> std::convertible_to<Vec>;
  { f.expected_gradient(x) } -> std::convertible_to<Vec>;
};

/// A mixture with exact component Hessians.
template <class F>
concept HessianMixture = Mixture<F> && requires(const F& f, std::size_t i, const Vec& x) {
  { f.hessian(i, x) } -> std::convertible_to<Mat>;
};

/// A mixture whose component Hessians are diagonal and available as vectors.
template <class F>
concept DiagonalHessianMixture = Mixture<F> && requires(const F& f, std::size_t i, const Vec& x) {
  { f.hessian_diagonal(i, x) } -> std::convertible_to<Vec>;
};

/// A mixture that can add a component gradient into an accumulator without allocating.
template <class F>
concept AccumulatingMixture = Mixture<F> && requires(const F& f, std::size_t i, const Vec& x, Vec& acc) {
  f.accumulate_gradient(i, x, acc);
};

template <Mixture F>
void add_component_gradient(const F& f, std::size_t i, const Vec& x, Vec& acc) {
  if constexpr (AccumulatingMixture<F>) {
    f.accumulate_gradient(i, x, acc);
  } else {
    acc += f.gradient(i, x);
  }
}

}  // namespace sgdk
