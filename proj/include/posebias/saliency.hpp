#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "posebias/geometry.hpp"
#include "posebias/io.hpp"
#include "posebias/tensor.hpp"

namespace posebias::saliency {

// Single-channel map, row-major height x width.
struct RawMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct SaliencyMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // [0, 1]
  bool degenerate = false;     // constant input, all values zero
  double min_raw = 0.0;
  double max_raw = 0.0;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  // round(255 * value) grayscale.
  io::ImageBuffer render() const;
};

struct CandidateSet {
  Tensor rotations;    // N x 3
  Tensor confidences;  // N (or N x 1)
};

struct BestCandidate {
  std::size_t index = 0;
  geometry::Vec3 rotation;
};

// Highest confidence wins; ties go to the lowest index.
BestCandidate select_best_candidate(const CandidateSet &candidates);

// Signed per-pixel mean over the channels of an H x W x 3 input gradient.
RawMap channel_mean(const Tensor &grad);

// channel_mean, min-max normalized at the gradient's own resolution.
SaliencyMap vanilla_map(const Tensor &grad);

// Concatenates H x W x C tensors along the channel axis in argument order.
Tensor concat_channels(const Tensor &f1, const Tensor &f2, const Tensor &f3);

// Per-channel L2 norm over spatial positions of an H x W x K gradient.
std::vector<double> l2_pooled_gradient(const Tensor &grad);

// sum_k |alpha_k F_k| with alpha from l2_pooled_gradient(grad).
RawMap gradcam_regression(const Tensor &features, const Tensor &grad);

// Same map with caller-supplied channel weights.
RawMap weighted_abs_sum(const Tensor &features, std::span<const double> alpha);

// ReLU(sum_k alpha_k A_k) with alpha_k = spatial mean of the gradient.
RawMap gradcam_classification(const Tensor &activations, const Tensor &grad);

// Min-max normalize (constant -> zeros), resize bilinearly to out_w x out_h
// (half-pixel centers, edge clamp), then stretch back to span [0, 1].
SaliencyMap finalize_map(const RawMap &raw, int out_w, int out_h);

// Regression Grad-CAM over three tapped layers.
//
// Per-component mode: one gradient triple per rotation component. Each
// component gets its own map; the combined map uses
// alpha = sqrt(sum_c alpha_c^2), the L2 norm of the Jacobian over both the
// spatial positions and the rotation components.
//
// Scalarized mode: a single gradient triple for an already-scalar output.
struct LayerTriple {
  Tensor first;
  Tensor second;
  Tensor third;
};

struct RegressionResult {
  RawMap combined;
  std::vector<RawMap> components;  // empty in scalarized mode
};

RegressionResult gradcam_regression_layers(const LayerTriple &features,
                                           std::span<const LayerTriple> component_grads);

// Jet-like colormap of `map` alpha-blended (0.5) over `image`. Sizes must match.
io::ImageBuffer overlay(const io::ImageBuffer &image, const SaliencyMap &map);

}  // namespace posebias::saliency
