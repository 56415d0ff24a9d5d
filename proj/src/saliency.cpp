#include "posebias/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace posebias::saliency {

namespace {

void require_rank3(const Tensor &t, const char *what) {
  if (t.rank() != 3)
    fail(ErrorCode::kShapeMismatch, std::string(what) + " must be a rank-3 H x W x C tensor");
}

void require_same_shape(const Tensor &a, const Tensor &b, const char *what) {
  require_rank3(a, what);
  require_rank3(b, what);
  if (a.dims() != b.dims())
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": feature and gradient shapes differ");
}

// Sum in ascending order of value, so the result does not depend on the order
// in which channels were supplied.
double order_free_sum(std::vector<double> &terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

// (v - min) / (max - min); all zeros when max == min.
void min_max_normalize(std::vector<double> &values, bool &degenerate, double &lo, double &hi) {
  lo = *std::min_element(values.begin(), values.end());
  hi = *std::max_element(values.begin(), values.end());
  degenerate = !(hi > lo);
  if (degenerate) {
    std::fill(values.begin(), values.end(), 0.0);
    return;
  }
  const double range = hi - lo;
  for (double &v : values) v = std::clamp((v - lo) / range, 0.0, 1.0);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

io::ImageBuffer SaliencyMap::render() const {
  auto img = io::ImageBuffer::filled(width, height, 1);
  for (std::size_t i = 0; i < values.size(); ++i) img.samples[i] = to_byte(values[i]);
  return img;
}

BestCandidate select_best_candidate(const CandidateSet &c) {
  const Tensor &rot = c.rotations;
  const Tensor &conf = c.confidences;
  if (rot.rank() != 2 || rot.dim(1) != 3)
    fail(ErrorCode::kShapeMismatch, "candidate rotations must be N x 3");
  const bool conf_ok =
      (conf.rank() == 1) || (conf.rank() == 2 && conf.dim(1) == 1);
  if (!conf_ok || conf.dim(0) != rot.dim(0))
    fail(ErrorCode::kShapeMismatch, "candidate confidences must have length N");
  const auto scores = conf.data();
  if (scores.empty()) fail(ErrorCode::kInvalidArgument, "empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  const auto r = rot.data();
  return {best, geometry::Vec3(r[3 * best], r[3 * best + 1], r[3 * best + 2])};
}

RawMap channel_mean(const Tensor &grad) {
  require_rank3(grad, "input gradient");
  if (grad.dim(2) != 3) fail(ErrorCode::kShapeMismatch, "input gradient must have 3 channels");
  RawMap raw{static_cast<int>(grad.dim(1)), static_cast<int>(grad.dim(0)), {}};
  raw.values.resize(grad.dim(0) * grad.dim(1));
  const auto g = grad.data();
  for (std::size_t p = 0; p < raw.values.size(); ++p) {
    // Sign retained.
    raw.values[p] = (static_cast<double>(g[3 * p]) + g[3 * p + 1] + g[3 * p + 2]) / 3.0;
  }
  return raw;
}

SaliencyMap vanilla_map(const Tensor &grad) {
  RawMap raw = channel_mean(grad);
  SaliencyMap map;
  map.width = raw.width;
  map.height = raw.height;
  map.values = std::move(raw.values);
  min_max_normalize(map.values, map.degenerate, map.min_raw, map.max_raw);
  return map;
}

Tensor concat_channels(const Tensor &f1, const Tensor &f2, const Tensor &f3) {
  require_rank3(f1, "feature map");
  require_rank3(f2, "feature map");
  require_rank3(f3, "feature map");
  if (f1.dims() != f2.dims() || f1.dims() != f3.dims())
    fail(ErrorCode::kShapeMismatch, "concatenated feature maps must share H, W and C");
  const std::size_t h = f1.dim(0), w = f1.dim(1), c = f1.dim(2);
  std::vector<float> out(h * w * 3 * c);
  const Tensor *parts[3] = {&f1, &f2, &f3};
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t b = 0; b < 3; ++b)
      std::copy_n(parts[b]->data().begin() + p * c, c, out.begin() + (p * 3 + b) * c);
  return Tensor({h, w, 3 * c}, std::move(out));
}

std::vector<double> l2_pooled_gradient(const Tensor &grad) {
  require_rank3(grad, "gradient");
  const std::size_t k = grad.dim(2);
  const std::size_t positions = grad.dim(0) * grad.dim(1);
  std::vector<double> sums(k, 0.0);
  const auto g = grad.data();
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t c = 0; c < k; ++c) {
      const double v = g[p * k + c];
      sums[c] += v * v;
    }
  for (double &s : sums) s = std::sqrt(s);
  return sums;
}

RawMap weighted_abs_sum(const Tensor &features, std::span<const double> alpha) {
  require_rank3(features, "feature map");
  const std::size_t k = features.dim(2);
  if (alpha.size() != k)
    fail(ErrorCode::kShapeMismatch, "channel weight count differs from feature channels");
  RawMap map{static_cast<int>(features.dim(1)), static_cast<int>(features.dim(0)), {}};
  const std::size_t positions = features.dim(0) * features.dim(1);
  map.values.resize(positions);
  const auto f = features.data();
  std::vector<double> terms(k);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t c = 0; c < k; ++c) terms[c] = std::abs(alpha[c] * f[p * k + c]);
    map.values[p] = order_free_sum(terms);
  }
  return map;
}

RawMap gradcam_regression(const Tensor &features, const Tensor &grad) {
  require_same_shape(features, grad, "gradcam_regression");
  const std::vector<double> alpha = l2_pooled_gradient(grad);
  return weighted_abs_sum(features, alpha);
}

RawMap gradcam_classification(const Tensor &activations, const Tensor &grad) {
  require_same_shape(activations, grad, "gradcam_classification");
  const std::size_t k = grad.dim(2);
  const std::size_t positions = grad.dim(0) * grad.dim(1);
  std::vector<double> alpha(k, 0.0);
  const auto g = grad.data();
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t c = 0; c < k; ++c) alpha[c] += g[p * k + c];
  for (double &a : alpha) a /= static_cast<double>(positions);

  RawMap map{static_cast<int>(grad.dim(1)), static_cast<int>(grad.dim(0)), {}};
  map.values.resize(positions);
  const auto a = activations.data();
  std::vector<double> terms(k);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t c = 0; c < k; ++c) terms[c] = alpha[c] * a[p * k + c];
    map.values[p] = std::max(0.0, order_free_sum(terms));
  }
  return map;
}

SaliencyMap finalize_map(const RawMap &raw, int out_w, int out_h) {
  if (raw.values.empty() || raw.width < 1 || raw.height < 1 ||
      raw.values.size() != static_cast<std::size_t>(raw.width) * raw.height)
    fail(ErrorCode::kInvalidArgument, "raw saliency map is empty or inconsistent");
  if (out_w < 1 || out_h < 1)
    fail(ErrorCode::kInvalidArgument, "output saliency size must be positive");

  std::vector<double> normalized = raw.values;
  SaliencyMap map;
  min_max_normalize(normalized, map.degenerate, map.min_raw, map.max_raw);
  map.width = out_w;
  map.height = out_h;
  map.values.assign(static_cast<std::size_t>(out_w) * out_h, 0.0);
  if (map.degenerate) return map;

  const auto sample_axis = [](int out_i, int out_n, int in_n, int &i0, int &i1, double &w) {
    double src = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
    i0 = static_cast<int>(std::floor(src));
    i1 = std::min(i0 + 1, in_n - 1);
    w = src - i0;
  };
  for (int y = 0; y < out_h; ++y) {
    int y0, y1;
    double wy;
    sample_axis(y, out_h, raw.height, y0, y1, wy);
    for (int x = 0; x < out_w; ++x) {
      int x0, x1;
      double wx;
      sample_axis(x, out_w, raw.width, x0, x1, wx);
      const auto v = [&](int xx, int yy) {
        return normalized[static_cast<std::size_t>(yy) * raw.width + xx];
      };
      const double top = (1.0 - wx) * v(x0, y0) + wx * v(x1, y0);
      const double bottom = (1.0 - wx) * v(x0, y1) + wx * v(x1, y1);
      map.values[static_cast<std::size_t>(y) * out_w + x] = (1.0 - wy) * top + wy * bottom;
    }
  }
  // Interpolation can miss interior extrema; restore the [0, 1] span.
  double lo, hi;
  bool flat = false;
  min_max_normalize(map.values, flat, lo, hi);
  map.degenerate = flat;
  return map;
}

RegressionResult gradcam_regression_layers(const LayerTriple &features,
                                           std::span<const LayerTriple> component_grads) {
  if (component_grads.empty())
    fail(ErrorCode::kInvalidArgument, "at least one gradient triple is required");
  const Tensor f = concat_channels(features.first, features.second, features.third);
  RegressionResult result;
  std::vector<double> combined_alpha(f.dim(2), 0.0);
  for (const LayerTriple &g3 : component_grads) {
    const Tensor g = concat_channels(g3.first, g3.second, g3.third);
    require_same_shape(f, g, "gradcam_regression");
    const std::vector<double> alpha = l2_pooled_gradient(g);
    for (std::size_t c = 0; c < alpha.size(); ++c) combined_alpha[c] += alpha[c] * alpha[c];
    if (component_grads.size() > 1) result.components.push_back(weighted_abs_sum(f, alpha));
  }
  if (component_grads.size() == 1) {
    result.combined = gradcam_regression(
        f, concat_channels(component_grads[0].first, component_grads[0].second,
                           component_grads[0].third));
    return result;
  }
  for (double &a : combined_alpha) a = std::sqrt(a);
  result.combined = weighted_abs_sum(f, combined_alpha);
  return result;
}

io::ImageBuffer overlay(const io::ImageBuffer &image, const SaliencyMap &map) {
  if (image.width != map.width || image.height != map.height)
    fail(ErrorCode::kShapeMismatch, "overlay image and saliency map sizes differ");
  auto out = io::ImageBuffer::filled(image.width, image.height, 3);
  const auto ramp = [](double x) { return std::clamp(1.5 - std::abs(x), 0.0, 1.0); };
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double v = map.at(x, y);
      const double color[3] = {ramp(4.0 * v - 3.0), ramp(4.0 * v - 2.0), ramp(4.0 * v - 1.0)};
      const std::uint8_t *src = image.pixel(x, y);
      std::uint8_t *dst = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double base = image.channels == 3 ? src[c] : src[0];
        dst[c] = static_cast<std::uint8_t>(std::lround(0.5 * base + 0.5 * 255.0 * color[c]));
      }
    }
  }
  return out;
}

}  // namespace posebias::saliency
