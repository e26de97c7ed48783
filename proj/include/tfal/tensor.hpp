#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "tfal/error.hpp"

namespace tfal {

enum class DType : std::uint8_t { kFloat32 = 1, kUInt16 = 2, kUInt8 = 3 };

constexpr std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::kFloat32: return 4;
    case DType::kUInt16: return 2;
    case DType::kUInt8: return 1;
  }
  return 0;
}

constexpr std::string_view dtype_name(DType d) {
  switch (d) {
    case DType::kFloat32: return "float32";
    case DType::kUInt16: return "uint16";
    case DType::kUInt8: return "uint8";
  }
  return "?";
}

template <class T>
constexpr DType dtype_of() {
  if constexpr (std::is_same_v<T, float>) return DType::kFloat32;
  else if constexpr (std::is_same_v<T, std::uint16_t>) return DType::kUInt16;
  else {
    static_assert(std::is_same_v<T, std::uint8_t>, "unsupported tensor element type");
    return DType::kUInt8;
  }
}

inline std::size_t shape_product(std::span<const std::uint64_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::uint64_t b) { return a * static_cast<std::size_t>(b); });
}

/// Dense row-major array with one of the supported element types.
class Tensor {
 public:
  using Storage = std::variant<std::vector<float>, std::vector<std::uint16_t>, std::vector<std::uint8_t>>;

  Tensor() : shape_{0}, data_(std::vector<float>{}) {}

  template <class T>
  Tensor(std::vector<std::uint64_t> shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    require(shape_product(shape_) == size(), ErrorCode::kShapeMismatch,
            "tensor shape does not match value count");
  }

  const std::vector<std::uint64_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }

  DType dtype() const {
    return std::visit([](const auto& v) { return dtype_of<typename std::decay_t<decltype(v)>::value_type>(); },
                      data_);
  }

  std::size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, data_);
  }

  template <class T>
  const std::vector<T>& values() const {
    const auto* v = std::get_if<std::vector<T>>(&data_);
    require(v != nullptr, ErrorCode::kUnsupportedDtype,
            "tensor holds " + std::string(dtype_name(dtype())) + ", requested " +
                std::string(dtype_name(dtype_of<T>())));
    return *v;
  }

  template <class T>
  std::vector<T>& values() {
    return const_cast<std::vector<T>&>(std::as_const(*this).values<T>());
  }

  const Storage& storage() const { return data_; }

  // Bitwise equality: two float tensors compare equal only if every element
  // has the same bit pattern.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.shape_ != b.shape_ || a.dtype() != b.dtype()) return false;
    return std::visit(
        [&](const auto& va) {
          using V = std::decay_t<decltype(va)>;
          const auto& vb = std::get<V>(b.data_);
          if constexpr (std::is_same_v<V, std::vector<float>>) {
            return std::equal(va.begin(), va.end(), vb.begin(), vb.end(), [](float x, float y) {
              return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
            });
          } else {
            return va == vb;
          }
        },
        a.data_);
  }

 private:
  std::vector<std::uint64_t> shape_;
  Storage data_;
};

/// Row-major 2-D grid of scalars (affinity maps, masks).
template <class T>
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), values(h * w, fill) {}
  Grid(std::size_t h, std::size_t w, std::vector<T> v) : height(h), width(w), values(std::move(v)) {
    require(values.size() == h * w, ErrorCode::kShapeMismatch, "grid value count mismatch");
  }

  std::size_t size() const { return values.size(); }
  T& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using FloatMap = Grid<float>;
using Mask = Grid<std::uint8_t>;

/// Per-pixel class indices in [0, classes).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<std::uint16_t> values;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::size_t c, std::uint16_t fill = 0)
      : height(h), width(w), classes(c), values(h * w, fill) {}
  LabelMap(std::size_t h, std::size_t w, std::size_t c, std::vector<std::uint16_t> v)
      : height(h), width(w), classes(c), values(std::move(v)) {
    require(values.size() == h * w, ErrorCode::kShapeMismatch, "label value count mismatch");
    for (auto x : values)
      require(x < classes, ErrorCode::kShapeMismatch,
              "label " + std::to_string(x) + " outside class range " + std::to_string(classes));
  }

  std::size_t size() const { return values.size(); }
  std::uint16_t& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  std::uint16_t at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  std::uint16_t& operator[](std::size_t i) { return values[i]; }
  std::uint16_t operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// h x w x channels embedding, pixel-major (channels contiguous).
struct FeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> values;

  FeatureMap() = default;
  FeatureMap(std::size_t h, std::size_t w, std::size_t c, std::vector<float> v = {})
      : height(h), width(w), channels(c), values(std::move(v)) {
    if (values.empty()) values.assign(h * w * c, 0.0f);
    require(values.size() == h * w * c, ErrorCode::kShapeMismatch, "feature value count mismatch");
  }

  std::size_t pixels() const { return height * width; }
  std::span<float> pixel(std::size_t i) { return {values.data() + i * channels, channels}; }
  std::span<const float> pixel(std::size_t i) const { return {values.data() + i * channels, channels}; }
};

/// H x W x classes per-pixel probabilities.
struct PredictionMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<float> probs;

  PredictionMap() = default;
  PredictionMap(std::size_t h, std::size_t w, std::size_t c, std::vector<float> p = {})
      : height(h), width(w), classes(c), probs(std::move(p)) {
    if (probs.empty()) probs.assign(h * w * c, 0.0f);
    require(probs.size() == h * w * c, ErrorCode::kShapeMismatch, "prediction value count mismatch");
  }

  std::size_t pixels() const { return height * width; }
  std::span<const float> pixel(std::size_t i) const { return {probs.data() + i * classes, classes}; }
  std::span<float> pixel(std::size_t i) { return {probs.data() + i * classes, classes}; }

  // Lowest class index wins ties.
  std::uint16_t argmax(std::size_t i) const {
    auto p = pixel(i);
    return static_cast<std::uint16_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
};

inline PredictionMap one_hot(const LabelMap& y, std::size_t classes) {
  require(classes >= y.classes, ErrorCode::kShapeMismatch, "one_hot class count too small");
  PredictionMap p(y.height, y.width, classes);
  for (std::size_t i = 0; i < y.size(); ++i) p.probs[i * classes + y[i]] = 1.0f;
  return p;
}

// Conversions between typed domain objects and raw tensors.

inline Tensor to_tensor(const LabelMap& y) { return Tensor({y.height, y.width}, y.values); }
inline Tensor to_tensor(const FeatureMap& f) { return Tensor({f.height, f.width, f.channels}, f.values); }
inline Tensor to_tensor(const PredictionMap& p) { return Tensor({p.height, p.width, p.classes}, p.probs); }
template <class T>
Tensor to_tensor(const Grid<T>& g) { return Tensor({g.height, g.width}, g.values); }

/// `classes == 0` infers the class count as max label + 1.
inline LabelMap label_map_from(const Tensor& t, std::size_t classes = 0) {
  require(t.rank() == 2, ErrorCode::kShapeMismatch, "label tensor must be rank 2");
  std::vector<std::uint16_t> v;
  if (t.dtype() == DType::kUInt16) {
    v = t.values<std::uint16_t>();
  } else if (t.dtype() == DType::kUInt8) {
    const auto& src = t.values<std::uint8_t>();
    v.assign(src.begin(), src.end());
  } else {
    throw Error(ErrorCode::kUnsupportedDtype, "label tensor must be uint16 or uint8");
  }
  if (classes == 0) classes = v.empty() ? 1 : std::size_t{*std::max_element(v.begin(), v.end())} + 1;
  return LabelMap(t.shape()[0], t.shape()[1], classes, std::move(v));
}

inline FeatureMap feature_map_from(const Tensor& t) {
  require(t.rank() == 3, ErrorCode::kShapeMismatch, "feature tensor must be rank 3 (h, w, c)");
  require(t.dtype() == DType::kFloat32, ErrorCode::kUnsupportedDtype, "feature tensor must be float32");
  return FeatureMap(t.shape()[0], t.shape()[1], t.shape()[2], t.values<float>());
}

inline PredictionMap prediction_from(const Tensor& t) {
  require(t.rank() == 3, ErrorCode::kShapeMismatch, "prediction tensor must be rank 3 (H, W, C)");
  require(t.dtype() == DType::kFloat32, ErrorCode::kUnsupportedDtype, "prediction tensor must be float32");
  return PredictionMap(t.shape()[0], t.shape()[1], t.shape()[2], t.values<float>());
}

template <class T>
Grid<T> grid_from(const Tensor& t) {
  require(t.rank() == 2, ErrorCode::kShapeMismatch, "grid tensor must be rank 2");
  return Grid<T>(t.shape()[0], t.shape()[1], t.values<T>());
}

}  // namespace tfal
