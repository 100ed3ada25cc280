#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aop3d/error.hpp"

namespace aop3d {

// Voxel counts in (z, y, x) order; z is the slowest axis in memory.
struct Shape {
  std::int64_t z = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;

  constexpr std::size_t size() const { return static_cast<std::size_t>(z * y * x); }
  constexpr std::size_t index(std::int64_t zi, std::int64_t yi, std::int64_t xi) const {
    return static_cast<std::size_t>((zi * y + yi) * x + xi);
  }
  constexpr bool contains(std::int64_t zi, std::int64_t yi, std::int64_t xi) const {
    return zi >= 0 && yi >= 0 && xi >= 0 && zi < z && yi < y && xi < x;
  }
  constexpr bool valid() const { return z >= 1 && y >= 1 && x >= 1; }
  constexpr std::int64_t operator[](int axis) const { return axis == 0 ? z : (axis == 1 ? y : x); }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

using Spacing = std::array<double, 3>;

struct Coord {
  std::int64_t z = 0;
  std::int64_t y = 0;
  std::int64_t x = 0;
  friend constexpr bool operator==(const Coord&, const Coord&) = default;
};

template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;

  explicit Volume(Shape shape, Spacing spacing = {1.0, 1.0, 1.0}, T fill = T{})
      : shape_(shape), spacing_(spacing) {
    if (!shape.valid()) throw DimensionError("volume shape must be >= 1 on every axis, got " + to_string(shape));
    data_.assign(shape.size(), fill);
  }

  Volume(Shape shape, Spacing spacing, std::vector<T> data)
      : shape_(shape), spacing_(spacing), data_(std::move(data)) {
    if (!shape.valid()) throw DimensionError("volume shape must be >= 1 on every axis, got " + to_string(shape));
    if (data_.size() != shape.size()) {
      throw DimensionError("volume payload has " + std::to_string(data_.size()) + " voxels, shape " +
                           to_string(shape) + " needs " + std::to_string(shape.size()));
    }
  }

  const Shape& shape() const { return shape_; }
  const Spacing& spacing() const { return spacing_; }
  void set_spacing(const Spacing& s) { spacing_ = s; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) { return data_[shape_.index(z, y, x)]; }
  const T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) const {
    return data_[shape_.index(z, y, x)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Out-of-bounds reads return `outside`.
  T get_or(std::int64_t z, std::int64_t y, std::int64_t x, T outside) const {
    return shape_.contains(z, y, x) ? data_[shape_.index(z, y, x)] : outside;
  }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const std::vector<T>& vector() const { return data_; }

  friend bool operator==(const Volume& a, const Volume& b) {
    return a.shape_ == b.shape_ && a.spacing_ == b.spacing_ && a.data_ == b.data_;
  }

 private:
  Shape shape_{};
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<T> data_;
};

// Normalized intensities in [0, 1].
using IntensityVolume = Volume<float>;
// 0 is background, k > 0 an instance id.
using LabelVolume = Volume<std::uint32_t>;

enum class Connectivity { Six = 6, Eighteen = 18, TwentySix = 26 };

Connectivity connectivity_from_int(int c);

// Neighbor offsets (dz, dy, dx) for the given connectivity, excluding the origin.
std::span<const std::array<int, 3>> neighbor_offsets(Connectivity c);

// Maps the distinct nonzero ids, in ascending order, onto 1..n.
LabelVolume relabel_consecutive(const LabelVolume& labels, std::uint32_t* count = nullptr);

// Foreground is any nonzero voxel. Components are numbered in raster-scan
// order of their first voxel.
LabelVolume connected_components(const LabelVolume& mask, Connectivity c = Connectivity::TwentySix,
                                 std::uint32_t* count = nullptr);

// Like connected_components but only joins voxels carrying the same id, so a
// label split into several pieces yields one component per piece.
LabelVolume label_components(const LabelVolume& labels, Connectivity c = Connectivity::TwentySix,
                             std::uint32_t* count = nullptr);

std::uint32_t max_label(const LabelVolume& labels);

// Sorted distinct nonzero ids.
std::vector<std::uint32_t> instance_ids(const LabelVolume& labels);

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace aop3d
