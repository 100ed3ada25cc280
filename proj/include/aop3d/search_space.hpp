#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aop3d/rng.hpp"
#include "json.hpp"

namespace aop3d::bo {

enum class DimKind { Categorical, Continuous, Integer };

struct Dimension {
  std::string name;
  DimKind kind = DimKind::Continuous;
  std::vector<std::string> choices;  // categorical only
  double lo = 0.0;                   // numeric only
  double hi = 1.0;
};

// One value per dimension in declaration order: choice index for categorical
// dims, the value itself for numeric dims (integers stored exactly).
using Config = std::vector<double>;

class SearchSpace {
 public:
  SearchSpace& add_categorical(std::string name, std::vector<std::string> choices);
  SearchSpace& add_continuous(std::string name, double lo, double hi);
  SearchSpace& add_integer(std::string name, std::int64_t lo, std::int64_t hi);

  const std::vector<Dimension>& dims() const { return dims_; }
  std::size_t size() const { return dims_.size(); }
  std::size_t index_of(const std::string& name) const;

  std::vector<std::size_t> categorical_dims() const;
  std::vector<std::size_t> numeric_dims() const;
  bool has_continuous() const;

  // Partitions are the cartesian product of categorical choices, numbered in
  // mixed radix with the first categorical dim most significant.
  std::size_t partition_count() const;
  std::size_t partition_of(const Config& c) const;
  void assign_partition(std::size_t partition, Config& c) const;

  // Number of distinct configs when there are no continuous dims.
  std::uint64_t discrete_size() const;
  Config discrete_config(std::uint64_t index) const;

  // Numeric coordinates scaled to the unit cube.
  std::vector<double> to_unit(const Config& c) const;
  // Inverse of to_unit for the numeric dims of a config whose categorical
  // entries are already set; integer dims are rounded.
  void from_unit(const std::vector<double>& unit, Config& c) const;

  // One-hot categoricals followed by unit-scaled numerics.
  std::vector<double> encode(const Config& c) const;

  Config sample(SplitMix64& rng) const;
  void validate() const;
  void check(const Config& c) const;

  nlohmann::ordered_json to_json() const;
  static SearchSpace from_json(const nlohmann::json& j);

  nlohmann::ordered_json config_to_json(const Config& c) const;
  Config config_from_json(const nlohmann::json& j) const;

 private:
  std::vector<Dimension> dims_;
};

}  // namespace aop3d::bo
