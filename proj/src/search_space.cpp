#include "aop3d/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "aop3d/error.hpp"

namespace aop3d::bo {

SearchSpace& SearchSpace::add_categorical(std::string name, std::vector<std::string> choices) {
  Dimension d;
  d.name = std::move(name);
  d.kind = DimKind::Categorical;
  d.choices = std::move(choices);
  d.lo = 0.0;
  d.hi = static_cast<double>(d.choices.size()) - 1.0;
  dims_.push_back(std::move(d));
  return *this;
}

SearchSpace& SearchSpace::add_continuous(std::string name, double lo, double hi) {
  dims_.push_back({std::move(name), DimKind::Continuous, {}, lo, hi});
  return *this;
}

SearchSpace& SearchSpace::add_integer(std::string name, std::int64_t lo, std::int64_t hi) {
  dims_.push_back({std::move(name), DimKind::Integer, {}, static_cast<double>(lo), static_cast<double>(hi)});
  return *this;
}

std::size_t SearchSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i].name == name) return i;
  throw ParameterError("unknown search dimension '" + name + "'");
}

std::vector<std::size_t> SearchSpace::categorical_dims() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i].kind == DimKind::Categorical) out.push_back(i);
  return out;
}

std::vector<std::size_t> SearchSpace::numeric_dims() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i].kind != DimKind::Categorical) out.push_back(i);
  return out;
}

bool SearchSpace::has_continuous() const {
  for (const auto& d : dims_)
    if (d.kind == DimKind::Continuous) return true;
  return false;
}

std::size_t SearchSpace::partition_count() const {
  std::size_t n = 1;
  for (const auto& d : dims_)
    if (d.kind == DimKind::Categorical) n *= d.choices.size();
  return n;
}

std::size_t SearchSpace::partition_of(const Config& c) const {
  std::size_t p = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i].kind == DimKind::Categorical) p = p * dims_[i].choices.size() + static_cast<std::size_t>(c[i]);
  return p;
}

void SearchSpace::assign_partition(std::size_t partition, Config& c) const {
  c.resize(dims_.size(), 0.0);
  for (std::size_t k = dims_.size(); k-- > 0;) {
    if (dims_[k].kind != DimKind::Categorical) continue;
    const auto n = dims_[k].choices.size();
    c[k] = static_cast<double>(partition % n);
    partition /= n;
  }
}

std::uint64_t SearchSpace::discrete_size() const {
  std::uint64_t n = 1;
  for (const auto& d : dims_) {
    if (d.kind == DimKind::Continuous) return 0;
    n *= d.kind == DimKind::Categorical ? d.choices.size() : static_cast<std::uint64_t>(d.hi - d.lo + 1);
  }
  return n;
}

Config SearchSpace::discrete_config(std::uint64_t index) const {
  Config c(dims_.size(), 0.0);
  for (std::size_t k = dims_.size(); k-- > 0;) {
    const auto& d = dims_[k];
    const auto n = d.kind == DimKind::Categorical ? d.choices.size() : static_cast<std::uint64_t>(d.hi - d.lo + 1);
    const auto v = index % n;
    index /= n;
    c[k] = d.kind == DimKind::Categorical ? static_cast<double>(v) : d.lo + static_cast<double>(v);
  }
  return c;
}

std::vector<double> SearchSpace::to_unit(const Config& c) const {
  std::vector<double> u;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (d.kind == DimKind::Categorical) continue;
    u.push_back((c[i] - d.lo) / (d.hi - d.lo));
  }
  return u;
}

void SearchSpace::from_unit(const std::vector<double>& unit, Config& c) const {
  c.resize(dims_.size(), 0.0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (d.kind == DimKind::Categorical) continue;
    double v = d.lo + std::clamp(unit[k++], 0.0, 1.0) * (d.hi - d.lo);
    if (d.kind == DimKind::Integer) v = std::clamp(std::round(v), d.lo, d.hi);
    c[i] = v;
  }
}

std::vector<double> SearchSpace::encode(const Config& c) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (d.kind == DimKind::Categorical) {
      for (std::size_t k = 0; k < d.choices.size(); ++k) out.push_back(static_cast<std::size_t>(c[i]) == k ? 1.0 : 0.0);
    } else {
      out.push_back((c[i] - d.lo) / (d.hi - d.lo));
    }
  }
  return out;
}

Config SearchSpace::sample(SplitMix64& rng) const {
  Config c(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    switch (d.kind) {
      case DimKind::Categorical: c[i] = static_cast<double>(rng.below(d.choices.size())); break;
      case DimKind::Continuous: c[i] = rng.uniform(d.lo, d.hi); break;
      case DimKind::Integer:
        c[i] = static_cast<double>(rng.range(static_cast<std::int64_t>(d.lo), static_cast<std::int64_t>(d.hi)));
        break;
    }
  }
  return c;
}

void SearchSpace::validate() const {
  std::set<std::string> names;
  if (dims_.empty()) throw ParameterError("search space has no dimensions");
  for (const auto& d : dims_) {
    if (!names.insert(d.name).second) throw ParameterError("duplicate dimension name '" + d.name + "'");
    if (d.kind == DimKind::Categorical) {
      if (d.choices.empty()) throw ParameterError("categorical dimension '" + d.name + "' has no choices");
    } else if (!(d.lo < d.hi)) {
      throw ParameterError("dimension '" + d.name + "' needs lo < hi");
    }
  }
}

void SearchSpace::check(const Config& c) const {
  if (c.size() != dims_.size()) throw ParameterError("config has wrong number of entries");
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (!(c[i] >= d.lo && c[i] <= d.hi)) throw ParameterError("config value for '" + d.name + "' out of range");
    if (d.kind != DimKind::Continuous && c[i] != std::round(c[i])) {
      throw ParameterError("config value for '" + d.name + "' must be integral");
    }
  }
}

nlohmann::ordered_json SearchSpace::to_json() const {
  nlohmann::ordered_json dims = nlohmann::ordered_json::array();
  for (const auto& d : dims_) {
    nlohmann::ordered_json j;
    j["name"] = d.name;
    switch (d.kind) {
      case DimKind::Categorical:
        j["type"] = "categorical";
        j["choices"] = d.choices;
        break;
      case DimKind::Continuous:
        j["type"] = "continuous";
        j["lo"] = d.lo;
        j["hi"] = d.hi;
        break;
      case DimKind::Integer:
        j["type"] = "integer";
        j["lo"] = static_cast<std::int64_t>(d.lo);
        j["hi"] = static_cast<std::int64_t>(d.hi);
        break;
    }
    dims.push_back(j);
  }
  return {{"dims", dims}};
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  SearchSpace s;
  try {
    for (const auto& d : j.at("dims")) {
      const auto type = d.at("type").get<std::string>();
      const auto name = d.at("name").get<std::string>();
      if (type == "categorical") {
        s.add_categorical(name, d.at("choices").get<std::vector<std::string>>());
      } else if (type == "continuous") {
        s.add_continuous(name, d.at("lo").get<double>(), d.at("hi").get<double>());
      } else if (type == "integer") {
        s.add_integer(name, d.at("lo").get<std::int64_t>(), d.at("hi").get<std::int64_t>());
      } else {
        throw ParameterError("unknown dimension type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid search space: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::ordered_json SearchSpace::config_to_json(const Config& c) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    switch (d.kind) {
      case DimKind::Categorical: j[d.name] = d.choices.at(static_cast<std::size_t>(c[i])); break;
      case DimKind::Continuous: j[d.name] = c[i]; break;
      case DimKind::Integer: j[d.name] = static_cast<std::int64_t>(c[i]); break;
    }
  }
  return j;
}

Config SearchSpace::config_from_json(const nlohmann::json& j) const {
  Config c(dims_.size());
  try {
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      const auto& d = dims_[i];
      const auto& v = j.at(d.name);
      if (d.kind == DimKind::Categorical) {
        const auto s = v.get<std::string>();
        auto it = std::find(d.choices.begin(), d.choices.end(), s);
        if (it == d.choices.end()) throw ParameterError("'" + s + "' is not a choice of '" + d.name + "'");
        c[i] = static_cast<double>(it - d.choices.begin());
      } else {
        c[i] = v.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("invalid config: ") + e.what());
  }
  check(c);
  return c;
}

}  // namespace aop3d::bo
