#include "aop3d/instances.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "aop3d/volume_io.hpp"

namespace aop3d::instances {

namespace fs = std::filesystem;

std::vector<InstanceCrop> extract_instances(const LabelVolume& labels, const IntensityVolume& intensity, int margin,
                                            const std::string& image_id) {
  require_same_shape(labels.shape(), intensity.shape(), "extract_instances");
  if (margin < 0) throw ParameterError("margin must be >= 0");
  const Shape s = labels.shape();
  std::map<std::uint32_t, Box> tight;
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const auto id = labels(z, y, x);
        if (!id) continue;
        const std::array<std::int64_t, 3> p{z, y, x};
        auto [it, fresh] = tight.try_emplace(id, Box{p, {z + 1, y + 1, x + 1}});
        if (fresh) continue;
        for (int a = 0; a < 3; ++a) {
          it->second.lo[a] = std::min(it->second.lo[a], p[a]);
          it->second.hi[a] = std::max(it->second.hi[a], p[a] + 1);
        }
      }
  std::vector<InstanceCrop> out;
  for (const auto& [id, t] : tight) {
    InstanceCrop c;
    c.image_id = image_id;
    c.id = id;
    for (int a = 0; a < 3; ++a) {
      c.box.lo[a] = t.lo[a] - margin;
      c.box.hi[a] = t.hi[a] + margin;
      if (c.box.lo[a] < 0 || c.box.hi[a] > s[a]) c.clipped = true;
      c.box.lo[a] = std::max<std::int64_t>(c.box.lo[a], 0);
      c.box.hi[a] = std::min(c.box.hi[a], s[a]);
    }
    const Shape cs = c.box.shape();
    c.intensity = IntensityVolume(cs, labels.spacing());
    c.mask = Mask(cs, labels.spacing());
    for (std::int64_t z = 0; z < cs.z; ++z)
      for (std::int64_t y = 0; y < cs.y; ++y)
        for (std::int64_t x = 0; x < cs.x; ++x) {
          const auto gz = z + c.box.lo[0], gy = y + c.box.lo[1], gx = x + c.box.lo[2];
          c.intensity(z, y, x) = intensity(gz, gy, gx);
          c.mask(z, y, x) = labels(gz, gy, gx) == id ? 1 : 0;
        }
    out.push_back(std::move(c));
  }
  return out;
}

Preprocess preprocess_from_string(const std::string& s) {
  if (s == "mask") return Preprocess::Mask;
  if (s == "distance") return Preprocess::Distance;
  throw ParameterError("preprocessing must be 'mask' or 'distance', got '" + s + "'");
}

IntensityVolume preprocess_crop(const InstanceCrop& crop, Preprocess method, double sigma) {
  IntensityVolume out(crop.intensity.shape(), crop.intensity.spacing());
  if (method == Preprocess::Mask) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = crop.mask[i] ? 1.0f : 0.0f;
    return out;
  }
  if (!(sigma > 0.0)) throw ParameterError("distance preprocessing needs sigma > 0");
  const auto d2 = squared_distance_transform(crop.mask);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = crop.intensity[i];
    out[i] = crop.mask[i] ? crop.intensity[i] : static_cast<float>(v * std::exp(-std::sqrt(d2[i]) / sigma));
  }
  return out;
}

const std::vector<std::string>& feature_columns() {
  static const std::vector<std::string> cols{
      "volume",       "surface",    "extent_z",    "extent_y",   "extent_x",   "axis_major", "axis_middle", "axis_minor",
      "elongation",   "sphericity", "centroid_z",  "centroid_y", "centroid_x", "mean_intensity", "std_intensity"};
  return cols;
}

std::vector<double> FeatureVector::values() const {
  return {volume,   surface,     extent[0],   extent[1],   extent[2],      axes[0],       axes[1], axes[2],
          elongation, sphericity, centroid[0], centroid[1], centroid[2], mean_intensity, std_intensity};
}

FeatureVector geometric_features(const InstanceCrop& crop) {
  const Shape s = crop.mask.shape();
  FeatureVector f;
  std::array<std::int64_t, 3> lo{s.z, s.y, s.x}, hi{-1, -1, -1};
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
  double isum = 0, isum2 = 0;
  std::uint64_t faces = 0, count = 0;
  static constexpr int kFace[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        if (!crop.mask(z, y, x)) continue;
        ++count;
        const Eigen::Vector3d p(static_cast<double>(z), static_cast<double>(y), static_cast<double>(x));
        sum += p;
        outer += p * p.transpose();
        const std::array<std::int64_t, 3> q{z, y, x};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], q[a]);
          hi[a] = std::max(hi[a], q[a]);
        }
        for (const auto& o : kFace)
          if (!crop.mask.get_or(z + o[0], y + o[1], x + o[2], 0)) ++faces;
        const double v = crop.intensity(z, y, x);
        isum += v;
        isum2 += v * v;
      }
  if (count == 0) throw ParameterError("instance crop has an empty mask");
  const double n = static_cast<double>(count);
  const Eigen::Vector3d mean = sum / n;
  const Eigen::Matrix3d cov = outer / n - mean * mean.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov, Eigen::EigenvaluesOnly);
  // Solid-ellipsoid semi-axis sqrt(5 * lambda); the 1/12 term is the variance
  // of a unit voxel so single-voxel-thick axes stay nonzero.
  for (int a = 0; a < 3; ++a) f.axes[a] = 2.0 * std::sqrt(5.0 * (std::max(0.0, eig.eigenvalues()[2 - a]) + 1.0 / 12.0));
  f.volume = n;
  f.surface = static_cast<double>(faces);
  for (int a = 0; a < 3; ++a) {
    f.extent[a] = static_cast<double>(hi[a] - lo[a] + 1);
    f.centroid[a] = mean[a] + static_cast<double>(crop.box.lo[a]);
  }
  f.elongation = f.axes[0] / f.axes[2];
  f.sphericity = std::cbrt(std::numbers::pi) * std::pow(6.0 * n, 2.0 / 3.0) / f.surface;
  f.mean_intensity = isum / n;
  f.std_intensity = std::sqrt(std::max(0.0, isum2 / n - f.mean_intensity * f.mean_intensity));
  return f;
}

nlohmann::ordered_json crop_meta(const InstanceCrop& crop, const FeatureVector* features) {
  nlohmann::ordered_json j;
  j["image"] = crop.image_id;
  j["id"] = crop.id;
  j["bbox"] = {{"lo", crop.box.lo}, {"hi", crop.box.hi}};
  j["clipped"] = crop.clipped;
  if (features) {
    nlohmann::ordered_json fj;
    const auto vals = features->values();
    for (std::size_t i = 0; i < vals.size(); ++i) fj[feature_columns()[i]] = vals[i];
    j["features"] = fj;
  }
  return j;
}

void save_crop(const InstanceCrop& crop, const fs::path& root, const FeatureVector* features) {
  if (crop.image_id.empty() || crop.image_id.find('/') != std::string::npos || crop.image_id == "." ||
      crop.image_id == "..") {
    throw ParameterError("crop image id must be a non-empty path component, got '" + crop.image_id + "'");
  }
  const fs::path dir = root / crop.image_id / std::to_string(crop.id);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  write_volume(crop.intensity, dir / "intensity.i3d");
  LabelVolume mask(crop.mask.shape(), crop.mask.spacing());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = crop.mask[i];
  write_volume(mask, dir / "mask.i3d");
  std::ofstream meta(dir / "meta.json");
  meta << crop_meta(crop, features).dump(2) << '\n';
  if (!meta) throw IoError("cannot write '" + (dir / "meta.json").string() + "'");
}

InstanceCrop load_crop(const fs::path& dir) {
  InstanceCrop c;
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("cannot open '" + (dir / "meta.json").string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    c.image_id = j.at("image").get<std::string>();
    c.id = j.at("id").get<std::uint32_t>();
    c.box.lo = j.at("bbox").at("lo").get<std::array<std::int64_t, 3>>();
    c.box.hi = j.at("bbox").at("hi").get<std::array<std::int64_t, 3>>();
    c.clipped = j.value("clipped", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid crop metadata in '" + dir.string() + "': " + e.what());
  }
  c.intensity = read_intensity(dir / "intensity.i3d");
  const auto mask = read_labels(dir / "mask.i3d");
  require_same_shape(mask.shape(), c.intensity.shape(), ("crop " + dir.string()).c_str());
  if (!(mask.shape() == c.box.shape())) throw FormatError("crop '" + dir.string() + "' does not match its bbox");
  c.mask = Mask(mask.shape(), mask.spacing());
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 1) throw FormatError("crop mask '" + dir.string() + "' is not binary");
    c.mask[i] = static_cast<std::uint8_t>(mask[i]);
    any = any || mask[i];
  }
  if (!any) throw FormatError("crop mask '" + dir.string() + "' is empty");
  return c;
}

std::vector<InstanceCrop> load_crops(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("crop directory '" + root.string() + "' does not exist");
  std::vector<InstanceCrop> out;
  for (const auto& img : fs::directory_iterator(root)) {
    if (!img.is_directory()) continue;
    for (const auto& inst : fs::directory_iterator(img.path()))
      if (inst.is_directory() && fs::exists(inst.path() / "meta.json")) out.push_back(load_crop(inst.path()));
  }
  std::sort(out.begin(), out.end(), [](const InstanceCrop& a, const InstanceCrop& b) {
    return std::tie(a.image_id, a.id) < std::tie(b.image_id, b.id);
  });
  return out;
}

void write_features_csv(const std::vector<InstanceCrop>& crops, std::ostream& out) {
  out << "image,id";
  for (const auto& c : feature_columns()) out << ',' << c;
  out << '\n' << std::setprecision(17);
  for (const auto& crop : crops) {
    if (crop.image_id.find(',') != std::string::npos) throw ParameterError("image id contains a comma");
    out << crop.image_id << ',' << crop.id;
    for (double v : geometric_features(crop).values()) out << ',' << v;
    out << '\n';
  }
}

FeatureTable read_features_csv(std::istream& in) {
  FeatureTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("features CSV is empty");
  std::size_t width = 0;
  {
    std::stringstream hs(line);
    std::string cell;
    std::vector<std::string> header;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
    if (header.size() < 3 || header[0] != "image" || header[1] != "id")
      throw FormatError("features CSV header must start with image,id");
    width = header.size() - 2;
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string image, id, cell;
    std::getline(ls, image, ',');
    std::getline(ls, id, ',');
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) {
      double v = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw FormatError("features CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != width) throw FormatError("features CSV line " + std::to_string(lineno) + ": wrong column count");
    t.keys.push_back(image + "/" + id);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace aop3d::instances
