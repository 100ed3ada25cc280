#include "aop3d/annoserve.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "aop3d/png_writer.hpp"
#include "httplib.h"

namespace aop3d::annoserve {

namespace fs = std::filesystem;

std::vector<ClassDef> classes_from_names(const std::vector<std::string>& names) {
  std::vector<ClassDef> out;
  for (std::size_t i = 0; i < names.size(); ++i)
    out.push_back({static_cast<int>(i + 1), names[i], i < 9 ? std::to_string(i + 1) : ""});
  return out;
}

std::vector<ClassDef> parse_classes(const std::string& spec) {
  std::vector<ClassDef> out;
  if (fs::is_regular_file(spec)) {
    std::ifstream in(spec);
    try {
      for (const auto& c : nlohmann::json::parse(in))
        out.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(), c.value("hotkey", "")});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("invalid class list '" + spec + "': " + e.what());
    }
  } else {
    std::vector<std::string> names;
    std::stringstream ss(spec);
    std::string name;
    while (std::getline(ss, name, ','))
      if (!name.empty()) names.push_back(name);
    out = classes_from_names(names);
  }
  if (out.empty()) throw ParameterError("class list is empty");
  std::set<int> ids;
  for (const auto& c : out)
    if (!ids.insert(c.id).second) throw ParameterError("duplicate class id " + std::to_string(c.id));
  return out;
}

LabelStore::LabelStore(fs::path path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open label log '" + path_.string() + "': " + std::strerror(errno));
}

LabelStore::~LabelStore() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<LabelRecord> LabelStore::replay() {
  std::lock_guard lock(mutex_);
  std::ifstream in(path_, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto last_nl = content.rfind('\n');
  const std::size_t good = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (good < content.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(good)) != 0 || ::fsync(fd_) != 0)
      throw IoError("cannot repair label log '" + path_.string() + "'");
    content.resize(good);
  }
  std::vector<LabelRecord> out;
  std::stringstream ss(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabelRecord r;
      r.image = j.at("image").get<std::string>();
      r.id = j.at("id").get<std::uint32_t>();
      r.cls = j.at("class").get<int>();
      r.timestamp = j.value("timestamp", "");
      r.note = j.value("note", "");
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void LabelStore::append(const LabelRecord& r) {
  nlohmann::ordered_json j;
  j["image"] = r.image;
  j["id"] = r.id;
  j["class"] = r.cls;
  j["timestamp"] = r.timestamp;
  if (!r.note.empty()) j["note"] = r.note;
  const std::string line = j.dump() + "\n";
  std::lock_guard lock(mutex_);
  const ssize_t n = ::write(fd_, line.data(), line.size());
  if (n != static_cast<ssize_t>(line.size())) throw IoError("short write to label log '" + path_.string() + "'");
  if (::fsync(fd_) != 0) throw IoError("fsync failed on label log '" + path_.string() + "'");
}

SliceMode slice_mode_from_string(const std::string& s) {
  if (s == "raw") return SliceMode::Raw;
  if (s == "mask-overlay") return SliceMode::MaskOverlay;
  if (s == "distance") return SliceMode::Distance;
  throw ParameterError("mode must be raw, mask-overlay or distance, got '" + s + "'");
}

namespace {

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); }

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<std::uint8_t> render_slice(const instances::InstanceCrop& crop, std::int64_t z, SliceMode mode,
                                       double sigma) {
  const Shape s = crop.intensity.shape();
  if (z < 0 || z >= s.z) throw RequestError(404, "slice " + std::to_string(z) + " outside depth " + std::to_string(s.z));
  std::vector<std::uint8_t> px(static_cast<std::size_t>(s.y * s.x));
  if (mode == SliceMode::Distance) {
    const auto scaled = instances::preprocess_crop(crop, instances::Preprocess::Distance, sigma);
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) px[static_cast<std::size_t>(y * s.x + x)] = quantize(scaled(z, y, x));
    return px;
  }
  for (std::int64_t y = 0; y < s.y; ++y)
    for (std::int64_t x = 0; x < s.x; ++x) {
      double v = crop.intensity(z, y, x);
      if (mode == SliceMode::MaskOverlay && crop.mask(z, y, x)) {
        const bool boundary = !crop.mask.get_or(z, y - 1, x, 0) || !crop.mask.get_or(z, y + 1, x, 0) ||
                              !crop.mask.get_or(z, y, x - 1, 0) || !crop.mask.get_or(z, y, x + 1, 0);
        if (boundary) v = 0.5 * std::clamp(v, 0.0, 1.0) + 0.5;
      }
      px[static_cast<std::size_t>(y * s.x + x)] = quantize(v);
    }
  return px;
}

struct AnnotationService::Http {
  httplib::Server server;
};

AnnotationService::AnnotationService(SessionConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.labels_out) {
  if (cfg_.classes.empty()) throw ParameterError("class list is empty");
  if (!(cfg_.distance_sigma > 0)) throw ParameterError("distance sigma must be > 0");
  for (auto& crop : instances::load_crops(cfg_.crops)) {
    auto features = instances::geometric_features(crop);
    entries_.push_back({std::move(crop), features});
  }
  if (entries_.empty()) throw DatasetError("no crops found under '" + cfg_.crops.string() + "'");
  for (std::size_t i = 0; i < entries_.size(); ++i) index_[{entries_[i].crop.image_id, entries_[i].crop.id}] = i;
  labels_.resize(entries_.size());
  for (const auto& r : store_.replay()) {
    auto it = index_.find({r.image, r.id});
    if (it == index_.end()) throw DatasetError("label log references unknown instance " + r.image + "/" + std::to_string(r.id));
    class_by_id(r.cls);
    labels_[it->second] = r.cls;
  }
}

AnnotationService::~AnnotationService() { stop(); }

std::size_t AnnotationService::find(const std::string& image, std::uint32_t id) const {
  auto it = index_.find({image, id});
  if (it == index_.end()) throw RequestError(404, "unknown instance " + image + "/" + std::to_string(id));
  return it->second;
}

const ClassDef& AnnotationService::class_by_id(int cls) const {
  for (const auto& c : cfg_.classes)
    if (c.id == cls) return c;
  throw DatasetError("unknown class id " + std::to_string(cls));
}

nlohmann::ordered_json AnnotationService::classes() const {
  auto out = nlohmann::ordered_json::array();
  for (const auto& c : cfg_.classes) out.push_back({{"id", c.id}, {"name", c.name}, {"hotkey", c.hotkey}});
  return out;
}

nlohmann::ordered_json AnnotationService::next() const {
  std::lock_guard lock(state_);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (labels_[i]) continue;
    const auto& c = entries_[i].crop;
    return {{"done", false}, {"image", c.image_id}, {"id", c.id}, {"index", i}, {"depth", c.box.shape().z}};
  }
  return {{"done", true}};
}

nlohmann::ordered_json AnnotationService::instance(const std::string& image, std::uint32_t id) const {
  const std::size_t i = find(image, id);
  const auto& e = entries_[i];
  auto j = instances::crop_meta(e.crop, &e.features);
  const Shape s = e.crop.box.shape();
  j["depth"] = s.z;
  j["height"] = s.y;
  j["width"] = s.x;
  j["index"] = i;
  std::lock_guard lock(state_);
  if (labels_[i]) {
    j["label"] = *labels_[i];
  } else {
    j["label"] = nullptr;
  }
  return j;
}

std::string AnnotationService::slice_png(const std::string& image, std::uint32_t id, std::int64_t z, SliceMode mode,
                                         std::optional<double> sigma) const {
  const auto& crop = entries_[find(image, id)].crop;
  const double sg = sigma.value_or(cfg_.distance_sigma);
  if (!(sg > 0)) throw RequestError(400, "sigma must be > 0");
  const auto px = render_slice(crop, z, mode, sg);
  const Shape s = crop.intensity.shape();
  return encode_png_gray8(px, static_cast<std::uint32_t>(s.x), static_cast<std::uint32_t>(s.y));
}

nlohmann::ordered_json AnnotationService::label(const std::string& image, std::uint32_t id, int cls,
                                                const std::string& note) {
  const std::size_t i = find(image, id);
  try {
    class_by_id(cls);
  } catch (const DatasetError& e) {
    throw RequestError(400, e.what());
  }
  LabelRecord r{image, id, cls, now_utc(), note};
  std::lock_guard lock(state_);
  store_.append(r);
  labels_[i] = cls;
  const auto labeled = static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](auto& l) { return l.has_value(); }));
  return {{"image", image}, {"id", id}, {"class", cls}, {"labeled", labeled}, {"total", entries_.size()}};
}

nlohmann::ordered_json AnnotationService::progress() const {
  std::lock_guard lock(state_);
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& c : cfg_.classes) per[c.name] = 0;
  std::size_t labeled = 0;
  for (const auto& l : labels_) {
    if (!l) continue;
    ++labeled;
    per[class_by_id(*l).name] = per[class_by_id(*l).name].get<int>() + 1;
  }
  return {{"labeled", labeled}, {"total", entries_.size()}, {"per_class", per}};
}

int AnnotationService::bind(const std::string& host, int port) {
  if (http_) throw ParameterError("server already bound");
  http_ = std::make_unique<Http>();
  auto& svr = http_->server;
  auto json_reply = [](httplib::Response& res, const nlohmann::ordered_json& j) {
    res.set_content(j.dump(), "application/json");
  };
  auto guarded = [](auto fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const RequestError& e) {
        res.status = e.status;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      } catch (const ParameterError& e) {
        res.status = 400;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
      }
    };
  };
  auto parse_id = [](const std::string& s) {
    try {
      const unsigned long v = std::stoul(s);
      if (v > UINT32_MAX) throw std::out_of_range(s);
      return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
      throw RequestError(404, "bad instance id '" + s + "'");
    }
  };

  svr.Get("/api/classes", guarded([=, this](const httplib::Request&, httplib::Response& res) { json_reply(res, classes()); }));
  svr.Get("/api/next", guarded([=, this](const httplib::Request&, httplib::Response& res) { json_reply(res, next()); }));
  svr.Get("/api/progress", guarded([=, this](const httplib::Request&, httplib::Response& res) { json_reply(res, progress()); }));
  svr.Get(R"(/api/instances/([^/]+)/(\d+))", guarded([=, this](const httplib::Request& req, httplib::Response& res) {
            json_reply(res, instance(req.matches[1], parse_id(req.matches[2])));
          }));
  svr.Get(R"(/api/instances/([^/]+)/(\d+)/slice/(-?\d+))",
          guarded([=, this](const httplib::Request& req, httplib::Response& res) {
            const auto mode = slice_mode_from_string(req.has_param("mode") ? req.get_param_value("mode") : "raw");
            std::optional<double> sigma;
            if (req.has_param("sigma")) {
              try {
                sigma = std::stod(req.get_param_value("sigma"));
              } catch (const std::exception&) {
                throw RequestError(400, "bad sigma");
              }
            }
            std::int64_t z = 0;
            try {
              z = std::stoll(req.matches[3]);
            } catch (const std::exception&) {
              throw RequestError(404, "bad slice index");
            }
            res.set_content(slice_png(req.matches[1], parse_id(req.matches[2]), z, mode, sigma), "image/png");
          }));
  svr.Post(R"(/api/instances/([^/]+)/(\d+)/label)",
           guarded([=, this](const httplib::Request& req, httplib::Response& res) {
             int cls = 0;
             std::string note;
             try {
               const auto body = nlohmann::json::parse(req.body);
               cls = body.at("class").get<int>();
               note = body.value("note", "");
             } catch (const nlohmann::json::exception& e) {
               throw RequestError(400, std::string("body must be {\"class\": int}: ") + e.what());
             }
             json_reply(res, label(req.matches[1], parse_id(req.matches[2]), cls, note));
           }));
  if (cfg_.static_dir && !svr.set_mount_point("/", cfg_.static_dir->string()))
    throw IoError("static directory '" + cfg_.static_dir->string() + "' is not readable");

  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    http_.reset();
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void AnnotationService::serve() {
  if (!http_) throw ParameterError("bind() must be called before serve()");
  http_->server.listen_after_bind();
}

void AnnotationService::stop() {
  if (http_) http_->server.stop();
}

}  // namespace aop3d::annoserve
