#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aop3d/instances.hpp"
#include "json.hpp"

namespace aop3d::annoserve {

struct ClassDef {
  int id = 0;
  std::string name;
  std::string hotkey;
};

// Classes numbered 1..n in the given order with hotkeys "1".."9".
std::vector<ClassDef> classes_from_names(const std::vector<std::string>& names);
// `spec` is a path to a JSON array of {"id","name","hotkey"} or a
// comma-separated list of names.
std::vector<ClassDef> parse_classes(const std::string& spec);

struct LabelRecord {
  std::string image;
  std::uint32_t id = 0;
  int cls = 0;
  std::string timestamp;
  std::string note;
};

// Append-only JSON-lines label log. Every append is written with a single
// write() call and fsynced before returning. Replay keeps the last record per
// instance; a torn final line left by a crash is cut off.
class LabelStore {
 public:
  explicit LabelStore(std::filesystem::path path);
  ~LabelStore();
  LabelStore(const LabelStore&) = delete;
  LabelStore& operator=(const LabelStore&) = delete;

  std::vector<LabelRecord> replay();
  void append(const LabelRecord& r);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::mutex mutex_;
};

struct SessionConfig {
  std::filesystem::path crops;
  std::vector<ClassDef> classes;
  std::filesystem::path labels_out;
  std::optional<std::filesystem::path> static_dir;
  double distance_sigma = 1.0;  // default for mode=distance
};

enum class SliceMode { Raw, MaskOverlay, Distance };
SliceMode slice_mode_from_string(const std::string& s);

// Thrown by the handlers; `status` is the HTTP status to answer with.
class RequestError : public Error {
 public:
  RequestError(int status, const std::string& what) : Error(what), status(status) {}
  int status;
};

// Grayscale 8-bit rendering of crop slice z (height = y, width = x).
std::vector<std::uint8_t> render_slice(const instances::InstanceCrop& crop, std::int64_t z, SliceMode mode,
                                       double sigma);

class AnnotationService {
 public:
  // Loads every crop and replays the label log; unknown instances or classes
  // in the log are a DatasetError.
  explicit AnnotationService(SessionConfig cfg);
  ~AnnotationService();

  nlohmann::ordered_json classes() const;
  nlohmann::ordered_json next() const;
  nlohmann::ordered_json instance(const std::string& image, std::uint32_t id) const;
  std::string slice_png(const std::string& image, std::uint32_t id, std::int64_t z, SliceMode mode,
                        std::optional<double> sigma = std::nullopt) const;
  nlohmann::ordered_json label(const std::string& image, std::uint32_t id, int cls, const std::string& note = "");
  nlohmann::ordered_json progress() const;

  // Binds the HTTP server (port 0 picks a free port) and returns the port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void serve();
  void stop();

 private:
  struct Entry {
    instances::InstanceCrop crop;
    instances::FeatureVector features;
  };
  std::size_t find(const std::string& image, std::uint32_t id) const;
  const ClassDef& class_by_id(int cls) const;

  SessionConfig cfg_;
  std::vector<Entry> entries_;  // ordered by (image, id)
  std::map<std::pair<std::string, std::uint32_t>, std::size_t> index_;
  std::vector<std::optional<int>> labels_;
  mutable std::mutex state_;
  LabelStore store_;
  struct Http;
  std::unique_ptr<Http> http_;
};

}  // namespace aop3d::annoserve
