#include <cmath>
#include <fstream>
#include <thread>

#include <png.h>

#include "aop3d/annoserve.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"

using namespace aop3d;
using namespace aop3d::annoserve;
using fixture::fill_box;

namespace {

struct Gray {
  std::uint32_t width = 0, height = 0;
  std::vector<std::uint8_t> px;
};

Gray decode_png(const std::string& bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  REQUIRE(png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()));
  img.format = PNG_FORMAT_GRAY;
  Gray g{img.width, img.height, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(img))};
  REQUIRE(png_image_finish_read(&img, nullptr, g.px.data(), 0, nullptr));
  return g;
}

// Two images with three and two cube instances, saved as crops.
std::filesystem::path make_crops(const std::string& name, float level = 1.0f) {
  const auto dir = fixture::temp_dir(name);
  for (const char* image : {"im2", "im1"}) {
    LabelVolume l(Shape{10, 10, 30});
    const int n = std::string(image) == "im1" ? 3 : 2;
    for (int k = 0; k < n; ++k) fill_box(l, 3, 3, 2 + 9 * k, 6, 6, 6 + 9 * k, static_cast<std::uint32_t>(k + 1));
    IntensityVolume img(l.shape(), {1, 1, 1}, level);
    for (const auto& c : instances::extract_instances(l, img, 2, image)) instances::save_crop(c, dir);
  }
  return dir;
}

SessionConfig session(const std::filesystem::path& crops) {
  return {crops, classes_from_names({"Schwann", "Myotube", "debris", "other"}), crops / "labels.jsonl", {}, 1.0};
}

}  // namespace

TEST_CASE("class lists") {
  const auto c = classes_from_names({"Schwann", "Myotube", "debris", "other"});
  REQUIRE(c.size() == 4);
  CHECK(c[0].id == 1);
  CHECK(c[3].name == "other");
  CHECK(c[2].hotkey == "3");
  CHECK(parse_classes("a,b").size() == 2);
  const auto dir = fixture::temp_dir("classes");
  std::ofstream(dir / "c.json") << R"([{"id":5,"name":"x","hotkey":"q"},{"id":9,"name":"y","hotkey":"w"}])";
  const auto f = parse_classes((dir / "c.json").string());
  CHECK(f[1].id == 9);
  CHECK(f[0].hotkey == "q");
}

TEST_CASE("sequential presentation, labels and progress") {
  const auto crops = make_crops("anno_seq");
  AnnotationService s(session(crops));
  const auto cls = s.classes();
  REQUIRE(cls.size() == 4);
  CHECK(cls[1]["name"] == "Myotube");

  auto n = s.next();
  CHECK(n["image"] == "im1");
  CHECK(n["id"] == 1);
  s.label("im1", 1, 2);
  CHECK(s.next()["id"] == 2);
  s.label("im1", 3, 4, "edge");
  CHECK(s.next()["id"] == 2);
  s.label("im1", 2, 1);
  n = s.next();
  CHECK(n["image"] == "im2");
  CHECK(n["id"] == 1);
  const auto p = s.progress();
  CHECK(p["labeled"] == 3);
  CHECK(p["total"] == 5);
  CHECK(p["per_class"]["Myotube"] == 1);
  CHECK(s.instance("im1", 3)["label"] == 4);
  CHECK(s.instance("im2", 2)["label"].is_null());

  CHECK_THROWS_AS(s.label("im1", 1, 9), RequestError);
  try {
    s.instance("im3", 1);
  } catch (const RequestError& e) {
    CHECK(e.status == 404);
  }
  s.label("im2", 1, 3);
  s.label("im2", 2, 3);
  CHECK(s.next()["done"] == true);
}

TEST_CASE("label log replay and torn lines") {
  const auto crops = make_crops("anno_replay");
  {
    AnnotationService s(session(crops));
    s.label("im1", 1, 2);
    s.label("im1", 1, 3);
    s.label("im2", 2, 1);
  }
  {
    std::ofstream out(crops / "labels.jsonl", std::ios::app);
    out << R"({"image":"im1","id":2,"cla)";
  }
  AnnotationService again(session(crops));
  CHECK(again.progress()["labeled"] == 2);
  CHECK(again.instance("im1", 1)["label"] == 3);
  CHECK(again.next()["id"] == 2);
  again.label("im1", 2, 1);
  LabelStore store(crops / "labels.jsonl");
  CHECK(store.replay().size() == 4);

  std::ofstream(crops / "labels.jsonl", std::ios::app) << R"({"image":"nope","id":1,"class":1,"timestamp":""})" << "\n";
  CHECK_THROWS_AS(AnnotationService(session(crops)), DatasetError);
}

TEST_CASE("slice rendering") {
  const auto crops = make_crops("anno_png");
  AnnotationService s(session(crops));
  const auto raw = decode_png(s.slice_png("im1", 1, 0, SliceMode::Raw));
  CHECK(raw.width == 8);
  CHECK(raw.height == 7);
  for (auto v : raw.px) CHECK(v == 255);
  try {
    s.slice_png("im1", 1, 7, SliceMode::Raw);
    CHECK(false);
  } catch (const RequestError& e) {
    CHECK(e.status == 404);
  }

  const auto dim = make_crops("anno_png_dim", 0.4f);
  AnnotationService d(session(dim));
  // Slice 0 lies in the margin: empty mask, overlay equals raw.
  CHECK(d.slice_png("im1", 1, 0, SliceMode::MaskOverlay) == d.slice_png("im1", 1, 0, SliceMode::Raw));
  const auto over = decode_png(d.slice_png("im1", 1, 3, SliceMode::MaskOverlay));
  CHECK(over.px[2 * 8 + 2] == std::lround(255 * 0.7));  // boundary
  CHECK(over.px[3 * 8 + 3] == std::lround(255 * 0.4f));  // interior
  const auto dist = decode_png(d.slice_png("im1", 1, 3, SliceMode::Distance, 1.0));
  CHECK(dist.px[2 * 8 + 1] == std::lround(255 * 0.4f * std::exp(-1.0)));
  CHECK(dist.px[2 * 8 + 2] == std::lround(255 * 0.4f));
}

TEST_CASE("HTTP API") {
  const auto crops = make_crops("anno_http");
  AnnotationService s(session(crops));
  const int port = s.bind("127.0.0.1", 0);
  std::thread t([&] { s.serve(); });
  httplib::Client c("127.0.0.1", port);
  auto r = c.Get("/api/classes");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(nlohmann::json::parse(r->body).size() == 4);
  r = c.Post("/api/instances/im1/1/label", R"({"class":2})", "application/json");
  REQUIRE(r);
  CHECK(r->status == 200);
  r = c.Get("/api/progress");
  CHECK(nlohmann::json::parse(r->body)["labeled"] == 1);
  r = c.Get("/api/next");
  CHECK(nlohmann::json::parse(r->body)["id"] == 2);
  r = c.Get("/api/instances/im1/2/slice/3?mode=distance&sigma=2");
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Type") == "image/png");
  CHECK(c.Get("/api/instances/im1/2/slice/99")->status == 404);
  CHECK(c.Get("/api/instances/im9/2")->status == 404);
  CHECK(c.Post("/api/instances/im1/2/label", "{}", "application/json")->status == 400);
  CHECK(c.Post("/api/instances/im1/2/label", R"({"class":77})", "application/json")->status == 400);
  s.stop();
  t.join();
}
