#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"
#include "yftag/calib.hpp"
#include "yftag/calib_server.hpp"

using namespace yftag;
using namespace yftag::calib;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = YFTAG_TEST_DATA_DIR;

class CalibHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "yftag_calib_http";
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "photos");
    std::ofstream(dir_ / "photos" / "p001.ppm", std::ios::binary) << "P6\n1 1\n255\nabc";
    std::ifstream in(kData / "calib" / "index.tsv");
    index_ = read_index(in);
    table_ = CalibrationTable::load((kData / "calib" / "table_v1.tsv").string());
    ServiceConfig config;
    config.table_path = (dir_ / "table.tsv").string();
    config.photo_dir = (dir_ / "photos").string();
    config.suggest.min_judgments = 5;
    config.suggest.min_window = 1;
    service_ = std::make_unique<CalibrationService>(index_, table_, log_, config);
    server_ = std::make_unique<CalibrationServer>(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->serve(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !client_->Get("/classes"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  void TearDown() override {
    server_->stop();
    thread_.join();
    fs::remove_all(dir_);
  }

  std::pair<int, json> get(const std::string& path) {
    auto r = client_->Get(path);
    EXPECT_TRUE(r) << path;
    if (!r) return {0, {}};
    return {r->status, json::parse(r->body, nullptr, false)};
  }

  std::pair<int, json> post(const std::string& path, const std::string& body) {
    auto r = client_->Post(path, body, "application/json");
    EXPECT_TRUE(r) << path;
    if (!r) return {0, {}};
    return {r->status, json::parse(r->body, nullptr, false)};
  }

  fs::path dir_;
  ScoreIndex index_;
  CalibrationTable table_;
  JudgmentLog log_;
  std::unique_ptr<CalibrationService> service_;
  std::unique_ptr<CalibrationServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST_F(CalibHttp, ListsClasses) {
  auto [status, body] = get("/classes");
  EXPECT_EQ(status, 200);
  ASSERT_TRUE(body["classes"].is_array());
  std::map<std::string, json> by_tag;
  for (const auto& c : body["classes"]) by_tag[c["tag"]] = c;
  EXPECT_EQ(by_tag.size(), 4u);
  EXPECT_EQ(by_tag["beach"]["bias"].get<double>(), 0.25);
  EXPECT_EQ(by_tag["beach"]["photos"].get<int>(), 30);
  EXPECT_FALSE(by_tag["chien"]["enabled"].get<bool>());
  EXPECT_EQ(by_tag["dog"]["judgments"].get<int>(), 0);
}

TEST_F(CalibHttp, TopAndAround) {
  auto [s1, top] = get("/classes/dog/top?n=3");
  EXPECT_EQ(s1, 200);
  ASSERT_EQ(top["photos"].size(), 3u);
  EXPECT_EQ(top["photos"][0]["photo_id"], index_.photos("dog")[0].photo_id);
  auto [s2, around] = get("/classes/dog/around?p=0.5&n=4");
  EXPECT_EQ(s2, 200);
  const auto want =
      oracle::brute_around(index_.photos("dog"), table_.get("dog").bias, 0.5, 4);
  ASSERT_EQ(around["photos"].size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(around["photos"][i]["photo_id"], want[i]);
  }
}

TEST_F(CalibHttp, BiasUpdatePersists) {
  auto [status, body] = post("/classes/sunset/bias", R"({"bias": -0.125})");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body["bias"].get<double>(), -0.125);
  EXPECT_GT(body["modified"].get<std::int64_t>(), 0);
  auto saved = CalibrationTable::load((dir_ / "table.tsv").string());
  EXPECT_EQ(saved.get("sunset").bias, -0.125);
  auto [s2, top] = get("/classes/sunset/top?n=1");
  EXPECT_EQ(top["bias"].get<double>(), -0.125);
}

TEST_F(CalibHttp, DisableThenTopIsConflict) {
  auto [s1, b1] = post("/classes/beach/enabled", R"({"enabled": false})");
  EXPECT_EQ(s1, 200);
  EXPECT_FALSE(b1["enabled"].get<bool>());
  EXPECT_EQ(get("/classes/beach/top").first, 409);
  EXPECT_EQ(post("/classes/beach/enabled", R"({"enabled": true})").first, 200);
  EXPECT_EQ(get("/classes/beach/top").first, 200);
}

TEST_F(CalibHttp, JudgmentsThenSuggest) {
  EXPECT_EQ(get("/classes/dog/suggest?p=0.9").first, 422);
  for (const auto& ph : index_.photos("dog")) {
    const std::string verdict = ph.logit > 0.5 ? "correct" : "incorrect";
    auto [s, b] = post("/classes/dog/judgments",
                       json{{"photo_id", ph.photo_id}, {"verdict", verdict}}.dump());
    ASSERT_EQ(s, 200);
  }
  auto [s, b] = get("/classes/dog/suggest?p=0.9");
  EXPECT_EQ(s, 200);
  EXPECT_EQ(b["judged"].get<int>(), 30);
  EXPECT_TRUE(b["bias"].is_number());
  EXPECT_EQ(b["target"].get<double>(), 0.9);
}

TEST_F(CalibHttp, Errors) {
  EXPECT_EQ(get("/classes/nosuch/top").first, 404);
  EXPECT_EQ(get("/nowhere").first, 404);
  EXPECT_EQ(get("/classes/dog/top?n=0").first, 400);
  EXPECT_EQ(get("/classes/dog/around?p=abc").first, 400);
  EXPECT_EQ(get("/classes/dog/around?p=1.5").first, 400);
  EXPECT_EQ(post("/classes/dog/bias", "not json").first, 400);
  EXPECT_EQ(post("/classes/dog/bias", R"({"bias": "x"})").first, 400);
  EXPECT_EQ(post("/classes/dog/bias", R"({"bias": 1e999})").first, 400);
  const auto dog_photo = index_.photos("dog")[0].photo_id;
  EXPECT_EQ(post("/classes/dog/judgments",
                 json{{"photo_id", dog_photo}, {"verdict", "maybe"}}.dump())
                .first,
            400);
  EXPECT_EQ(post("/classes/dog/judgments",
                 R"({"photo_id": "zzz", "verdict": "correct"})").first,
            404);
}

TEST_F(CalibHttp, ServesPhotoBytes) {
  auto r = client_->Get("/photos/p001");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/x-portable-pixmap");
  EXPECT_EQ(r->body, "P6\n1 1\n255\nabc");
  EXPECT_EQ(get("/photos/..").first, 404);
  EXPECT_EQ(get("/photos/missing").first, 404);
}
