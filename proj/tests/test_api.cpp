#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <thread>

#include "vqa/http.hpp"

namespace vqa {
namespace {

namespace fs = std::filesystem;

json slider_experiment_body(std::int64_t duration_ms = 10'000) {
  return {{"name", "pleasure"},
          {"video", {{"file_name", "clip.mp4"}, {"duration_ms", duration_ms}}},
          {"input_method",
           {{"kind", "slider"}, {"labels", {"boring", "exciting"}}, {"scale", {{"min", 1}, {"max", 5}, {"step", 0.01}}}}}};
}

class RouterTest : public ::testing::Test {
 protected:
  api::Response request(const std::string& method, const std::string& path, const json& body = nullptr,
                        std::map<std::string, std::string> query = {}) {
    return router.handle({method, path, std::move(query), body.is_null() ? "" : body.dump()});
  }

  std::string create_experiment() {
    const auto res = request("POST", "/api/experiments", slider_experiment_body());
    EXPECT_EQ(res.status, 201);
    return res.json_body().at("id").get<std::string>();
  }

  std::pair<std::string, std::string> subject_and_session(const std::string& eid, const std::string& name = "s") {
    const auto sub = request("POST", "/api/experiments/" + eid + "/subjects", {{"display_name", name}});
    EXPECT_EQ(sub.status, 201);
    const auto sid = sub.json_body().at("id").get<std::string>();
    const auto ses = request("POST", "/api/sessions", {{"experiment_id", eid}, {"subject_id", sid}});
    EXPECT_EQ(ses.status, 201);
    return {sid, ses.json_body().at("id").get<std::string>()};
  }

  static void expect_error(const api::Response& res, int status, const std::string& code) {
    EXPECT_EQ(res.status, status) << res.body;
    EXPECT_EQ(res.json_body().at("code"), code) << res.body;
  }

  ExperimentService service{std::make_shared<MemoryStore>()};
  api::Router router{service};
};

TEST_F(RouterTest, Healthz) {
  const auto res = request("GET", "/healthz");
  EXPECT_EQ(res.status, 200);
  EXPECT_EQ(res.json_body().at("version"), kVersion);
}

TEST_F(RouterTest, CreateAndFetchExperiment) {
  const auto res = request("POST", "/api/experiments", slider_experiment_body());
  ASSERT_EQ(res.status, 201);
  const auto body = res.json_body();
  EXPECT_EQ(body.at("input_method").at("labels"), json({"boring", "exciting"}));
  const auto id = body.at("id").get<std::string>();
  const auto got = request("GET", "/api/experiments/" + id).json_body();
  EXPECT_EQ(got.at("name"), "pleasure");
  EXPECT_TRUE(got.at("subjects").empty());
  EXPECT_EQ(request("GET", "/api/experiments").json_body().at("experiments").size(), 1u);
}

TEST_F(RouterTest, ValidationErrorsMapTo422) {
  auto body = slider_experiment_body();
  body["input_method"] = {{"kind", "radio"}, {"labels", json::array()}, {"level_count", 11}};
  expect_error(request("POST", "/api/experiments", body), 422, "LevelCountOutOfRange");
  body["name"] = "";
  body["input_method"] = {{"kind", "radio"}, {"labels", {"a", "b"}}};
  expect_error(request("POST", "/api/experiments", body), 422, "InvalidExperiment");
  expect_error(router.handle({"POST", "/api/experiments", {}, "{not json"}), 400, "BadRequest");
  expect_error(request("POST", "/api/experiments", {{"name", "x"}}), 400, "BadRequest");
  expect_error(request("GET", "/api/nowhere"), 404, "NotFound");
  expect_error(request("GET", "/api/experiments/exp-404"), 404, "UnknownExperiment");
}

TEST_F(RouterTest, SessionLifecycle) {
  const auto eid = create_experiment();
  const auto [sid, ses] = subject_and_session(eid);
  auto res = request("POST", "/api/sessions/" + ses + "/samples",
                     {{"batch_seq", 1},
                      {"samples",
                       {{{"video_time_ms", 0}, {"value", 3}, {"wall_clock_utc", "2020-01-01T00:00:00.000Z"}},
                        {{"video_time_ms", 100}, {"value", 3.1}}}}});
  ASSERT_EQ(res.status, 200) << res.body;
  EXPECT_EQ(res.json_body().at("accepted"), 2);

  res = request("POST", "/api/sessions/" + ses + "/samples",
                {{"batch_seq", 2}, {"samples", {{{"video_time_ms", 50}, {"value", 3}}}}});
  expect_error(res, 409, "NonMonotonicTime");

  expect_error(request("POST", "/api/sessions", {{"experiment_id", eid}, {"subject_id", sid}}), 409,
               "SessionAlreadyOpen");
  expect_error(request("POST", "/api/sessions/" + ses + "/finalize", {{"last_playback_position_ms", 3000}}), 422,
               "IncompleteViewing");
  expect_error(request("GET", "/api/experiments/" + eid + "/results"), 422, "NoTraces");

  res = request("POST", "/api/sessions/" + ses + "/finalize", {{"last_playback_position_ms", 10'000}});
  ASSERT_EQ(res.status, 200);
  EXPECT_EQ(res.json_body().at("state"), "finalized");
  expect_error(request("POST", "/api/sessions/" + ses + "/abandon"), 409, "SessionNotOpen");
  EXPECT_EQ(request("GET", "/api/sessions/" + ses).json_body().at("sample_count"), 2);

  const auto detail = request("GET", "/api/experiments/" + eid).json_body();
  EXPECT_EQ(detail.at("subjects").at(0).at("sessions").at(0).at("state"), "finalized");
}

TEST_F(RouterTest, BatchSeqReplayAcceptedOnce) {
  const auto eid = create_experiment();
  const auto [sid, ses] = subject_and_session(eid);
  const json batch{{"batch_seq", 4}, {"samples", {{{"video_time_ms", 0}, {"value", 2}}}}};
  auto first = request("POST", "/api/sessions/" + ses + "/samples", batch).json_body();
  auto second = request("POST", "/api/sessions/" + ses + "/samples", batch).json_body();
  EXPECT_FALSE(first.at("duplicate").get<bool>());
  EXPECT_TRUE(second.at("duplicate").get<bool>());
  EXPECT_EQ(second.at("sample_count"), 1);
}

TEST_F(RouterTest, ResultsAreStableAndHonourGrid) {
  const auto eid = create_experiment();
  for (int i = 0; i < 3; ++i) {
    const auto [sid, ses] = subject_and_session(eid, "s" + std::to_string(i));
    request("POST", "/api/sessions/" + ses + "/samples",
            {{"samples", {{{"video_time_ms", 0}, {"value", 3 + i}}, {{"video_time_ms", 5000}, {"value", 4}}}}});
    request("POST", "/api/sessions/" + ses + "/finalize", {{"last_playback_position_ms", 10'000}});
  }
  const auto a = request("GET", "/api/experiments/" + eid + "/results");
  const auto b = request("GET", "/api/experiments/" + eid + "/results");
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body, b.body);
  const auto body = a.json_body();
  EXPECT_EQ(body.at("aggregate").at("subject_count"), 3);
  EXPECT_EQ(body.at("aggregate").at("mean").size(), 101u);
  EXPECT_EQ(body.at("mos").at("per_subject_overall").size(), 3u);
  EXPECT_EQ(body.at("mos").at("mos").get<double>(), 4.0);
  EXPECT_EQ(body.at("subjects").size(), 3u);

  const auto coarse = request("GET", "/api/experiments/" + eid + "/results", nullptr, {{"grid_ms", "1000"}});
  EXPECT_EQ(coarse.json_body().at("aggregate").at("mean").size(), 11u);
  expect_error(request("GET", "/api/experiments/" + eid + "/results", nullptr, {{"grid_ms", "0"}}), 422,
               "InvalidGrid");
  expect_error(request("GET", "/api/experiments/" + eid + "/results", nullptr, {{"grid_ms", "x"}}), 400,
               "BadRequest");
}

TEST_F(RouterTest, ExportZipHoldsTheBundle) {
  const auto eid = create_experiment();
  const auto [sid, ses] = subject_and_session(eid);
  request("POST", "/api/sessions/" + ses + "/samples", {{"samples", {{{"video_time_ms", 0}, {"value", 3}}}}});
  request("POST", "/api/sessions/" + ses + "/finalize", {{"last_playback_position_ms", 10'000}});
  const auto res = request("GET", "/api/experiments/" + eid + "/export");
  ASSERT_EQ(res.status, 200);
  EXPECT_EQ(res.content_type, "application/zip");
  const auto entries = zip::read(res.body);
  ASSERT_EQ(entries.size(), 4u);
  const auto bundle = service.export_bundle(eid);
  EXPECT_EQ(entries[0], (zip::Entry{"experiments.csv", bundle.experiments_csv}));
  EXPECT_EQ(entries[1], (zip::Entry{"subjects.csv", bundle.subjects_csv}));
  EXPECT_EQ(entries[2], (zip::Entry{"samples.csv", bundle.samples_csv}));
  EXPECT_EQ(entries[3].first, "aggregate.csv");
  EXPECT_EQ(csv::parse(entries[3].second).size(), 102u);
  EXPECT_EQ(request("GET", "/api/experiments/" + eid + "/export").body, res.body);
}

TEST_F(RouterTest, EveryErrorCodeHasAWireStatus) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::TransportError); ++c) {
    const auto code = static_cast<ErrorCode>(c);
    const int status = http_status(code);
    EXPECT_TRUE(status == 400 || status == 404 || status == 409 || status == 422) << to_string(code);
    EXPECT_NE(to_string(code), "Unknown");
  }
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("vqa-api-" + std::to_string(std::random_device{}()))) {}
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// Service + HTTP server on an ephemeral port for the lifetime of the object.
struct LiveServer {
  explicit LiveServer(const fs::path& store)
      : service(std::make_shared<FileStore>(store)), router(service), server(router) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.run(); });
    server.wait_until_ready();
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  ExperimentService service;
  api::Router router;
  HttpServer server;
  int port = 0;
  std::thread thread;
};

TEST(HttpServerTest, HealthzAndBindFailure) {
  TempDir dir;
  LiveServer live(dir.path());
  httplib::Client client(live.url());
  const auto res = client.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_NE(res->body.find(kVersion), std::string::npos);

  api::Router router(live.service);
  HttpServer second(router);
  try {
    second.bind("127.0.0.1", live.port);
    FAIL() << "bind on an occupied port succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BindFailure);
  }
}

TEST(HttpServerTest, VideoUploadAndRangeDelivery) {
  TempDir dir;
  LiveServer live(dir.path());
  HttpTransport transport(live.url());
  const auto eid = transport.call("POST", "/api/experiments", slider_experiment_body()).at("id").get<std::string>();

  std::string video(4096, '\0');
  for (std::size_t i = 0; i < video.size(); ++i) video[i] = static_cast<char>(i % 251);
  httplib::Client client(live.url());
  httplib::MultipartFormDataItems items{{"video", video, "clip2.mp4", "video/mp4"}, {"duration_ms", "8000", "", ""}};
  const auto up = client.Post("/api/experiments/" + eid + "/video", items);
  ASSERT_TRUE(up);
  ASSERT_EQ(up->status, 200) << up->body;
  const auto meta = json::parse(up->body);
  EXPECT_EQ(meta.at("duration_ms"), 8000);
  EXPECT_EQ(meta.at("file_name"), "clip2.mp4");
  const auto hash = meta.at("content_hash").get<std::string>();
  EXPECT_EQ(hash, sha256_hex(video));

  const auto full = client.Get("/media/" + hash);
  ASSERT_TRUE(full);
  EXPECT_EQ(full->status, 200);
  EXPECT_EQ(full->body, video);

  const auto part = client.Get("/media/" + hash, {{"Range", "bytes=100-199"}});
  ASSERT_TRUE(part);
  EXPECT_EQ(part->status, 206);
  EXPECT_EQ(part->body, video.substr(100, 100));
  EXPECT_EQ(client.Get("/media/deadbeef")->status, 404);
}

TEST(HttpServerTest, OpenSessionSurvivesRestart) {
  TempDir dir;
  std::string ses;
  {
    LiveServer live(dir.path());
    HttpTransport t(live.url());
    const auto eid = t.call("POST", "/api/experiments", slider_experiment_body()).at("id").get<std::string>();
    const auto sid = t.call("POST", "/api/experiments/" + eid + "/subjects", {{"display_name", "a"}}).at("id");
    ses = t.call("POST", "/api/sessions", {{"experiment_id", eid}, {"subject_id", sid}}).at("id").get<std::string>();
    t.call("POST", "/api/sessions/" + ses + "/samples",
           {{"batch_seq", 1}, {"samples", {{{"video_time_ms", 0}, {"value", 2}}}}});
  }
  LiveServer live(dir.path());
  HttpTransport t(live.url());
  EXPECT_EQ(t.call("GET", "/api/sessions/" + ses).at("state"), "open");
  const auto res = t.call("POST", "/api/sessions/" + ses + "/samples",
                          {{"batch_seq", 2}, {"samples", {{{"video_time_ms", 100}, {"value", 2.5}}}}});
  EXPECT_EQ(res.at("sample_count"), 2);
  try {
    t.call("POST", "/api/sessions/" + ses + "/samples", {{"samples", {{{"video_time_ms", 100}, {"value", 2}}}}});
    FAIL();
  } catch (const Transport::RemoteError& e) {
    EXPECT_EQ(e.wire_code(), "NonMonotonicTime");
    EXPECT_EQ(e.status(), 409);
  }
}

}  // namespace
}  // namespace vqa
