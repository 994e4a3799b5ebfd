// vqa: command line for the continuous video assessment service.
//
//   vqa serve    --bind 127.0.0.1:8080 --store DIR [--assets DIR]
//   vqa create   --name N --input slider|radio:N --labels a|b [--scale 1:5:0.01] [--video PATH] [--duration-ms MS]
//   vqa list
//   vqa export   --experiment ID --out DIR [--include-incomplete]
//   vqa mos      --bundle DIR
//   vqa simulate --experiment ID [--subjects 30] [--heartbeat-ms 100] [--seed 1]
//
// create/list/export/simulate talk to a running service with --server URL,
// otherwise they operate on the store directory given by --store.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "vqa/api.hpp"
#include "vqa/http.hpp"
#include "vqa/simulate.hpp"

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string server;
  std::string store = "vqa-data";
  std::string format = "table";
};

/// Either an HTTP client or an in-process router over a file store.
class Connection {
 public:
  explicit Connection(const Globals& g) {
    if (!g.server.empty()) {
      transport_ = std::make_unique<vqa::HttpTransport>(g.server);
    } else {
      service_ = std::make_unique<vqa::ExperimentService>(std::make_shared<vqa::FileStore>(g.store));
      router_ = std::make_unique<vqa::api::Router>(*service_);
      transport_ = std::make_unique<vqa::LoopbackTransport>(*router_);
    }
  }
  vqa::Transport& transport() { return *transport_; }

 private:
  std::unique_ptr<vqa::ExperimentService> service_;
  std::unique_ptr<vqa::api::Router> router_;
  std::unique_ptr<vqa::Transport> transport_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) vqa::fail(vqa::ErrorCode::NotFound, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) vqa::fail(vqa::ErrorCode::StoreUnavailable, "cannot write " + path.string());
}

vqa::InputMethodConfig parse_input(const std::string& input, const std::string& labels, const std::string& scale) {
  vqa::InputMethodConfig config;
  if (!labels.empty()) config.labels = vqa::csv::split(labels, '|');
  if (input == "slider") {
    config.kind = vqa::InputKind::Slider;
    if (!scale.empty()) {
      const auto parts = vqa::csv::split(scale, ':');
      if (parts.size() != 3 || !vqa::parse_double(parts[0], config.scale.min_value) ||
          !vqa::parse_double(parts[1], config.scale.max_value) || !vqa::parse_double(parts[2], config.scale.step)) {
        vqa::fail(vqa::ErrorCode::InvalidScale, "--scale expects min:max:step");
      }
    }
  } else if (input.rfind("radio:", 0) == 0) {
    config.kind = vqa::InputKind::RadioButtons;
    std::int64_t n = 0;
    if (!vqa::parse_int(input.substr(6), n)) vqa::fail(vqa::ErrorCode::BadRequest, "--input radio:N needs a number");
    config.level_count = static_cast<int>(n);
    if (labels.empty()) {
      for (int i = 1; i <= config.level_count; ++i) config.labels.push_back(std::to_string(i));
    }
  } else {
    vqa::fail(vqa::ErrorCode::BadRequest, "--input must be 'slider' or 'radio:N'");
  }
  return vqa::validate_input_method(config);
}

void print_report(const vqa::json& report, const std::string& format) {
  if (format == "json") {
    std::cout << report.dump(2) << "\n";
    return;
  }
  const auto& mos = report.at("mos");
  std::printf("%-16s %10s\n", "subject", "overall");
  for (const auto& [id, v] : mos.at("per_subject_overall").items()) {
    std::printf("%-16s %10.2f\n", id.c_str(), v.get<double>());
  }
  std::printf("%-16s %10.2f\n", "MOS", mos.at("mos").get<double>());
  if (report.contains("aggregate")) {
    const auto& agg = report.at("aggregate");
    std::printf("subjects: %d, aggregate points: %zu at %lld ms\n", agg.at("subject_count").get<int>(),
                agg.at("mean").size(), static_cast<long long>(agg.at("grid_step_ms").get<std::int64_t>()));
  }
}

vqa::ExportBundle read_bundle(const fs::path& dir) {
  return {read_file(dir / vqa::kExperimentsFile), read_file(dir / vqa::kSubjectsFile),
          read_file(dir / vqa::kSamplesFile)};
}

std::atomic<vqa::HttpServer*> g_server{nullptr};

extern "C" void handle_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_serve(const std::string& bind, const std::string& store, const std::string& assets) {
  const auto colon = bind.rfind(':');
  std::int64_t port = 0;
  if (colon == std::string::npos || !vqa::parse_int(bind.substr(colon + 1), port)) {
    vqa::fail(vqa::ErrorCode::BadRequest, "--bind expects host:port");
  }
  vqa::ExperimentService service(std::make_shared<vqa::FileStore>(store));
  vqa::api::Router router(service);
  std::optional<fs::path> asset_dir;
  if (!assets.empty()) asset_dir = assets;
  vqa::HttpServer server(router, asset_dir);
  const int bound = server.bind(bind.substr(0, colon), static_cast<int>(port));
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cerr << "vqa " << vqa::kVersion << " listening on " << bind.substr(0, colon) << ":" << bound << "\n";
  server.run();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous subjective video quality assessment"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--server", g.server, "Base URL of a running service (e.g. http://127.0.0.1:8080)");
  app.add_option("--store", g.store, "Store directory used when no --server is given");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"table", "json"}));

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string bind = "127.0.0.1:8080", assets;
  serve->add_option("--bind", bind, "host:port to listen on");
  serve->add_option("--assets", assets, "Webapp asset directory served at /");

  auto* create = app.add_subcommand("create", "Create an experiment");
  std::string name, input = "slider", labels, scale, video;
  std::int64_t duration_ms = 0;
  create->add_option("--name", name, "Experiment name")->required();
  create->add_option("--input", input, "slider | radio:N");
  create->add_option("--labels", labels, "Labels separated by '|'");
  create->add_option("--scale", scale, "Slider scale min:max:step (default 1:5:0.01)");
  create->add_option("--video", video, "Video file to attach");
  create->add_option("--duration-ms", duration_ms, "Video duration when it cannot be read from the file");

  auto* list = app.add_subcommand("list", "List experiments");

  auto* exp = app.add_subcommand("export", "Export an experiment as CSV files");
  std::string experiment_id, out_dir;
  bool include_incomplete = false;
  exp->add_option("--experiment", experiment_id, "Experiment id")->required();
  exp->add_option("--out", out_dir, "Output directory")->required();
  exp->add_flag("--include-incomplete", include_incomplete, "Also export open and abandoned sessions");

  auto* mos = app.add_subcommand("mos", "Compute per-subject overalls and MOS from an exported bundle");
  std::string bundle_dir;
  mos->add_option("--bundle", bundle_dir, "Directory holding experiments.csv, subjects.csv, samples.csv")->required();

  auto* sim = app.add_subcommand("simulate", "Drive synthetic subjects through an experiment");
  vqa::SimProfile profile;
  sim->add_option("--experiment", experiment_id, "Experiment id")->required();
  sim->add_option("--subjects", profile.subject_count, "Number of synthetic subjects");
  sim->add_option("--heartbeat-ms", profile.heartbeat_ms, "Capture heartbeat");
  sim->add_option("--reaction-lag-ms", profile.reaction_lag_ms, "Delay between opinion change and input");
  sim->add_option("--noise-sd", profile.noise_sd, "Input noise in scale units");
  sim->add_option("--seed", profile.seed, "Random seed");
  sim->add_option("--concurrency", profile.concurrency, "Subjects driven in parallel");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(bind, g.store, assets);

    if (*mos) {
      vqa::ExperimentService service(std::make_shared<vqa::MemoryStore>());
      const auto id = service.import_bundle(read_bundle(bundle_dir));
      print_report(vqa::to_json(service.summary_report(id)), g.format);
      return 0;
    }

    Connection conn(g);
    auto& t = conn.transport();

    if (*create) {
      vqa::Experiment draft;
      draft.name = name;
      draft.input_method = parse_input(input, labels, scale);
      std::string bytes;
      if (!video.empty()) {
        bytes = read_file(video);
        draft.video.file_name = fs::path(video).filename().string();
        if (duration_ms <= 0) duration_ms = vqa::mp4_duration_ms(bytes).value_or(0);
      }
      draft.video.duration_ms = duration_ms;
      vqa::validate_experiment(draft);
      auto created = t.call("POST", "/api/experiments", vqa::to_json(draft));
      const auto id = created.at("id").get<std::string>();
      if (!bytes.empty()) {
        vqa::api::Request upload{"POST", "/api/experiments/" + id + "/video",
                                 {{"file_name", draft.video.file_name}, {"duration_ms", std::to_string(duration_ms)}},
                                 bytes, "application/octet-stream"};
        created["video"] = vqa::Transport::decode(t.send(upload));
      }
      if (g.format == "json") {
        std::cout << created.dump(2) << "\n";
      } else {
        std::cout << id << "\n";
      }
      return 0;
    }

    if (*list) {
      const auto body = t.call("GET", "/api/experiments");
      if (g.format == "json") {
        std::cout << body.dump(2) << "\n";
        return 0;
      }
      std::printf("%-12s %-24s %-10s %12s\n", "id", "name", "input", "duration_ms");
      for (const auto& e : body.at("experiments")) {
        const auto& im = e.at("input_method");
        std::string kind = im.at("kind").get<std::string>();
        if (kind == "radio") kind += ":" + std::to_string(im.at("level_count").get<int>());
        std::printf("%-12s %-24s %-10s %12lld\n", e.at("id").get<std::string>().c_str(),
                    e.at("name").get<std::string>().c_str(), kind.c_str(),
                    static_cast<long long>(e.at("video").at("duration_ms").get<std::int64_t>()));
      }
      return 0;
    }

    if (*exp) {
      std::map<std::string, std::string> query;
      if (include_incomplete) query["include_incomplete"] = "1";
      const auto res = t.send({"GET", "/api/experiments/" + experiment_id + "/export", query, ""});
      if (res.status != 200) vqa::Transport::decode(res);
      fs::create_directories(out_dir);
      for (const auto& [file, content] : vqa::zip::read(res.body)) write_file(fs::path(out_dir) / file, content);
      std::cout << "exported " << experiment_id << " to " << out_dir << "\n";
      return 0;
    }

    if (*sim) {
      const auto result = vqa::run_simulation(t, experiment_id, profile);
      print_report(result.report, g.format);
      return 0;
    }
  } catch (const vqa::Transport::RemoteError& ex) {
    std::cerr << "error: " << ex.detail() << "\n";
    return 1;
  } catch (const vqa::Error& ex) {
    std::cerr << "error: " << vqa::to_string(ex.code()) << ": " << ex.detail() << "\n";
    return 1;
  }
  return 0;
}
