// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vqa/http.hpp"
#include "vqa/simulate.hpp"

#ifndef VQA_CLI_PATH
#error "VQA_CLI_PATH must name the vqa executable"
#endif

namespace {

using namespace vqa;
using namespace vqa::testing;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

template <class F>
void guarded(Outcome& out, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    out.check(false, std::string("exception: ") + e.what());
  }
}

Outcome oracle_equivalence() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(20190603);
  double worst = 0.0;
  guarded(out, [&] {
    for (int i = 0; i < 1000; ++i) {
      const auto duration = std::uniform_int_distribution<std::int64_t>(5'000, 120'000)(rng);
      const auto count = std::uniform_int_distribution<std::size_t>(1, 500)(rng);
      const auto trace = random_trace(rng, duration, count, random_scale(rng));
      const double got = time_weighted_mean(trace, duration);
      const double want = riemann_mean(trace.samples, duration);
      worst = std::max(worst, std::abs(got - want) / std::max(1e-300, std::abs(want)));
      out.check(close_rel(got, want, 1e-9), "trace " + std::to_string(i));
    }
  });
  const double elapsed = seconds_since(start);
  out.check(elapsed < 30.0, "runtime");
  out.detail << "1000 traces, worst relative error " << worst << ", " << elapsed << " s";
  return out;
}

Outcome aggregation_correctness() {
  Outcome out;
  std::mt19937_64 rng(601);
  std::size_t points = 0, clamped = 0;
  guarded(out, [&] {
    for (int e = 0; e < 100; ++e) {
      const auto duration = std::uniform_int_distribution<std::int64_t>(1'000, 60'000)(rng);
      const auto scale = random_scale(rng);
      const std::int64_t grid = std::array<std::int64_t, 4>{10, 100, 250, 1000}[rng() % 4];
      const int n = std::uniform_int_distribution<int>(1, 30)(rng);
      std::vector<AssessmentTrace> traces;
      for (int i = 0; i < n; ++i) traces.push_back(random_trace(rng, duration, 1 + rng() % 300, scale));
      const auto curve = aggregate_curve(traces, grid, duration);
      const auto size = grid_size(grid, duration);
      out.check(curve.mean.size() == size && curve.subject_count == n, "curve shape");
      for (std::size_t k = 0; k < size; ++k) {
        const auto t = static_cast<std::int64_t>(k) * grid;
        double sum = 0.0, lo = INFINITY, hi = -INFINITY;
        for (const auto& tr : traces) {
          const double v = value_at(tr, t, duration);
          out.check(v == hold_oracle(tr.samples, std::min(t, duration)), "value_at vs scan");
          sum += v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        const double raw = sum / n;
        const double mean = std::clamp(raw, lo, hi);
        clamped += mean != raw;
        ++points;
        out.check(curve.mean[k] == mean && curve.min[k] == lo && curve.max[k] == hi,
                  "experiment " + std::to_string(e) + " point " + std::to_string(k));
      }
      const auto single = std::span<const AssessmentTrace>(traces).first(1);
      const auto one = aggregate_curve(single, grid, duration);
      const auto resampled = resample_zoh(traces.front(), grid, duration);
      out.check(one.mean == resampled.values && one.min == resampled.values && one.max == resampled.values,
                "single-trace equivalence");
    }
  });
  out.detail << "100 experiments, " << points << " grid points exact (" << clamped
             << " means held inside [min,max] against rounding)";
  return out;
}

Outcome mos_properties() {
  Outcome out;
  std::mt19937_64 rng(453);
  guarded(out, [&] {
    out.check(mos({{"a", 4.0}, {"b", 5.0}, {"c", 3.0}}) == 4.0, "{4,5,3} -> 4.0");
    for (int trial = 0; trial < 500; ++trial) {
      const auto duration = std::uniform_int_distribution<std::int64_t>(5'000, 60'000)(rng);
      const auto scale = random_scale(rng);
      const int n = std::uniform_int_distribution<int>(1, 30)(rng);
      std::vector<AssessmentTrace> traces;
      std::vector<double> overall;
      for (int i = 0; i < n; ++i) {
        traces.push_back(random_trace(rng, duration, 1 + rng() % 200, scale));
        overall.push_back(time_weighted_mean(traces.back(), duration));
      }
      std::map<SubjectId, double> by_subject;
      for (int i = 0; i < n; ++i) by_subject["s" + std::to_string(1000 + i)] = overall[static_cast<std::size_t>(i)];
      const double m = mos(by_subject);

      auto shuffled = overall;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::map<SubjectId, double> permuted;
      for (int i = 0; i < n; ++i) permuted["s" + std::to_string(1000 + i)] = shuffled[static_cast<std::size_t>(i)];
      out.check(mos(permuted) == m, "permutation invariance");

      const auto [lo, hi] = std::minmax_element(overall.begin(), overall.end());
      out.check(*lo <= m && m <= *hi, "bounds");

      const double a = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
      const double b = std::uniform_real_distribution<double>(-10.0, 10.0)(rng);
      std::map<SubjectId, double> transformed;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        auto t = traces[i];
        for (auto& s : t.samples) s.value = a * s.value + b;
        transformed["s" + std::to_string(1000 + i)] = time_weighted_mean(t, duration);
      }
      out.check(close_rel(mos(transformed), a * m + b, 1e-9), "affine commutation");
    }
  });
  out.detail << "500 random panels plus the {4,5,3} example";
  return out;
}

std::string report_text(ExperimentService& s, const ExperimentId& id) {
  try {
    return to_json(s.summary_report(id)).dump();
  } catch (const Error& e) {
    return std::string(to_string(e.code()));
  }
}

Outcome round_trip() {
  Outcome out;
  std::mt19937_64 rng(50);
  int with_results = 0;
  guarded(out, [&] {
    for (int i = 0; i < 50; ++i) {
      ExperimentService source(std::make_shared<MemoryStore>());
      const auto id = populate_random_experiment(source, rng);
      const bool incomplete = i % 2 == 0;
      const auto first = source.export_bundle(id, incomplete);
      ExperimentService target(std::make_shared<MemoryStore>());
      const auto imported = target.import_bundle(first);
      const auto second = target.export_bundle(imported, incomplete);
      out.check(first.experiments_csv == second.experiments_csv && first.subjects_csv == second.subjects_csv &&
                    first.samples_csv == second.samples_csv,
                "bytes differ for experiment " + std::to_string(i));
      const auto a = report_text(source, id);
      out.check(a == report_text(target, imported), "report differs for experiment " + std::to_string(i));
      with_results += a.front() == '{';
    }
  });
  out.detail << "50 experiments byte-identical, " << with_results << " with matching MOS and aggregate";
  return out;
}

Outcome ingestion_state_machine() {
  Outcome out;
  std::mt19937_64 rng(500);
  int batches = 0, rejected = 0, replays = 0;
  guarded(out, [&] {
    for (int trial = 0; trial < 40; ++trial) {
      ExperimentService service(std::make_shared<MemoryStore>());
      const auto duration = std::uniform_int_distribution<std::int64_t>(2'000, 30'000)(rng);
      const auto e = service.create_experiment(make_experiment(random_input(rng), duration));
      const auto scale = effective_scale(e.input_method);
      const int subjects = std::uniform_int_distribution<int>(1, 6)(rng);
      std::set<SubjectId> finalized;
      for (int p = 0; p < subjects; ++p) {
        const auto subject = service.add_subject(e.id, "p" + std::to_string(p));
        const auto session = service.begin_session(e.id, subject.id);
        std::vector<AssessmentSample> model;
        std::vector<std::pair<std::int64_t, std::vector<AssessmentSample>>> sent;
        std::int64_t next_t = 0, seq = 0;
        for (int step = 0; step < 30; ++step) {
          ++batches;
          const int roll = static_cast<int>(rng() % 10);
          if (roll == 0 && !sent.empty()) {
            const auto& [s, batch] = sent[rng() % sent.size()];
            const auto r = service.append_samples(session.id, batch, s);
            ++replays;
            out.check(r.duplicate && r.accepted == static_cast<std::int64_t>(batch.size()), "replay flagged");
          } else {
            std::vector<AssessmentSample> batch;
            const int len = std::uniform_int_distribution<int>(1, 8)(rng);
            std::int64_t t = next_t;
            for (int k = 0; k < len && t <= duration; ++k) {
              batch.push_back({t, random_grid_value(rng, scale), now_utc()});
              t += std::uniform_int_distribution<std::int64_t>(1, 400)(rng);
            }
            if (batch.empty()) break;
            const bool poison = roll <= 3;
            if (poison) {
              auto& victim = batch[rng() % batch.size()];
              switch (rng() % 4) {
                case 0: victim.video_time_ms = model.empty() ? -1 : model.back().video_time_ms; break;
                case 1: victim.value = scale.max_value + scale.step; break;
                case 2: victim.value += scale.step / 3; break;
                default: victim.video_time_ms = duration + 1; break;
              }
            }
            const auto before = service.session(session.id)->samples;
            try {
              const auto r = service.append_samples(session.id, batch, ++seq);
              out.check(!poison, "poisoned batch accepted");
              out.check(r.accepted == static_cast<std::int64_t>(batch.size()) && !r.duplicate, "accepted count");
              model.insert(model.end(), batch.begin(), batch.end());
              sent.emplace_back(seq, batch);
              next_t = model.back().video_time_ms + 1;
            } catch (const Error&) {
              ++rejected;
              out.check(poison, "clean batch rejected");
              out.check(service.session(session.id)->samples == before, "rejected batch left a trace");
            }
          }
          const auto& stored = service.session(session.id)->samples;
          out.check(stored.size() == model.size(), "stored count");
          for (std::size_t k = 0; k < stored.size(); ++k) {
            out.check(stored[k].video_time_ms == model[k].video_time_ms && stored[k].value == model[k].value,
                      "stored sample");
            if (k) out.check(stored[k - 1].video_time_ms < stored[k].video_time_ms, "strict monotonic");
          }
        }
        switch (rng() % 3) {
          case 0:
            if (!model.empty() && model.front().video_time_ms == 0) {
              service.finalize_session(session.id, duration);
              finalized.insert(subject.id);
            }
            break;
          case 1: service.abandon_session(session.id); break;
          default: break;
        }
      }
      std::set<SubjectId> reported;
      try {
        for (const auto& [id, v] : service.summary_report(e.id).mos.per_subject_overall) reported.insert(id);
      } catch (const Error& err) {
        out.check(err.code() == ErrorCode::NoTraces && finalized.empty(), "results error");
      }
      out.check(reported == finalized, "results include exactly the finalized sessions");
    }
  });
  out.detail << batches << " batch operations, " << rejected << " rejected atomically, " << replays
             << " idempotent replays";
  return out;
}

Outcome validation_boundaries() {
  Outcome out;
  auto radio_code = [](int n) -> std::optional<ErrorCode> {
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("l" + std::to_string(i));
    try {
      validate_experiment(make_experiment(InputMethodConfig::radio(labels), 1000));
      return std::nullopt;
    } catch (const Error& e) {
      return e.code();
    }
  };
  out.check(radio_code(1) == ErrorCode::LevelCountOutOfRange, "1 level");
  out.check(radio_code(11) == ErrorCode::LevelCountOutOfRange, "11 levels");
  out.check(!radio_code(2), "2 levels");
  out.check(!radio_code(10), "10 levels");

  auto sample_code = [](const InputMethodConfig& input, double v) -> std::optional<ErrorCode> {
    try {
      validate_sample({0, v, now_utc()}, input, 1000);
      return std::nullopt;
    } catch (const Error& e) {
      return e.code();
    }
  };
  const auto slider = InputMethodConfig::slider("low", "high", {1, 5, 0.01});
  const auto radio = InputMethodConfig::radio({"a", "b", "c", "d", "e"});
  out.check(sample_code(slider, 3.005) == ErrorCode::ValueOffGrid, "slider off grid");
  out.check(sample_code(slider, 5.01) == ErrorCode::ValueOutOfRange, "slider above");
  out.check(sample_code(slider, 0.99) == ErrorCode::ValueOutOfRange, "slider below");
  out.check(!sample_code(slider, 1.0) && !sample_code(slider, 5.0) && !sample_code(slider, 3.01), "slider on grid");
  out.check(sample_code(radio, 2.5) == ErrorCode::ValueOffGrid, "radio off grid");
  out.check(sample_code(radio, 6) == ErrorCode::ValueOutOfRange, "radio above");
  out.check(sample_code(radio, 0) == ErrorCode::ValueOutOfRange, "radio below");
  out.check(!sample_code(radio, 1) && !sample_code(radio, 5), "radio levels");
  out.detail << "radio 1/11 rejected, 2/10 accepted; off-grid and out-of-range values rejected";
  return out;
}

Outcome desk_scale_run() {
  Outcome out;
  const auto dir = std::filesystem::temp_directory_path() / ("vqa-accept-" + std::to_string(std::random_device{}()));
  guarded(out, [&] {
    ExperimentService service(std::make_shared<FileStore>(dir));
    api::Router router(service);
    HttpServer server(router);
    const int port = server.bind("127.0.0.1", 0);
    std::thread thread([&] { server.run(); });
    server.wait_until_ready();
    const std::string url = "http://127.0.0.1:" + std::to_string(port);
    try {
      HttpTransport transport(url);
      const auto created = transport.call(
          "POST", "/api/experiments",
          to_json(make_experiment(InputMethodConfig::slider("unpleasant", "pleasant", {1, 5, 0.01}), 60'000,
                                  "desk scale")));
      const auto id = created.at("id").get<std::string>();

      const auto start = Clock::now();
      const std::string cmd = std::string("\"") + VQA_CLI_PATH + "\" --server " + url + " simulate --experiment " +
                              id + " --subjects 30 > /dev/null";
      const int rc = std::system(cmd.c_str());
      const double elapsed = seconds_since(start);
      out.check(rc == 0, "simulate exit status " + std::to_string(rc));
      out.check(elapsed < 60.0, "runtime");

      const auto report = transport.call("GET", "/api/experiments/" + id + "/results");
      const auto& agg = report.at("aggregate");
      const int subjects = agg.at("subject_count").get<int>();
      const auto points = agg.at("mean").size();
      const double m = report.at("mos").at("mos").get<double>();
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& [sid, v] : report.at("mos").at("per_subject_overall").items()) {
        lo = std::min(lo, v.get<double>());
        hi = std::max(hi, v.get<double>());
      }
      out.check(subjects == 30, "subject_count");
      out.check(lo <= m && m <= hi, "MOS inside overall range");
      out.check(points == 601 && agg.at("grid_step_ms") == 100, "601-point curve");
      out.detail << "30 subjects in " << elapsed << " s, MOS " << m << " in [" << lo << ", " << hi << "], "
                 << points << " points";
    } catch (...) {
      server.stop();
      thread.join();
      throw;
    }
    server.stop();
    thread.join();
  });
  std::filesystem::remove_all(dir);
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"aggregation correctness", aggregation_correctness},
      {"MOS properties", mos_properties},
      {"export/import round trip", round_trip},
      {"ingestion state machine", ingestion_state_machine},
      {"validation boundaries", validation_boundaries},
      {"desk-scale protocol run", desk_scale_run},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    const auto outcome = run();
    failed += !outcome.pass;
    std::printf("%s %d %s: %s\n", outcome.pass ? "PASS" : "FAIL", ++n, name, outcome.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
