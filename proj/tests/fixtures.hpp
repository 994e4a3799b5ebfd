#pragma once

#include <random>
#include <string>

#include "oracles.hpp"
#include "vqa/service.hpp"

namespace vqa::testing {

struct PopulateOptions {
  int max_subjects = 6;
  std::size_t max_samples = 200;
  bool with_incomplete = true;
};

/// Creates an experiment with a random input method, random subjects and a
/// mix of finalized, open and abandoned sessions, all through the service.
inline ExperimentId populate_random_experiment(ExperimentService& service, std::mt19937_64& rng,
                                               PopulateOptions options = {}) {
  const auto duration = std::uniform_int_distribution<std::int64_t>(5'000, 120'000)(rng);
  auto e = make_experiment(random_input(rng), duration, "study, \"take " + std::to_string(rng() % 100) + "\"");
  e = service.create_experiment(e);
  const auto scale = effective_scale(e.input_method);
  const int subjects = std::uniform_int_distribution<int>(1, options.max_subjects)(rng);
  for (int i = 0; i < subjects; ++i) {
    const auto subject = service.add_subject(e.id, i % 2 ? "P" + std::to_string(i) : "Doe, J.\n#" + std::to_string(i));
    const int kind = options.with_incomplete ? static_cast<int>(rng() % 5) : 0;
    if (kind == 4) continue;  // subject without any session
    const auto session = service.begin_session(e.id, subject.id);
    auto trace = random_trace(rng, duration, 1 + rng() % options.max_samples, scale);
    service.append_samples(session.id, trace.samples);
    if (kind <= 1) {
      service.finalize_session(session.id, duration);
    } else if (kind == 2) {
      service.abandon_session(session.id);
    }
  }
  return e.id;
}

}  // namespace vqa::testing
