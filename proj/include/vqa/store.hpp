#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "vqa/csv.hpp"
#include "vqa/serialize.hpp"
#include "vqa/session.hpp"

namespace vqa {

/// Ids double as file names, so they are restricted to a portable charset.
inline bool is_valid_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

/// Durable home of experiments, subjects, sessions and uploaded videos.
///
/// save() inserts or replaces and assigns a fresh id when the entity has
/// none. Listing returns ids in creation order. Implementations are
/// thread-safe; loaded sessions are immutable snapshots.
class Store {
 public:
  virtual ~Store() = default;

  virtual ExperimentId save(Experiment experiment) = 0;
  virtual SubjectId save(Subject subject) = 0;
  virtual SessionId save(SessionRecord session) = 0;

  virtual Experiment load_experiment(const ExperimentId& id) const = 0;
  virtual Subject load_subject(const SubjectId& id) const = 0;
  virtual std::shared_ptr<const SessionRecord> load_session(const SessionId& id) const = 0;

  virtual bool has_experiment(const ExperimentId& id) const = 0;

  virtual std::vector<ExperimentId> list_experiments() const = 0;
  virtual std::vector<SubjectId> list_subjects(const ExperimentId& experiment) const = 0;
  virtual std::vector<SessionId> list_sessions(const ExperimentId& experiment) const = 0;

  virtual void delete_experiment(const ExperimentId& id, bool force = false) = 0;
  virtual void delete_subject(const SubjectId& id, bool force = false) = 0;
  virtual void delete_session(const SessionId& id) = 0;

  virtual void save_media(const std::string& hash, const std::string& bytes) = 0;
  virtual std::optional<std::string> load_media(const std::string& hash) const = 0;
};

class MemoryStore : public Store {
 public:
  ExperimentId save(Experiment experiment) override {
    validate_experiment(experiment);
    std::unique_lock lock(mutex_);
    if (experiment.id.empty()) experiment.id = fresh_id("exp", experiments_);
    check_id(experiment.id);
    const auto seq = sequence_for(experiments_, experiment.id);
    persist(experiment, seq);
    experiments_[experiment.id] = {seq, std::make_shared<const Experiment>(experiment)};
    return experiment.id;
  }

  SubjectId save(Subject subject) override {
    std::unique_lock lock(mutex_);
    if (!experiments_.contains(subject.experiment_id)) {
      fail(ErrorCode::UnknownExperiment, "experiment " + subject.experiment_id + " does not exist");
    }
    if (subject.id.empty()) subject.id = fresh_id("sub", subjects_);
    check_id(subject.id);
    if (auto it = subjects_.find(subject.id);
        it != subjects_.end() && it->second.value->experiment_id != subject.experiment_id) {
      fail(ErrorCode::DuplicateId, "subject " + subject.id + " belongs to another experiment");
    }
    const auto seq = sequence_for(subjects_, subject.id);
    persist(subject, seq);
    subjects_[subject.id] = {seq, std::make_shared<const Subject>(subject)};
    return subject.id;
  }

  SessionId save(SessionRecord session) override {
    std::unique_lock lock(mutex_);
    if (!experiments_.contains(session.experiment_id)) {
      fail(ErrorCode::UnknownExperiment, "experiment " + session.experiment_id + " does not exist");
    }
    auto subject = subjects_.find(session.subject_id);
    if (subject == subjects_.end() || subject->second.value->experiment_id != session.experiment_id) {
      fail(ErrorCode::UnknownSubject, "subject " + session.subject_id + " is not part of experiment " +
                                          session.experiment_id);
    }
    if (session.id.empty()) session.id = fresh_id("ses", sessions_);
    check_id(session.id);
    if (auto it = sessions_.find(session.id);
        it != sessions_.end() && it->second.value->experiment_id != session.experiment_id) {
      fail(ErrorCode::DuplicateId, "session " + session.id + " belongs to another experiment");
    }
    const auto seq = sequence_for(sessions_, session.id);
    persist(session, seq);
    SessionId id = session.id;
    sessions_[id] = {seq, std::make_shared<const SessionRecord>(std::move(session))};
    return id;
  }

  Experiment load_experiment(const ExperimentId& id) const override {
    std::shared_lock lock(mutex_);
    return *lookup(experiments_, id, "experiment");
  }

  Subject load_subject(const SubjectId& id) const override {
    std::shared_lock lock(mutex_);
    return *lookup(subjects_, id, "subject");
  }

  std::shared_ptr<const SessionRecord> load_session(const SessionId& id) const override {
    std::shared_lock lock(mutex_);
    return lookup(sessions_, id, "session");
  }

  bool has_experiment(const ExperimentId& id) const override {
    std::shared_lock lock(mutex_);
    return experiments_.contains(id);
  }

  std::vector<ExperimentId> list_experiments() const override {
    std::shared_lock lock(mutex_);
    return ordered(experiments_, [](const Experiment&) { return true; });
  }

  std::vector<SubjectId> list_subjects(const ExperimentId& experiment) const override {
    std::shared_lock lock(mutex_);
    return ordered(subjects_, [&](const Subject& s) { return s.experiment_id == experiment; });
  }

  std::vector<SessionId> list_sessions(const ExperimentId& experiment) const override {
    std::shared_lock lock(mutex_);
    return ordered(sessions_, [&](const SessionRecord& s) { return s.experiment_id == experiment; });
  }

  void delete_experiment(const ExperimentId& id, bool force = false) override {
    std::unique_lock lock(mutex_);
    auto experiment = lookup(experiments_, id, "experiment");
    const auto subjects = ordered(subjects_, [&](const Subject& s) { return s.experiment_id == id; });
    if (!subjects.empty() && !force) {
      fail(ErrorCode::ReferentialIntegrity, "experiment " + id + " still has subjects");
    }
    for (const auto& [sid, entry] : sessions_) {
      if (entry.value->experiment_id == id) unpersist(*entry.value);
    }
    std::erase_if(sessions_, [&](const auto& kv) { return kv.second.value->experiment_id == id; });
    for (const auto& sid : subjects) unpersist(*subjects_.at(sid).value);
    std::erase_if(subjects_, [&](const auto& kv) { return kv.second.value->experiment_id == id; });
    unpersist(*experiment);
    experiments_.erase(id);
  }

  void delete_subject(const SubjectId& id, bool force = false) override {
    std::unique_lock lock(mutex_);
    auto subject = lookup(subjects_, id, "subject");
    const bool referenced = std::any_of(sessions_.begin(), sessions_.end(),
                                        [&](const auto& kv) { return kv.second.value->subject_id == id; });
    if (referenced && !force) fail(ErrorCode::ReferentialIntegrity, "subject " + id + " has sessions");
    for (const auto& [sid, entry] : sessions_) {
      if (entry.value->subject_id == id) unpersist(*entry.value);
    }
    std::erase_if(sessions_, [&](const auto& kv) { return kv.second.value->subject_id == id; });
    unpersist(*subject);
    subjects_.erase(id);
  }

  void delete_session(const SessionId& id) override {
    std::unique_lock lock(mutex_);
    auto session = lookup(sessions_, id, "session");
    unpersist(*session);
    sessions_.erase(id);
  }

  void save_media(const std::string& hash, const std::string& bytes) override {
    std::unique_lock lock(mutex_);
    if (!is_valid_id(hash)) fail(ErrorCode::BadRequest, "invalid media hash");
    media_[hash] = bytes;
  }

  std::optional<std::string> load_media(const std::string& hash) const override {
    std::shared_lock lock(mutex_);
    if (auto it = media_.find(hash); it != media_.end()) return it->second;
    return std::nullopt;
  }

 protected:
  template <typename T>
  struct Entry {
    std::uint64_t seq = 0;
    std::shared_ptr<const T> value;
  };

  // Persistence hooks, called with the write lock held before the in-memory
  // state changes. A throwing hook leaves the store unchanged.
  virtual void persist(const Experiment&, std::uint64_t) {}
  virtual void persist(const Subject&, std::uint64_t) {}
  virtual void persist(const SessionRecord&, std::uint64_t) {}
  virtual void persist_counters() {}
  virtual void unpersist(const Experiment&) {}
  virtual void unpersist(const Subject&) {}
  virtual void unpersist(const SessionRecord&) {}

  // Loading support for subclasses (no hooks fire).
  void restore(Experiment e, std::uint64_t seq) {
    const auto id = e.id;
    experiments_[id] = {seq, std::make_shared<const Experiment>(std::move(e))};
    next_seq_ = std::max(next_seq_, seq + 1);
  }
  void restore(Subject s, std::uint64_t seq) {
    const auto id = s.id;
    subjects_[id] = {seq, std::make_shared<const Subject>(std::move(s))};
    next_seq_ = std::max(next_seq_, seq + 1);
  }
  void restore(SessionRecord s, std::uint64_t seq) {
    const auto id = s.id;
    sessions_[id] = {seq, std::make_shared<const SessionRecord>(std::move(s))};
    next_seq_ = std::max(next_seq_, seq + 1);
  }

  std::map<std::string, std::uint64_t> counters_;
  std::uint64_t next_seq_ = 1;

 private:
  static void check_id(const std::string& id) {
    if (!is_valid_id(id)) fail(ErrorCode::BadRequest, "invalid id '" + id + "'");
  }

  template <typename T>
  std::string fresh_id(const std::string& prefix, const std::map<std::string, Entry<T>>& existing) {
    for (;;) {
      const auto n = ++counters_[prefix];
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s-%06llu", prefix.c_str(), static_cast<unsigned long long>(n));
      if (!existing.contains(buf)) {
        persist_counters();
        return buf;
      }
    }
  }

  template <typename T>
  std::uint64_t sequence_for(const std::map<std::string, Entry<T>>& existing, const std::string& id) {
    if (auto it = existing.find(id); it != existing.end()) return it->second.seq;
    return next_seq_++;
  }

  template <typename T>
  static std::shared_ptr<const T> lookup(const std::map<std::string, Entry<T>>& m, const std::string& id,
                                         const char* kind) {
    auto it = m.find(id);
    if (it == m.end()) fail(ErrorCode::NotFound, std::string(kind) + " " + id + " not found");
    return it->second.value;
  }

  template <typename T, typename Pred>
  static std::vector<std::string> ordered(const std::map<std::string, Entry<T>>& m, Pred pred) {
    std::vector<std::pair<std::uint64_t, std::string>> keyed;
    for (const auto& [id, e] : m) {
      if (pred(*e.value)) keyed.emplace_back(e.seq, id);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::string> out;
    out.reserve(keyed.size());
    for (auto& [seq, id] : keyed) out.push_back(std::move(id));
    return out;
  }

  mutable std::shared_mutex mutex_;
  std::map<ExperimentId, Entry<Experiment>> experiments_;
  std::map<SubjectId, Entry<Subject>> subjects_;
  std::map<SessionId, Entry<SessionRecord>> sessions_;
  std::map<std::string, std::string> media_;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::StoreUnavailable, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write-new-then-rename: readers see either the old or the new file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::StoreUnavailable, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorCode::StoreUnavailable, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::StoreUnavailable, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace detail

/// Directory-backed store:
///
///   <root>/meta.json                               id counters
///   <root>/media/<sha256>                          uploaded videos
///   <root>/experiments/<id>/experiment.json
///   <root>/experiments/<id>/subjects/<id>.json
///   <root>/experiments/<id>/sessions/<id>.json     state, batch log, sample count
///   <root>/experiments/<id>/sessions/<id>.samples  columnar sample table
///
/// The samples table is written before the session record. Samples only
/// ever grow, so loading keeps the first `sample_count` rows and a crash
/// between the two renames yields the previous session state.
class FileStore : public MemoryStore {
 public:
  explicit FileStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_ / "experiments", ec);
    std::filesystem::create_directories(root_ / "media", ec);
    if (ec || !std::filesystem::is_directory(root_)) {
      fail(ErrorCode::StoreUnavailable, "cannot create store at " + root_.string());
    }
    const auto probe = root_ / ".probe";
    detail::write_file_atomic(probe, "ok");
    std::filesystem::remove(probe, ec);
    load();
  }

  const std::filesystem::path& root() const { return root_; }

 public:
  void save_media(const std::string& hash, const std::string& bytes) override {
    if (!is_valid_id(hash)) fail(ErrorCode::BadRequest, "invalid media hash");
    detail::write_file_atomic(root_ / "media" / hash, bytes);
  }

  std::optional<std::string> load_media(const std::string& hash) const override {
    const auto path = root_ / "media" / hash;
    if (!is_valid_id(hash) || !std::filesystem::is_regular_file(path)) return std::nullopt;
    return detail::read_file(path);
  }

 protected:
  void persist(const Experiment& e, std::uint64_t seq) override {
    const auto dir = experiment_dir(e.id);
    std::filesystem::create_directories(dir / "subjects");
    std::filesystem::create_directories(dir / "sessions");
    auto j = to_json(e);
    j["seq"] = seq;
    detail::write_file_atomic(dir / "experiment.json", j.dump(2));
  }

  void persist(const Subject& s, std::uint64_t seq) override {
    auto j = to_json(s);
    j["seq"] = seq;
    detail::write_file_atomic(experiment_dir(s.experiment_id) / "subjects" / (s.id + ".json"), j.dump(2));
  }

  void persist(const SessionRecord& s, std::uint64_t seq) override {
    const auto base = experiment_dir(s.experiment_id) / "sessions";
    std::string table = "video_time_ms,value,wall_clock_utc\n";
    for (const auto& sample : s.samples) {
      csv::append_row(table, {std::to_string(sample.video_time_ms), format_shortest(sample.value),
                              format_utc(sample.wall_clock_utc)});
    }
    detail::write_file_atomic(base / (s.id + ".samples"), table);
    json batches = json::array();
    for (const auto& [seq_no, count] : s.applied_batches) batches.push_back({seq_no, count});
    json j = to_json(s);
    j["seq"] = seq;
    j["applied_batches"] = batches;
    detail::write_file_atomic(base / (s.id + ".json"), j.dump(2));
  }


  void persist_counters() override {
    detail::write_file_atomic(root_ / "meta.json", json{{"counters", counters_}}.dump(2));
  }

  void unpersist(const Experiment& e) override { std::filesystem::remove_all(experiment_dir(e.id)); }
  void unpersist(const Subject& s) override {
    std::filesystem::remove(experiment_dir(s.experiment_id) / "subjects" / (s.id + ".json"));
  }
  void unpersist(const SessionRecord& s) override {
    const auto base = experiment_dir(s.experiment_id) / "sessions";
    std::filesystem::remove(base / (s.id + ".json"));
    std::filesystem::remove(base / (s.id + ".samples"));
  }

 private:
  std::filesystem::path experiment_dir(const ExperimentId& id) const { return root_ / "experiments" / id; }

  static json read_json(const std::filesystem::path& path) {
    try {
      return json::parse(detail::read_file(path));
    } catch (const json::exception& ex) {
      fail(ErrorCode::StoreUnavailable, "corrupt record " + path.string() + ": " + ex.what());
    }
  }

  static std::vector<std::filesystem::path> records(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".json") out.push_back(entry.path());
    }
    return out;
  }

  static std::vector<AssessmentSample> read_samples(const std::filesystem::path& path, std::size_t count) {
    std::vector<AssessmentSample> out;
    if (count == 0) return out;
    const auto rows = csv::parse(detail::read_file(path));
    if (rows.size() < count + 1) fail(ErrorCode::StoreUnavailable, "truncated sample table " + path.string());
    out.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) {
      const auto& r = rows[i];
      AssessmentSample s;
      auto t = r.size() == 3 ? parse_utc(r[2]) : std::nullopt;
      if (!t || !parse_int(r[0], s.video_time_ms) || !parse_double(r[1], s.value)) {
        fail(ErrorCode::StoreUnavailable, "corrupt sample row in " + path.string());
      }
      s.wall_clock_utc = *t;
      out.push_back(s);
    }
    return out;
  }

  void load() {
    try {
      if (std::filesystem::exists(root_ / "meta.json")) {
        const auto meta = read_json(root_ / "meta.json");
        counters_ = meta.value("counters", std::map<std::string, std::uint64_t>{});
      }
      for (const auto& entry : std::filesystem::directory_iterator(root_ / "experiments")) {
        if (!entry.is_directory()) continue;
        const auto dir = entry.path();
        if (!std::filesystem::exists(dir / "experiment.json")) continue;
        const auto ej = read_json(dir / "experiment.json");
        restore(experiment_from_json(ej), ej.at("seq").get<std::uint64_t>());
        for (const auto& path : records(dir / "subjects")) {
          const auto sj = read_json(path);
          restore(subject_from_json(sj), sj.at("seq").get<std::uint64_t>());
        }
        for (const auto& path : records(dir / "sessions")) {
          const auto sj = read_json(path);
          SessionRecord s;
          s.id = sj.at("id").get<std::string>();
          s.experiment_id = sj.at("experiment_id").get<std::string>();
          s.subject_id = sj.at("subject_id").get<std::string>();
          auto state = parse_session_state(sj.at("state").get<std::string>());
          if (!state) fail(ErrorCode::StoreUnavailable, "bad session state in " + path.string());
          s.state = *state;
          for (const auto& b : sj.at("applied_batches")) {
            s.applied_batches[b.at(0).get<std::int64_t>()] = b.at(1).get<std::int64_t>();
          }
          auto samples_path = path;
          samples_path.replace_extension(".samples");
          s.samples = read_samples(samples_path, sj.at("sample_count").get<std::size_t>());
          restore(std::move(s), sj.at("seq").get<std::uint64_t>());
        }
      }
    } catch (const json::exception& ex) {
      fail(ErrorCode::StoreUnavailable, std::string("corrupt store: ") + ex.what());
    } catch (const Error& ex) {
      if (ex.code() == ErrorCode::StoreUnavailable) throw;
      fail(ErrorCode::StoreUnavailable, std::string("corrupt store: ") + ex.what());
    }
  }

  std::filesystem::path root_;
};

}  // namespace vqa
