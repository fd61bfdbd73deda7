/*
 * Copyright 2026 The driftwatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Long-running labeling service.
//
// Worker thread (one writer for the telemetry store and the sampler):
//   consume inbox/*.jsonl -> ingest -> sample -> card -> webhook,
//   sweep pending cards, and analyze each month once a later month has
//   data (workload drift, sysperf drift, entropy). A workload exceedance
//   or entropy trigger retrains on the trailing window and swaps the model.
// HTTP threads: reaction API and read-only views. Reactions go through the
//   LabelBoard, which serializes them.
//
// The model pointer is swapped under a mutex; each sampling decision uses
// one snapshot, so no decision mixes two models.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "driftwatch/config.hpp"
#include "driftwatch/pipeline.hpp"
#include "driftwatch/webhook.hpp"

namespace driftwatch {

using Clock = std::function<std::int64_t()>;

inline std::int64_t wall_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Card JSON plus its current tally, as served to the console.
inline nlohmann::json card_view(const LabelBoard& board, const CandidateCard& card, bool with_reactions) {
  auto j = to_json_value(card);
  j["label"] = to_json_value(board.label(card.point_id));
  if (with_reactions) {
    auto rs = nlohmann::json::array();
    for (const auto& r : board.records_for(card.point_id))
      rs.push_back({{"annotator_id", r.annotator_id}, {"verdict", to_string(r.verdict)}, {"timestamp", r.timestamp}});
    j["reactions"] = rs;
  }
  return j;
}

class Service {
 public:
  Service(PipelineConfig cfg, Transport transport, Sleeper sleep = {}, Clock clock = wall_clock_seconds)
      : cfg_(std::move(cfg)),
        transport_(std::move(transport)),
        sleep_(std::move(sleep)),
        clock_(std::move(clock)),
        store_(cfg_.paths.telemetry),
        board_(cfg_.labeling.board, cfg_.paths.state_dir) {
    std::filesystem::create_directories(cfg_.paths.reports_dir);
    std::filesystem::create_directories(cfg_.paths.inbox_dir);
    if (std::filesystem::exists(cfg_.paths.model))
      model_ = std::make_shared<const ClusterModel>(load_model(cfg_.paths.model));
    std::ifstream events(cfg_.paths.reports_dir / "events.jsonl");
    for (std::string line; std::getline(events, line);) {
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_object() && j.value("event", "") == "month_analyzed")
        analyzed_.insert(MonthKey::parse(j.at("month").get<std::string>()));
    }
    routes();
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the API and starts the worker (unless `worker` is false; tests
  /// then drive tick() themselves). Returns the bound port.
  int start(bool worker = true) {
    const int port = cfg_.service.port == 0 ? server_.bind_to_any_port(cfg_.service.bind)
                                            : (server_.bind_to_port(cfg_.service.bind, cfg_.service.port)
                                                   ? cfg_.service.port
                                                   : -1);
    if (port < 0)
      throw Error(Errc::ConfigError,
                  "cannot bind " + cfg_.service.bind + ":" + std::to_string(cfg_.service.port));
    port_ = port;
    running_ = true;
    http_ = std::thread([this] { server_.listen_after_bind(); });
    if (worker) worker_ = std::thread([this] { work_loop(); });
    server_.wait_until_ready();
    return port;
  }

  void stop() {
    if (!running_.exchange(false)) return;
    {
      std::lock_guard lock(wake_mutex_);
      wake_.notify_all();
    }
    server_.stop();
    if (http_.joinable()) http_.join();
    if (worker_.joinable()) worker_.join();
  }

  int port() const { return port_; }

  /// One worker iteration; the worker thread calls this every poll_ms.
  void tick() {
    poll_inbox();
    board_.sweep(clock_());
    analyze_completed_months();
  }

  /// Ingests every inbox file (name order) and renames it to *.done.
  std::size_t poll_inbox() {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(cfg_.paths.inbox_dir))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::size_t accepted = 0;
    for (const auto& f : files) {
      accepted += ingest_file(f);
      std::filesystem::rename(f, f.string() + ".done");
    }
    return accepted;
  }

  std::shared_ptr<const ClusterModel> model() const {
    std::lock_guard lock(model_mutex_);
    return model_;
  }

  void swap_model(std::shared_ptr<const ClusterModel> m) {
    std::lock_guard lock(model_mutex_);
    model_ = std::move(m);
  }

  const PointStore& store() const { return store_; }
  LabelBoard& board() { return board_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  std::size_t ingest_file(const std::filesystem::path& f) {
    std::ifstream in(f);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);

    std::vector<std::string> fresh_ids;
    for (const auto& line : lines) {
      try {
        const auto j = nlohmann::json::parse(detail::neutralize_nonfinite_tokens(line));
        if (j.is_object() && j.contains("point_id") && j["point_id"].is_string()) {
          auto id = j["point_id"].get<std::string>();
          if (!store_.find(id)) fresh_ids.push_back(std::move(id));
        }
      } catch (const nlohmann::json::exception&) {
      }
    }
    std::istringstream stream([&] {
      std::string all;
      for (const auto& l : lines) all += l + '\n';
      return all;
    }());
    const auto result = store_.ingest(stream);
    for (const auto& r : result.rejected)
      append_event(cfg_.paths.reports_dir, {{"event", "ingest_rejected"},
                                            {"file", f.filename().string()},
                                            {"line", r.line},
                                            {"point_id", r.point_id},
                                            {"reason", r.reason}});
    std::set<std::string> done;
    for (const auto& id : fresh_ids) {
      if (!done.insert(id).second) continue;
      if (auto p = store_.find(id)) process_point(*p);
    }
    return result.accepted;
  }

  void process_point(const TelemetryPoint& point) {
    const auto current = model();
    if (!current) return;
    if (!sampler_ || sampler_->model() != current) {
      if (!sampler_)
        sampler_ = std::make_unique<StreamSampler>(
            current, SamplerOptions{cfg_.clusters.budget_per_cluster, cfg_.clusters.window_months, cfg_.seeds.sampler});
      else
        sampler_->swap_model(current);
      MonthKey m = point.month();
      for (int i = 0; i < cfg_.clusters.window_months; ++i) {
        m = m.prev();
        auto counts = cluster_counts(store_, *current, m);
        if (std::any_of(counts.begin(), counts.end(), [](double c) { return c > 0; })) sampler_->prime(m, counts);
      }
    }
    const auto decision = sampler_->offer(point);
    detail::append_line(cfg_.paths.reports_dir / ("sampling-" + decision.month.to_string() + ".jsonl"),
                        to_json_value(decision));
    if (!decision.accepted) return;

    auto card = card_for(store_, point, decision, cfg_, clock_());
    if (!board_.add_card(card)) return;
    if (!cfg_.labeling.webhook_url) return;
    const auto receipt = post_card(card, *cfg_.labeling.webhook_url, transport_, cfg_.labeling.retry, sleep_);
    board_.set_delivery(card.point_id, to_json_value(receipt));
    if (!receipt.delivered)
      append_event(cfg_.paths.reports_dir, {{"event", "delivery_failed"},
                                            {"point_id", card.point_id},
                                            {"receipt", to_json_value(receipt)}});
  }

  /// Every month older than the newest stored month is complete.
  void analyze_completed_months() {
    const auto months = store_.months();
    if (months.size() < 2) return;
    for (std::size_t i = 0; i + 1 < months.size(); ++i) {
      const MonthKey m = months[i];
      if (analyzed_.count(m)) continue;
      analyze_month(m);
      analyzed_.insert(m);
      append_event(cfg_.paths.reports_dir, {{"event", "month_analyzed"}, {"month", m.to_string()}});
    }
  }

  void analyze_month(MonthKey m) {
    const auto& dir = cfg_.paths.reports_dir;
    bool retrain = false;
    std::string why;
    auto skipped = [&](const char* what, const Error& e) {
      append_event(dir, {{"event", "analytics_skipped"}, {"month", m.to_string()}, {"analysis", what},
                         {"error", e.what()}});
    };
    try {
      const auto r = drift_for_month(store_, DriftKind::Workload, m, nullptr, cfg_.seeds.drift, cfg_.drift);
      write_json_file(drift_report_path(dir, DriftKind::Workload, m), to_json_value(r));
      if (r.action == DriftAction::RecomputeClusters) {
        retrain = true;
        why = "workload_drift";
      }
    } catch (const Error& e) {
      skipped("workload_drift", e);
    }
    const auto current = model();
    if (current) {
      try {
        const auto r = drift_for_month(store_, DriftKind::SysPerf, m, current.get(), cfg_.seeds.drift, cfg_.drift);
        write_json_file(drift_report_path(dir, DriftKind::SysPerf, m), to_json_value(r));
      } catch (const Error& e) {
        skipped("sysperf_drift", e);
      }
      try {
        const auto e = entropy_for_month(store_, board_, *current, m, clock_(), cfg_.entropy);
        write_json_file(dir / ("entropy-" + m.to_string() + ".json"), to_json_value(e));
        if (e.retrain_triggered) {
          retrain = true;
          why = why.empty() ? "entropy_drop" : why + "+entropy_drop";
        }
      } catch (const Error& e) {
        skipped("entropy", e);
      }
    } else {
      retrain = true;
      why = "no_model";
    }
    if (retrain) retrain_model(m, why);
  }

  void retrain_model(MonthKey last, const std::string& why) {
    MonthKey first = last;
    for (int i = 1; i < cfg_.clusters.training_months; ++i) first = first.prev();
    try {
      auto m = std::make_shared<const ClusterModel>(
          train_model(store_, first, last, cfg_.clusters.k, cfg_.seeds.clusters, clock_()));
      save_model(cfg_.paths.model, *m);
      swap_model(m);
      append_event(cfg_.paths.reports_dir, {{"event", "model_swapped"},
                                            {"reason", why},
                                            {"window_start", first.to_string()},
                                            {"window_end", last.to_string()},
                                            {"populations", m->populations}});
    } catch (const Error& e) {
      append_event(cfg_.paths.reports_dir,
                   {{"event", "retrain_failed"}, {"reason", why}, {"month", last.to_string()}, {"error", e.what()}});
    }
  }

  void work_loop() {
    while (running_) {
      try {
        tick();
      } catch (const std::exception& e) {
        try {
          append_event(cfg_.paths.reports_dir, {{"event", "worker_error"}, {"error", e.what()}});
        } catch (...) {
        }
      }
      std::unique_lock lock(wake_mutex_);
      wake_.wait_for(lock, std::chrono::milliseconds(cfg_.service.poll_ms), [this] { return !running_; });
    }
  }

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static int status_for(Errc code) {
    switch (code) {
      case Errc::UnknownCandidate: return 404;
      case Errc::ParseError:
      case Errc::PreconditionViolation:
      case Errc::InvalidDimension: return 400;
      default: return 500;
    }
  }

  template <class F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        reply(res, status_for(e.code()), {{"error", e.what()}});
      } catch (const nlohmann::json::exception& e) {
        reply(res, 400, {{"error", std::string("ParseError: ") + e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
      }
    };
  }

  void routes() {
    server_.Post("/reactions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto j = nlohmann::json::parse(req.body);
      if (!j.is_object()) throw Error(Errc::ParseError, "reaction must be a JSON object");
      const auto point_id = j.at("point_id").get<std::string>();
      const auto annotator = j.at("annotator_id").get<std::string>();
      if (annotator.empty()) throw Error(Errc::ParseError, "annotator_id must not be empty");
      const auto reaction = parse_reaction(j.at("reaction").get<std::string>());
      const std::int64_t ts = j.contains("timestamp") ? j["timestamp"].get<std::int64_t>() : clock_();
      const auto r = board_.ingest_reaction(point_id, annotator, reaction, ts);
      reply(res, 200, {{"applied", r.applied},
                       {"note", r.note},
                       {"label", to_json_value(r.label)},
                       {"card", card_view(board_, *board_.card(point_id), true)}});
    }));

    server_.Get("/candidates", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<CardStatus> status;
      if (req.has_param("status")) status = parse_card_status(req.get_param_value("status"));
      auto out = nlohmann::json::array();
      for (const auto& c : board_.cards(status)) out.push_back(card_view(board_, c, false));
      reply(res, 200, out);
    }));

    server_.Get(R"(/candidates/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto c = board_.card(id);
      if (!c) throw Error(Errc::UnknownCandidate, "no candidate " + id);
      reply(res, 200, card_view(board_, *c, true));
    }));

    server_.Get("/labels", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<MonthKey> month;
      if (req.has_param("month")) month = MonthKey::parse(req.get_param_value("month"));
      auto out = nlohmann::json::array();
      for (const auto& l : board_.labels(month)) out.push_back(to_json_value(l));
      reply(res, 200, out);
    }));

    server_.Get("/annotators/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
      const auto records = board_.records();
      auto out = nlohmann::json::array();
      for (const auto& s : annotator_stats(records, cfg_.annotators)) out.push_back(to_json_value(s));
      reply(res, 200, out);
    }));

    server_.Get("/reports/drift", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("kind")) throw Error(Errc::ParseError, "kind=workload|sysperf is required");
      const auto kind = parse_drift_kind(req.get_param_value("kind"));
      auto out = nlohmann::json::array();
      for (const auto& r : load_drift_reports(cfg_.paths.reports_dir, kind)) out.push_back(to_json_value(r));
      reply(res, 200, out);
    }));

    server_.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) reply(res, res.status, {{"error", "HTTP " + std::to_string(res.status)}});
    });
  }

  PipelineConfig cfg_;
  Transport transport_;
  Sleeper sleep_;
  Clock clock_;
  PointStore store_;
  LabelBoard board_;

  mutable std::mutex model_mutex_;
  std::shared_ptr<const ClusterModel> model_;
  std::unique_ptr<StreamSampler> sampler_;  // worker thread only
  std::set<MonthKey> analyzed_;              // worker thread only

  httplib::Server server_;
  std::thread http_, worker_;
  std::atomic<bool> running_{false};
  std::mutex wake_mutex_;
  std::condition_variable wake_;
  int port_ = 0;
};

}  // namespace driftwatch
