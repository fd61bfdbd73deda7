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

// Pipeline configuration (JSON). Every key is optional and has the default
// shown in default_config_json(); unknown keys anywhere are a ConfigError.
// Relative paths resolve against the directory of the config file.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/drift.hpp"
#include "driftwatch/error.hpp"
#include "driftwatch/eval.hpp"
#include "driftwatch/labelflow.hpp"
#include "driftwatch/sampling.hpp"
#include "driftwatch/webhook.hpp"

namespace driftwatch {

struct PipelineConfig {
  struct Paths {
    std::filesystem::path telemetry = "telemetry.jsonl";
    std::filesystem::path state_dir = "state";  // cards, labels, reactions
    std::filesystem::path model = "model.json";
    std::filesystem::path reports_dir = "reports";
    std::filesystem::path inbox_dir = "inbox";  // serve: telemetry JSONL files to consume
  } paths;

  struct Clusters {
    std::size_t k = 4;
    double budget_per_cluster = 50.0;
    int window_months = 1;
    int training_months = 12;  // trailing window used by serve-time retraining
  } clusters;

  struct Seeds {
    std::uint64_t clusters = 0;
    std::uint64_t sampler = 0;
    std::uint64_t drift = 0;
    std::uint64_t bootstrap = 0;
  } seeds;

  EntropyOptions entropy;
  DriftOptions drift;

  struct Labeling {
    std::optional<std::string> webhook_url;
    BoardOptions board;
    std::vector<LinkTemplate> link_templates;
    CardOptions card;
    RetryPolicy retry;
  } labeling;

  AnnotatorStatsOptions annotators;

  struct Eval {
    std::size_t resamples = 1000;
    std::size_t bins = 50;
  } eval;

  struct Service {
    std::string bind = "127.0.0.1";
    int port = 8080;
    int poll_ms = 1000;  // ingestion/sampling loop period
  } service;

  /// Overrides every seed (the CLI's --seed).
  void set_all_seeds(std::uint64_t s) { seeds = {s, s, s, s}; }
};

inline nlohmann::json default_config_json() {
  return nlohmann::json::parse(R"({
  "paths": {"telemetry": "telemetry.jsonl", "state_dir": "state", "model": "model.json", "reports_dir": "reports",
            "inbox_dir": "inbox"},
  "clusters": {"k": 4, "budget_per_cluster": 50, "window_months": 1, "training_months": 12},
  "seeds": {"clusters": 0, "sampler": 0, "drift": 0, "bootstrap": 0},
  "entropy": {"base": 2, "trigger_delta": 0.25},
  "drift": {"method": "gaussian", "direction": "previous_to_current", "histogram_bins": 10,
            "threshold_mode": "mean_plus_sigma", "fixed_threshold": 0.5, "min_history": 3, "sigmas": 2},
  "labeling": {"webhook_url": null, "quorum": 2, "window_hours": 72, "enrolled": [], "link_templates": [],
               "context_seconds": 3600, "retry_delays_ms": [1000, 4000, 16000]},
  "annotators": {"min_reactions": 10, "z_limit": 2},
  "eval": {"resamples": 1000, "bins": 50},
  "service": {"bind": "127.0.0.1", "port": 8080, "poll_ms": 1000}
})");
}

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(const nlohmann::json& root) : root_(root) {
    if (!root_.is_object()) throw Error(Errc::ConfigError, "config must be a JSON object");
    check_keys(root_, default_config_json(), "");
  }

  /// j[section][key] when present, else nullptr.
  const nlohmann::json* find(const char* section, const char* key) const {
    auto s = root_.find(section);
    if (s == root_.end()) return nullptr;
    auto k = s->find(key);
    return k == s->end() ? nullptr : &*k;
  }

  template <class T>
  void read(const char* section, const char* key, T& out) const {
    const auto* v = find(section, key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::ConfigError, std::string(section) + "." + key + " has the wrong type");
    }
  }

  std::string read_string(const char* section, const char* key, std::string fallback) const {
    read(section, key, fallback);
    return fallback;
  }

 private:
  static void check_keys(const nlohmann::json& j, const nlohmann::json& schema, const std::string& prefix) {
    for (const auto& [key, value] : j.items()) {
      auto it = schema.find(key);
      if (it == schema.end()) throw Error(Errc::ConfigError, "unknown config key " + prefix + key);
      if (it->is_object()) {
        if (!value.is_object()) throw Error(Errc::ConfigError, prefix + key + " must be an object");
        check_keys(value, *it, prefix + key + ".");
      }
    }
  }

  const nlohmann::json& root_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ConfigError, what);
}

}  // namespace detail

/// `base_dir` anchors relative paths.
inline PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  const detail::ConfigReader r(j);
  PipelineConfig c;

  auto path_of = [&](const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    r.read("paths", key, s);
    detail::require(!s.empty(), std::string("paths.") + key + " must not be empty");
    out = std::filesystem::path(s).is_absolute() ? std::filesystem::path(s) : base_dir / s;
  };
  path_of("telemetry", c.paths.telemetry);
  path_of("state_dir", c.paths.state_dir);
  path_of("model", c.paths.model);
  path_of("reports_dir", c.paths.reports_dir);
  path_of("inbox_dir", c.paths.inbox_dir);

  r.read("clusters", "k", c.clusters.k);
  r.read("clusters", "budget_per_cluster", c.clusters.budget_per_cluster);
  r.read("clusters", "window_months", c.clusters.window_months);
  r.read("clusters", "training_months", c.clusters.training_months);
  detail::require(c.clusters.k >= 1, "clusters.k must be at least 1");
  detail::require(c.clusters.budget_per_cluster > 0, "clusters.budget_per_cluster must be positive");
  detail::require(c.clusters.window_months >= 1, "clusters.window_months must be at least 1");
  detail::require(c.clusters.training_months >= 1, "clusters.training_months must be at least 1");

  r.read("seeds", "clusters", c.seeds.clusters);
  r.read("seeds", "sampler", c.seeds.sampler);
  r.read("seeds", "drift", c.seeds.drift);
  r.read("seeds", "bootstrap", c.seeds.bootstrap);

  r.read("entropy", "base", c.entropy.base);
  r.read("entropy", "trigger_delta", c.entropy.trigger_delta);
  detail::require(c.entropy.base > 1.0, "entropy.base must exceed 1");
  detail::require(c.entropy.trigger_delta > 0.0, "entropy.trigger_delta must be positive");

  try {
    c.drift.method = parse_kl_method(r.read_string("drift", "method", "gaussian"));
    c.drift.direction = parse_kl_direction(r.read_string("drift", "direction", "previous_to_current"));
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, "drift: " + e.detail());
  }
  r.read("drift", "histogram_bins", c.drift.histogram_bins);
  r.read("drift", "min_history", c.drift.min_history);
  r.read("drift", "sigmas", c.drift.sigmas);
  detail::require(c.drift.histogram_bins >= 1, "drift.histogram_bins must be at least 1");
  detail::require(c.drift.sigmas >= 0, "drift.sigmas must be non-negative");
  const std::string mode = r.read_string("drift", "threshold_mode", "mean_plus_sigma");
  if (mode == "fixed") {
    double fixed = 0.5;
    r.read("drift", "fixed_threshold", fixed);
    detail::require(fixed >= 0, "drift.fixed_threshold must be non-negative");
    c.drift.fixed_threshold = fixed;
  } else {
    detail::require(mode == "mean_plus_sigma", "drift.threshold_mode must be mean_plus_sigma|fixed");
  }

  if (const auto* url = r.find("labeling", "webhook_url"); url && !url->is_null()) {
    detail::require(url->is_string(), "labeling.webhook_url must be a string or null");
    c.labeling.webhook_url = url->get<std::string>();
    split_url(*c.labeling.webhook_url);  // ConfigError without a scheme
  }
  r.read("labeling", "quorum", c.labeling.board.quorum);
  detail::require(c.labeling.board.quorum >= 1, "labeling.quorum must be at least 1");
  double window_hours = 72;
  r.read("labeling", "window_hours", window_hours);
  detail::require(window_hours > 0, "labeling.window_hours must be positive");
  c.labeling.board.window_seconds = static_cast<std::int64_t>(window_hours * 3600.0);
  r.read("labeling", "enrolled", c.labeling.board.enrolled);
  if (const auto* t = r.find("labeling", "link_templates")) c.labeling.link_templates = parse_link_templates(*t);
  r.read("labeling", "context_seconds", c.labeling.card.context_seconds);
  detail::require(c.labeling.card.context_seconds >= 0, "labeling.context_seconds must be non-negative");
  if (r.find("labeling", "retry_delays_ms")) {
    std::vector<std::int64_t> ms;
    r.read("labeling", "retry_delays_ms", ms);
    c.labeling.retry.delays.clear();
    for (auto v : ms) {
      detail::require(v >= 0, "labeling.retry_delays_ms must be non-negative");
      c.labeling.retry.delays.emplace_back(v);
    }
  }

  r.read("annotators", "min_reactions", c.annotators.min_reactions);
  r.read("annotators", "z_limit", c.annotators.z_limit);
  detail::require(c.annotators.z_limit > 0, "annotators.z_limit must be positive");

  r.read("eval", "resamples", c.eval.resamples);
  r.read("eval", "bins", c.eval.bins);
  detail::require(c.eval.resamples >= 100, "eval.resamples must be at least 100");
  detail::require(c.eval.bins >= 1, "eval.bins must be at least 1");

  r.read("service", "bind", c.service.bind);
  r.read("service", "port", c.service.port);
  r.read("service", "poll_ms", c.service.poll_ms);
  detail::require(c.service.port >= 0 && c.service.port <= 65535, "service.port out of range");
  detail::require(c.service.poll_ms >= 1, "service.poll_ms must be positive");
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::ConfigError, "cannot read config " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigError, file.string() + ": " + e.what());
  }
  return parse_config(j, file.parent_path());
}

}  // namespace driftwatch
