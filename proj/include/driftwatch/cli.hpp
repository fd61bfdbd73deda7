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

// `driftwatch ingest|train-clusters|sample|entropy|drift|eval|serve`.
//
// Exit codes: 0 success (a detected drift or retrain recommendation is a
// success), 1 internal error (I/O failure, bug), 2 invalid input or config.
// With --now every command is a function of config, stores and seeds.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftwatch/config.hpp"
#include "driftwatch/eval.hpp"
#include "driftwatch/pipeline.hpp"
#include "driftwatch/render.hpp"
#include "driftwatch/service.hpp"

namespace driftwatch {

namespace cli {

inline std::atomic<bool> g_stop{false};

struct Globals {
  std::string config;
  bool json = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> now;
};

struct Context {
  PipelineConfig cfg;
  std::int64_t now = 0;
  bool json = false;
  std::ostream& out;
};

inline Context make_context(const Globals& g, std::ostream& out) {
  PipelineConfig cfg;
  if (!g.config.empty())
    cfg = load_config(g.config);
  else
    cfg = parse_config(nlohmann::json::object(), std::filesystem::current_path());
  if (g.seed) cfg.set_all_seeds(*g.seed);
  return Context{std::move(cfg), g.now ? *g.now : wall_clock_seconds(), g.json, out};
}

inline void emit(Context& ctx, const nlohmann::json& j, const std::string& text) {
  if (ctx.json)
    ctx.out << j.dump(2) << '\n';
  else
    ctx.out << text;
}

inline std::string month_range_text(MonthKey a, MonthKey b) { return a.to_string() + ".." + b.to_string(); }

// ---------------------------------------------------------------------------

inline int cmd_ingest(Context& ctx, const std::vector<std::string>& files) {
  PointStore store(ctx.cfg.paths.telemetry);
  std::size_t accepted = 0;
  auto rejected = nlohmann::json::array();
  std::ostringstream text;
  for (const auto& f : files) {
    IngestResult r;
    if (f == "-") {
      r = store.ingest(std::cin);
    } else {
      std::ifstream in(f);
      if (!in) throw Error(Errc::ParseError, "cannot read input " + f);
      r = store.ingest(in);
    }
    accepted += r.accepted;
    for (const auto& x : r.rejected) {
      rejected.push_back({{"file", f}, {"line", x.line}, {"point_id", x.point_id}, {"reason", x.reason}});
      text << "rejected " << f << ":" << x.line << " " << x.point_id << " (" << x.reason << ")\n";
    }
  }
  text << "accepted " << accepted << ", rejected " << rejected.size() << ", store holds " << store.size()
       << " points\n";
  emit(ctx, {{"accepted", accepted}, {"rejected", rejected}, {"store_size", store.size()}}, text.str());
  return 0;
}

inline int cmd_train(Context& ctx, const std::optional<std::string>& from, const std::optional<std::string>& to) {
  const PointStore store(ctx.cfg.paths.telemetry);
  const auto months = store.months();
  if (months.empty() && (!from || !to)) throw Error(Errc::EmptyPeriod, "telemetry store is empty");
  const MonthKey first = from ? MonthKey::parse(*from) : months.front();
  const MonthKey last = to ? MonthKey::parse(*to) : months.back();
  const auto model = train_model(store, first, last, ctx.cfg.clusters.k, ctx.cfg.seeds.clusters, ctx.now);
  save_model(ctx.cfg.paths.model, model);
  std::ostringstream text;
  text << "trained " << model.k() << " clusters on " << month_range_text(first, last)
       << (model.k_reduced ? " (k reduced: too few distinct points)" : "") << "\n";
  for (std::size_t c = 0; c < model.k(); ++c) text << "  cluster " << c << ": " << model.populations[c] << " points\n";
  text << "model written to " << ctx.cfg.paths.model.string() << "\n";
  emit(ctx, {{"model", ctx.cfg.paths.model.string()}, {"k", model.k()}, {"k_reduced", model.k_reduced},
             {"populations", model.populations}, {"window", {first.to_string(), last.to_string()}}},
       text.str());
  return 0;
}

inline int cmd_sample(Context& ctx, const std::string& month_s, bool post) {
  const MonthKey month = MonthKey::parse(month_s);
  const PointStore store(ctx.cfg.paths.telemetry);
  const auto model = load_model(ctx.cfg.paths.model);
  const auto decisions = sample_month(store, model, month, ctx.cfg.clusters.budget_per_cluster,
                                      ctx.cfg.clusters.window_months, ctx.cfg.seeds.sampler);

  auto lines = nlohmann::json::array();
  for (const auto& d : decisions) lines.push_back(to_json_value(d));
  const auto audit = ctx.cfg.paths.reports_dir / ("sampling-" + month.to_string() + ".jsonl");
  std::filesystem::create_directories(audit.parent_path());
  {
    std::ofstream out(audit, std::ios::trunc);
    for (const auto& l : lines) out << l.dump() << '\n';
    if (!out) throw Error(Errc::IoError, "cannot write " + audit.string());
  }

  LabelBoard board(ctx.cfg.labeling.board, ctx.cfg.paths.state_dir);
  std::vector<double> per_cluster(model.k(), 0.0);
  std::size_t accepted = 0, created = 0;
  for (const auto& d : decisions) {
    if (!d.accepted) continue;
    ++accepted;
    per_cluster[d.cluster_index] += 1.0;
    if (board.add_card(card_for(store, *store.find(d.point_id), d, ctx.cfg, ctx.now))) ++created;
  }

  auto deliveries = nlohmann::json::array();
  if (post) {
    if (!ctx.cfg.labeling.webhook_url) throw Error(Errc::ConfigError, "--post needs labeling.webhook_url");
    const auto transport = http_transport();
    for (const auto& card : board.cards(CardStatus::Pending)) {
      if (card.month() != month || (card.delivery && card.delivery->value("delivered", false))) continue;
      const auto receipt = post_card(card, *ctx.cfg.labeling.webhook_url, transport, ctx.cfg.labeling.retry);
      board.set_delivery(card.point_id, to_json_value(receipt));
      deliveries.push_back({{"point_id", card.point_id}, {"receipt", to_json_value(receipt)}});
      if (!receipt.delivered)
        append_event(ctx.cfg.paths.reports_dir, {{"event", "delivery_failed"},
                                                 {"point_id", card.point_id},
                                                 {"receipt", to_json_value(receipt)}});
    }
  }

  std::ostringstream text;
  text << month.to_string() << ": " << decisions.size() << " points, " << accepted << " accepted, " << created
       << " new cards\n";
  for (std::size_t c = 0; c < per_cluster.size(); ++c)
    text << "  cluster " << c << ": " << per_cluster[c] << " accepted\n";
  if (post) text << deliveries.size() << " cards posted\n";
  emit(ctx, {{"month", month.to_string()}, {"points", decisions.size()}, {"accepted", accepted},
             {"per_cluster_accepted", per_cluster}, {"cards_created", created}, {"deliveries", deliveries},
             {"audit", audit.string()}},
       text.str());
  return 0;
}

inline int cmd_entropy(Context& ctx, const std::string& month_s) {
  const MonthKey month = MonthKey::parse(month_s);
  const PointStore store(ctx.cfg.paths.telemetry);
  const auto model = load_model(ctx.cfg.paths.model);
  const LabelBoard board(ctx.cfg.labeling.board, ctx.cfg.paths.state_dir);
  const auto r = entropy_for_month(store, board, model, month, ctx.now, ctx.cfg.entropy);
  auto j = to_json_value(r);
  write_json_file(ctx.cfg.paths.reports_dir / ("entropy-" + month.to_string() + ".json"), j);

  std::ostringstream text;
  if (r.no_labels)
    text << month.to_string() << ": no resolved labels\n";
  else
    text << month.to_string() << ": entropy " << detail::fixed(r.entropy) << " (base " << r.base << ")"
         << (r.previous_entropy ? ", previous " + detail::fixed(*r.previous_entropy) : std::string()) << "\n";
  if (r.retrain_triggered) {
    append_event(ctx.cfg.paths.reports_dir, {{"event", "retrain_recommended"},
                                             {"reason", "entropy_drop"},
                                             {"month", month.to_string()},
                                             {"entropy", r.entropy},
                                             {"previous_entropy", *r.previous_entropy}});
    text << "retrain recommended: label entropy fell by " << detail::fixed(*r.previous_entropy - r.entropy)
         << "; run train-clusters\n";
  }
  emit(ctx, j, text.str());
  return 0;
}

inline int cmd_drift(Context& ctx, const std::string& kind_s, const std::optional<std::string>& month_s) {
  const DriftKind kind = parse_drift_kind(kind_s);
  const PointStore store(ctx.cfg.paths.telemetry);
  std::optional<ClusterModel> model;
  if (kind == DriftKind::SysPerf) model = load_model(ctx.cfg.paths.model);
  const ClusterModel* mp = model ? &*model : nullptr;
  const auto& dir = ctx.cfg.paths.reports_dir;

  if (month_s) {
    const MonthKey month = MonthKey::parse(*month_s);
    const auto r = drift_for_month(store, kind, month, mp, ctx.cfg.seeds.drift, ctx.cfg.drift);
    const auto j = to_json_value(r);
    write_json_file(drift_report_path(dir, kind, month), j);
    std::ostringstream text;
    const std::vector<DriftReport> one{r};
    text << drift_table(one);
    if (r.exceeded) text << "drift detected: action " << to_string(r.action) << "\n";
    if (r.exceeded && kind == DriftKind::Workload)
      append_event(dir, {{"event", "retrain_recommended"}, {"reason", "workload_drift"}, {"month", month.to_string()}});
    emit(ctx, j, text.str());
    return 0;
  }

  const auto months = store.months();
  if (months.empty()) throw Error(Errc::EmptyPeriod, "telemetry store is empty");
  const auto reports = drift_series(store, kind, months.front(), months.back(), mp, ctx.cfg.seeds.drift, ctx.cfg.drift);
  auto arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back(to_json_value(r));
    write_json_file(drift_report_path(dir, kind, r.month), arr.back());
  }
  const std::string base = "drift-" + std::string(to_string(kind));
  std::ofstream(dir / (base + ".csv")) << drift_csv(reports);
  std::ofstream(dir / (base + ".svg")) << drift_svg(reports, std::string(to_string(kind)) + " drift (KL by month)");
  std::string text = drift_table(reports);
  text += "series written to " + (dir / (base + ".csv")).string() + " and .svg\n";
  emit(ctx, arr, text);
  return 0;
}

inline int cmd_eval(Context& ctx, const std::string& predictions) {
  std::ifstream in(predictions);
  if (!in) throw Error(Errc::ParseError, "cannot read predictions " + predictions);
  const auto preds = read_predictions(in);
  const LabelBoard board(ctx.cfg.labeling.board, ctx.cfg.paths.state_dir);
  const auto labels = labels_as_of(board, std::nullopt, ctx.now);
  const auto joined = join_predictions(preds, labels);
  const auto s = bootstrap_f1(joined.pairs, ctx.cfg.eval.resamples, ctx.cfg.seeds.bootstrap, ctx.cfg.eval.bins);
  auto j = to_json_value(s);
  j["confusion"] = to_json_value(confusion(joined.pairs));
  j["unlabeled"] = joined.unlabeled.size();
  write_json_file(ctx.cfg.paths.reports_dir / "eval-summary.json", j);
  std::ofstream(ctx.cfg.paths.reports_dir / "eval-histogram.csv") << bootstrap_histogram_csv(s);

  std::ostringstream text;
  text << "pairs " << s.pairs << " (unlabeled " << joined.unlabeled.size() << ")\n"
       << "F1 " << detail::fixed(s.full_f1) << "; bootstrap mean " << detail::fixed(s.mean_f1) << " sd "
       << detail::fixed(s.std_f1) << " over " << s.resamples << " resamples\n";
  emit(ctx, j, text.str());
  return 0;
}

inline int cmd_serve(Context& ctx, double for_seconds) {
  Service svc(ctx.cfg, http_transport());
  const int port = svc.start(true);
  ctx.out << "listening on " << ctx.cfg.service.bind << ":" << port << std::endl;
  g_stop = false;
  auto previous_int = std::signal(SIGINT, [](int) { g_stop = true; });
  auto previous_term = std::signal(SIGTERM, [](int) { g_stop = true; });
  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (for_seconds > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= for_seconds)
      break;
  }
  svc.stop();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  return 0;
}

}  // namespace cli

/// Runs one CLI invocation; args exclude the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"driftwatch: workload clustering, label sampling and drift monitoring", "driftwatch"};
  app.require_subcommand(1);
  cli::Globals g;
  app.add_option("--config", g.config, "pipeline config (JSON)");
  app.add_flag("--json", g.json, "machine-readable output");
  app.add_option("--seed", g.seed, "override every seed");
  app.add_option("--now", g.now, "reference time (epoch seconds) for labels and timestamps; default: wall clock");

  std::vector<std::string> files;
  auto* ingest = app.add_subcommand("ingest", "append telemetry JSONL to the store");
  ingest->add_option("files", files, "JSONL files ('-' for stdin)")->required();

  std::optional<std::string> from, to;
  auto* train = app.add_subcommand("train-clusters", "fit the workload cluster model");
  train->add_option("--from", from, "first month (YYYY-MM); default: first stored month");
  train->add_option("--to", to, "last month (YYYY-MM); default: last stored month");

  std::string month;
  bool post = false;
  auto* sample = app.add_subcommand("sample", "sample a month's points for labeling");
  sample->add_option("--month", month, "YYYY-MM")->required();
  sample->add_flag("--post", post, "post new cards to the webhook");

  std::string entropy_month;
  auto* entropy = app.add_subcommand("entropy", "label-diversity entropy and retrain trigger");
  entropy->add_option("--month", entropy_month, "YYYY-MM")->required();

  std::string kind;
  std::optional<std::string> drift_month;
  auto* drift = app.add_subcommand("drift", "monthly KL drift report");
  drift->add_option("--kind", kind, "workload|sysperf")->required();
  drift->add_option("--month", drift_month, "YYYY-MM; omit for the whole series");

  std::string predictions;
  auto* eval = app.add_subcommand("eval", "bootstrapped F1 of predictions against labels");
  eval->add_option("--predictions", predictions, "predictions JSONL")->required();

  double for_seconds = 0;
  auto* serve = app.add_subcommand("serve", "run the labeling service");
  serve->add_option("--for-seconds", for_seconds, "stop after this long (0: until SIGINT/SIGTERM)");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    auto ctx = cli::make_context(g, out);
    if (*ingest) return cli::cmd_ingest(ctx, files);
    if (*train) return cli::cmd_train(ctx, from, to);
    if (*sample) return cli::cmd_sample(ctx, month, post);
    if (*entropy) return cli::cmd_entropy(ctx, entropy_month);
    if (*drift) return cli::cmd_drift(ctx, kind, drift_month);
    if (*eval) return cli::cmd_eval(ctx, predictions);
    if (*serve) return cli::cmd_serve(ctx, for_seconds);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == Errc::IoError ? 1 : 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace driftwatch
