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

/**
 * Human labeling back end.
 *
 * An accepted sampling decision becomes a candidate card: a digest of the
 * point plus links into dashboards. Annotators react with thumb-up (normal)
 * or thumb-down (abnormal); each (point, annotator) pair holds at most one
 * label, latest reaction wins. A card resolves by strict majority once the
 * voting window has elapsed or every enrolled annotator has reacted; a tie
 * drops the label for good and a card short of quorum expires.
 *
 * Every reaction and sweep is logged, and card statuses are a pure function
 * of that log, so replaying it rebuilds the same board.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftwatch/datamodel.hpp"
#include "driftwatch/error.hpp"
#include "driftwatch/month.hpp"
#include "driftwatch/sampling.hpp"

namespace driftwatch {

// ---------------------------------------------------------------------------
// Link templates

struct Link {
  std::string title;
  std::string url;

  friend bool operator==(const Link&, const Link&) = default;
};

/// `{field}` placeholders over point_id, entity_id, timestamp, month,
/// cluster, window_start, window_end. Values are percent-encoded in URLs.
class LinkTemplate {
 public:
  static constexpr std::string_view kFields[] = {"point_id", "entity_id",    "timestamp", "month",
                                                 "cluster",  "window_start", "window_end"};

  LinkTemplate(std::string title, std::string url) : title_(std::move(title)), url_(std::move(url)) {
    validate(title_);
    validate(url_);
  }

  const std::string& title() const { return title_; }
  const std::string& url() const { return url_; }

  struct Context {
    const TelemetryPoint* point;
    std::size_t cluster;
    std::int64_t window_start;
    std::int64_t window_end;
  };

  Link expand(const Context& ctx) const { return {substitute(title_, ctx, false), substitute(url_, ctx, true)}; }

 private:
  static bool known(std::string_view f) {
    return std::find(std::begin(kFields), std::end(kFields), f) != std::end(kFields);
  }

  static void validate(const std::string& text) {
    std::size_t pos = 0;
    while ((pos = text.find_first_of("{}", pos)) != std::string::npos) {
      if (text[pos] == '}') throw Error(Errc::ConfigError, "unbalanced '}' in link template: " + text);
      const auto close = text.find('}', pos);
      if (close == std::string::npos) throw Error(Errc::ConfigError, "unbalanced '{' in link template: " + text);
      const auto field = text.substr(pos + 1, close - pos - 1);
      if (!known(field)) throw Error(Errc::ConfigError, "link template references unknown field '" + field + "'");
      pos = close + 1;
    }
  }

  static std::string percent_encode(const std::string& s) {
    std::ostringstream out;
    for (unsigned char c : s) {
      if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
        out << c;
      } else {
        out << '%' << std::uppercase << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c)
            << std::nouppercase << std::dec;
      }
    }
    return out.str();
  }

  static std::string value_of(std::string_view field, const Context& ctx) {
    const TelemetryPoint& p = *ctx.point;
    if (field == "point_id") return p.point_id;
    if (field == "entity_id") return p.entity_id;
    if (field == "timestamp") return std::to_string(p.timestamp);
    if (field == "month") return p.month().to_string();
    if (field == "cluster") return std::to_string(ctx.cluster);
    if (field == "window_start") return std::to_string(ctx.window_start);
    return std::to_string(ctx.window_end);
  }

  static std::string substitute(const std::string& text, const Context& ctx, bool encode) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
      const auto open = text.find('{', pos);
      if (open == std::string::npos) break;
      const auto close = text.find('}', open);
      out.append(text, pos, open - pos);
      const std::string v = value_of(std::string_view(text).substr(open + 1, close - open - 1), ctx);
      out += encode ? percent_encode(v) : v;
      pos = close + 1;
    }
    out.append(text, pos);
    return out;
  }

  std::string title_;
  std::string url_;
};

/// `[{"title": "...", "url": "..."}]`; unknown fields are a ConfigError.
inline std::vector<LinkTemplate> parse_link_templates(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(Errc::ConfigError, "link_templates must be an array");
  std::vector<LinkTemplate> out;
  for (const auto& t : j) {
    if (!t.is_object() || !t.contains("url") || !t["url"].is_string())
      throw Error(Errc::ConfigError, "link template needs a string 'url'");
    for (const auto& [k, _] : t.items())
      if (k != "title" && k != "url") throw Error(Errc::ConfigError, "unknown link template key '" + k + "'");
    out.emplace_back(t.value("title", std::string("link")), t["url"].get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cards

struct CandidateCard {
  std::string point_id;
  std::int64_t created_at = 0;
  std::string summary_text;
  std::vector<Link> links;
  std::size_t cluster_index = 0;
  CardStatus status = CardStatus::Pending;
  std::int64_t point_timestamp = 0;  // labels belong to the month of the point
  std::string entity_id;
  std::optional<nlohmann::json> delivery;

  MonthKey month() const { return MonthKey::from_timestamp(point_timestamp); }
};

inline std::string format_utc(std::int64_t ts) {
  const std::time_t t = static_cast<std::time_t>(ts);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

inline std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

struct CardOptions {
  std::int64_t context_seconds = 3600;  // half-width of the summarized window
};

/// Card for an accepted point. `context` holds the points summarized in the
/// digest (typically the entity's points inside the window); when it is
/// empty the point alone is summarized.
inline CandidateCard compose_card(const TelemetryPoint& point, const SamplingDecision& decision,
                                  std::span<const LinkTemplate> templates, std::span<const TelemetryPoint> context,
                                  std::int64_t created_at, const CardOptions& opts = {}) {
  if (!decision.accepted) throw Error(Errc::PreconditionViolation, "card requested for a rejected point");
  if (decision.point_id != point.point_id)
    throw Error(Errc::PreconditionViolation, "decision belongs to point " + decision.point_id);

  const std::span<const TelemetryPoint> pts = context.empty() ? std::span<const TelemetryPoint>(&point, 1) : context;
  const std::int64_t w0 = point.timestamp - opts.context_seconds;
  const std::int64_t w1 = point.timestamp + opts.context_seconds;

  std::ostringstream text;
  text << "entity " << point.entity_id << " at " << format_utc(point.timestamp) << " (cluster "
       << decision.cluster_index << "; window " << format_utc(w0) << " to " << format_utc(w1) << ", " << pts.size()
       << (pts.size() == 1 ? " point)" : " points)");
  text << "\nworkload [";
  for (std::size_t i = 0; i < point.workload.size(); ++i) text << (i ? ", " : "") << format_number(point.workload[i]);
  text << "]";
  for (std::size_t f = 0; f < point.perf.size(); ++f) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& p : pts) {
      if (f >= p.perf.size()) continue;
      lo = std::min(lo, p.perf[f]);
      hi = std::max(hi, p.perf[f]);
      sum += p.perf[f];
      ++n;
    }
    text << "\nperf[" << f << "] min " << format_number(lo) << " mean " << format_number(sum / static_cast<double>(n))
         << " max " << format_number(hi);
  }

  CandidateCard card;
  card.point_id = point.point_id;
  card.created_at = created_at;
  card.summary_text = text.str();
  card.cluster_index = decision.cluster_index;
  card.point_timestamp = point.timestamp;
  card.entity_id = point.entity_id;
  const LinkTemplate::Context ctx{&point, decision.cluster_index, w0, w1};
  for (const auto& t : templates) card.links.push_back(t.expand(ctx));
  return card;
}

inline nlohmann::json to_json_value(const CandidateCard& c) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : c.links) links.push_back({{"title", l.title}, {"url", l.url}});
  nlohmann::json j{{"point_id", c.point_id},
                   {"created_at", c.created_at},
                   {"summary_text", c.summary_text},
                   {"links", links},
                   {"cluster_index", c.cluster_index},
                   {"status", to_string(c.status)},
                   {"point_timestamp", c.point_timestamp},
                   {"entity_id", c.entity_id}};
  if (c.delivery) j["delivery"] = *c.delivery;
  return j;
}

inline CandidateCard card_from_json(const nlohmann::json& j) {
  try {
    CandidateCard c;
    c.point_id = j.at("point_id").get<std::string>();
    c.created_at = j.at("created_at").get<std::int64_t>();
    c.summary_text = j.value("summary_text", std::string());
    for (const auto& l : j.value("links", nlohmann::json::array()))
      c.links.push_back({l.at("title").get<std::string>(), l.at("url").get<std::string>()});
    c.cluster_index = j.at("cluster_index").get<std::size_t>();
    c.status = parse_card_status(j.at("status").get<std::string>());
    c.point_timestamp = j.at("point_timestamp").get<std::int64_t>();
    c.entity_id = j.value("entity_id", std::string());
    if (j.contains("delivery")) c.delivery = j["delivery"];
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("card: ") + e.what());
  }
}

/// Outbound webhook body. `text` makes it a valid Slack incoming-webhook
/// payload as is.
inline nlohmann::json webhook_body(const CandidateCard& c) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : c.links) links.push_back({{"title", l.title}, {"url", l.url}});
  return {{"text", c.summary_text}, {"point_id", c.point_id}, {"links", links}, {"cluster", c.cluster_index}};
}

// ---------------------------------------------------------------------------
// Reactions and aggregation

enum class Reaction { ThumbUp, ThumbDown, Retracted };

inline std::string_view to_string(Reaction r) {
  switch (r) {
    case Reaction::ThumbUp: return "up";
    case Reaction::ThumbDown: return "down";
    case Reaction::Retracted: return "retract";
  }
  return "up";
}

inline Reaction parse_reaction(std::string_view s) {
  if (s == "up") return Reaction::ThumbUp;
  if (s == "down") return Reaction::ThumbDown;
  if (s == "retract") return Reaction::Retracted;
  throw Error(Errc::ParseError, "reaction must be up|down|retract, got '" + std::string(s) + "'");
}

struct BoardOptions {
  std::size_t quorum = 2;
  std::int64_t window_seconds = 72 * 3600;
  std::vector<std::string> enrolled;  // optional early-resolution roster
};

/// Status implied by the current records at time `now`. Pure; ignores any
/// status the card already holds.
inline AggregatedLabel aggregate_votes(const std::string& point_id, std::span<const LabelRecord> records,
                                       std::int64_t created_at, std::int64_t now, const BoardOptions& opts) {
  AggregatedLabel out;
  out.point_id = point_id;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.annotator_id).second) continue;
    (r.verdict == Verdict::Normal ? out.normal_votes : out.abnormal_votes) += 1;
  }
  const bool window_elapsed = now >= created_at + opts.window_seconds;
  const bool all_enrolled =
      !opts.enrolled.empty() &&
      std::all_of(opts.enrolled.begin(), opts.enrolled.end(), [&](const auto& a) { return seen.count(a) > 0; });
  if (!window_elapsed && !all_enrolled) return out;
  if (seen.size() >= opts.quorum) {
    if (out.normal_votes == out.abnormal_votes) {
      out.status = CardStatus::DroppedTie;
    } else {
      out.status = CardStatus::Resolved;
      out.final_verdict = out.normal_votes > out.abnormal_votes ? Verdict::Normal : Verdict::Abnormal;
    }
  } else if (window_elapsed) {
    out.status = CardStatus::Expired;
  }
  return out;
}

struct BoardEvent {
  enum class Kind { Reaction, Sweep } kind = Kind::Reaction;
  std::string point_id;
  std::string annotator_id;
  Reaction reaction = Reaction::ThumbUp;
  std::int64_t timestamp = 0;
  bool applied = false;
  std::string note;

  friend bool operator==(const BoardEvent&, const BoardEvent&) = default;
};

inline nlohmann::json to_json_value(const BoardEvent& e) {
  if (e.kind == BoardEvent::Kind::Sweep) return {{"sweep", e.timestamp}};
  nlohmann::json j{{"point_id", e.point_id},
                   {"annotator_id", e.annotator_id},
                   {"reaction", to_string(e.reaction)},
                   {"timestamp", e.timestamp},
                   {"applied", e.applied}};
  if (!e.note.empty()) j["note"] = e.note;
  return j;
}

inline BoardEvent board_event_from_json(const nlohmann::json& j) {
  try {
    BoardEvent e;
    if (j.contains("sweep")) {
      e.kind = BoardEvent::Kind::Sweep;
      e.timestamp = j["sweep"].get<std::int64_t>();
      return e;
    }
    e.point_id = j.at("point_id").get<std::string>();
    e.annotator_id = j.at("annotator_id").get<std::string>();
    e.reaction = parse_reaction(j.at("reaction").get<std::string>());
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    e.applied = j.value("applied", false);
    e.note = j.value("note", std::string());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ParseError, std::string("reaction log: ") + ex.what());
  }
}

struct ReactionResult {
  bool applied = false;
  std::string note;
  AggregatedLabel label;
};

/// Cards, per-annotator labels and the event log. With a state directory,
/// cards.jsonl (latest snapshot per point wins), labels.jsonl and
/// reactions.jsonl are appended as the board changes and replayed on open.
class LabelBoard {
 public:
  explicit LabelBoard(BoardOptions opts = {}) : opts_(std::move(opts)) {}

  LabelBoard(BoardOptions opts, const std::filesystem::path& state_dir)
      : opts_(std::move(opts)), dir_(state_dir), labels_(state_dir / "labels.jsonl") {
    std::filesystem::create_directories(state_dir);
    for_each_line(*dir_ / "cards.jsonl", [&](const nlohmann::json& j) {
      auto c = card_from_json(j);
      cards_[c.point_id] = std::move(c);
    });
    for_each_line(*dir_ / "reactions.jsonl", [&](const nlohmann::json& j) { log_.push_back(board_event_from_json(j)); });
  }

  LabelBoard(const LabelBoard&) = delete;
  LabelBoard& operator=(const LabelBoard&) = delete;

  const BoardOptions& options() const { return opts_; }

  /// False when the point already has a card (one card per point).
  bool add_card(CandidateCard card) {
    std::lock_guard lock(mutex_);
    if (cards_.count(card.point_id)) return false;
    card.status = CardStatus::Pending;
    persist_card(card);
    cards_.emplace(card.point_id, std::move(card));
    return true;
  }

  void set_delivery(const std::string& point_id, nlohmann::json receipt) {
    std::lock_guard lock(mutex_);
    auto& c = card_locked(point_id);
    c.delivery = std::move(receipt);
    persist_card(c);
  }

  ReactionResult ingest_reaction(const std::string& point_id, const std::string& annotator_id, Reaction reaction,
                                 std::int64_t timestamp) {
    std::lock_guard lock(mutex_);
    auto& card = card_locked(point_id);
    BoardEvent ev{BoardEvent::Kind::Reaction, point_id, annotator_id, reaction, timestamp, false, {}};
    ReactionResult res;
    if (card.status != CardStatus::Pending) {
      ev.note = "card already " + std::string(to_string(card.status)) + "; reaction logged, not applied";
    } else if (reaction == Reaction::Retracted) {
      ev.applied = labels_.retract(point_id, annotator_id, timestamp);
      if (!ev.applied) ev.note = "no label to retract";
    } else {
      labels_.upsert({point_id, annotator_id, reaction == Reaction::ThumbUp ? Verdict::Normal : Verdict::Abnormal,
                      timestamp});
      ev.applied = true;
    }
    if (card.status == CardStatus::Pending) reevaluate(card, timestamp);
    res.applied = ev.applied;
    res.note = ev.note;
    res.label = label_locked(card);
    append_event(ev);
    return res;
  }

  /// Re-evaluate every pending card at `now` (window expiry). Returns the
  /// number of cards that left Pending.
  std::size_t sweep(std::int64_t now) {
    std::lock_guard lock(mutex_);
    std::size_t changed = 0;
    for (auto& [_, card] : cards_) {
      if (card.status != CardStatus::Pending) continue;
      reevaluate(card, now);
      changed += card.status != CardStatus::Pending;
    }
    append_event({BoardEvent::Kind::Sweep, {}, {}, Reaction::ThumbUp, now, true, {}});
    return changed;
  }

  std::optional<CandidateCard> card(const std::string& point_id) const {
    std::lock_guard lock(mutex_);
    const auto it = cards_.find(point_id);
    if (it == cards_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<CandidateCard> cards(std::optional<CardStatus> status = std::nullopt) const {
    std::lock_guard lock(mutex_);
    std::vector<CandidateCard> out;
    for (const auto& [_, c] : cards_)
      if (!status || c.status == *status) out.push_back(c);
    return out;
  }

  AggregatedLabel label(const std::string& point_id) const {
    std::lock_guard lock(mutex_);
    const auto it = cards_.find(point_id);
    if (it == cards_.end()) throw Error(Errc::UnknownCandidate, "no candidate card for " + point_id);
    return label_locked(it->second);
  }

  /// Aggregated labels of all cards whose point falls in `month`.
  std::vector<AggregatedLabel> labels(std::optional<MonthKey> month = std::nullopt) const {
    std::lock_guard lock(mutex_);
    std::vector<AggregatedLabel> out;
    for (const auto& [_, c] : cards_)
      if (!month || c.month() == *month) out.push_back(label_locked(c));
    return out;
  }

  std::vector<LabelRecord> records() const { return labels_.all(); }
  std::vector<LabelRecord> records_for(const std::string& point_id) const { return labels_.records_for(point_id); }

  std::vector<BoardEvent> log() const {
    std::lock_guard lock(mutex_);
    return log_;
  }

  /// Rebuild a board in memory from cards as created plus an event log.
  static std::unique_ptr<LabelBoard> replay(BoardOptions opts, std::span<const CandidateCard> created,
                                            std::span<const BoardEvent> events) {
    auto board = std::make_unique<LabelBoard>(std::move(opts));
    for (const auto& c : created) board->add_card(c);
    for (const auto& e : events) {
      if (e.kind == BoardEvent::Kind::Sweep)
        board->sweep(e.timestamp);
      else
        board->ingest_reaction(e.point_id, e.annotator_id, e.reaction, e.timestamp);
    }
    return board;
  }

 private:
  template <class F>
  static void for_each_line(const std::filesystem::path& p, F&& f) {
    if (!std::filesystem::exists(p)) return;
    std::ifstream in(p);
    if (!in) throw Error(Errc::IoError, "cannot read " + p.string());
    std::string line;
    while (std::getline(in, line)) {
      if (detail::is_blank(line)) continue;
      try {
        f(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::ParseError, p.string() + ": " + e.what());
      }
    }
  }

  CandidateCard& card_locked(const std::string& point_id) {
    const auto it = cards_.find(point_id);
    if (it == cards_.end()) throw Error(Errc::UnknownCandidate, "no candidate card for " + point_id);
    return it->second;
  }

  // Records of a final card never change, so counts taken now are the
  // counts it was decided on.
  AggregatedLabel label_locked(const CandidateCard& card) const {
    const auto recs = labels_.records_for(card.point_id);
    AggregatedLabel a = aggregate_votes(card.point_id, recs, card.created_at, card.created_at, opts_);
    a.status = card.status;
    if (card.status == CardStatus::Resolved)
      a.final_verdict = a.normal_votes > a.abnormal_votes ? Verdict::Normal : Verdict::Abnormal;
    return a;
  }

  void reevaluate(CandidateCard& card, std::int64_t now) {
    const auto recs = labels_.records_for(card.point_id);
    const AggregatedLabel a = aggregate_votes(card.point_id, recs, card.created_at, now, opts_);
    if (a.status == CardStatus::Pending) return;
    card.status = a.status;
    persist_card(card);
  }

  void persist_card(const CandidateCard& c) {
    if (dir_) detail::append_line(*dir_ / "cards.jsonl", to_json_value(c));
  }

  void append_event(const BoardEvent& e) {
    log_.push_back(e);
    if (dir_) detail::append_line(*dir_ / "reactions.jsonl", to_json_value(e));
  }

  BoardOptions opts_;
  std::optional<std::filesystem::path> dir_;
  LabelStore labels_;
  std::map<std::string, CandidateCard> cards_;
  std::vector<BoardEvent> log_;
  mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Annotator statistics

enum class AnnotatorFlag { None, OverReporter, UnderReporter };

inline std::string_view to_string(AnnotatorFlag f) {
  switch (f) {
    case AnnotatorFlag::None: return "none";
    case AnnotatorFlag::OverReporter: return "over_reporter";
    case AnnotatorFlag::UnderReporter: return "under_reporter";
  }
  return "none";
}

struct AnnotatorStats {
  std::string annotator_id;
  std::size_t total_reactions = 0;
  std::size_t abnormal = 0;
  double abnormal_rate = 0.0;
  double z_score = 0.0;
  AnnotatorFlag flagged = AnnotatorFlag::None;
  bool eligible = false;
};

struct AnnotatorStatsOptions {
  std::size_t min_reactions = 10;
  double z_limit = 2.0;
};

/// Per-annotator abnormal rate and z-score. Among eligible annotators
/// (>= min_reactions labels), z_i = (r_i - mean of the other eligible rates)
/// / population sd of all eligible rates; ineligible annotators get z = 0.
/// Flagged iff |z| > z_limit.
inline std::vector<AnnotatorStats> annotator_stats(std::span<const LabelRecord> labels,
                                                   const AnnotatorStatsOptions& opts = {}) {
  std::map<std::string, AnnotatorStats> by_id;
  for (const auto& r : labels) {
    auto& s = by_id[r.annotator_id];
    s.annotator_id = r.annotator_id;
    ++s.total_reactions;
    s.abnormal += r.verdict == Verdict::Abnormal;
  }
  std::vector<AnnotatorStats> out;
  std::vector<double> rates;
  for (auto& [_, s] : by_id) {
    s.abnormal_rate = static_cast<double>(s.abnormal) / static_cast<double>(s.total_reactions);
    s.eligible = s.total_reactions >= opts.min_reactions;
    if (s.eligible) rates.push_back(s.abnormal_rate);
    out.push_back(s);
  }
  if (rates.size() < 2) return out;

  const double n = static_cast<double>(rates.size());
  const double sum = std::accumulate(rates.begin(), rates.end(), 0.0);
  const double mean = sum / n;
  double ss = 0.0;
  for (double r : rates) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / n);
  if (sd == 0.0) return out;
  for (auto& s : out) {
    if (!s.eligible) continue;
    const double others = (sum - s.abnormal_rate) / (n - 1.0);
    s.z_score = (s.abnormal_rate - others) / sd;
    if (s.z_score > opts.z_limit) s.flagged = AnnotatorFlag::OverReporter;
    if (s.z_score < -opts.z_limit) s.flagged = AnnotatorFlag::UnderReporter;
  }
  return out;
}

inline nlohmann::json to_json_value(const AnnotatorStats& s) {
  return {{"annotator_id", s.annotator_id}, {"total_reactions", s.total_reactions},
          {"abnormal_rate", s.abnormal_rate}, {"z_score", s.z_score},
          {"flagged", to_string(s.flagged)},   {"eligible", s.eligible}};
}

}  // namespace driftwatch
