#pragma once

// Dialogue-log data model and feature extraction: parsing the JSONL log
// format, deriving per-exchange understanding labels and whole-dialogue
// outcomes, encoding exchanges into prefixed feature fragments (with
// derived rates and running tallies), and assembling window vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ripple/core.hpp"
#include "ripple/tabular.hpp"

namespace ripple {

// ---- label vocabularies ----

inline const std::vector<std::string>& slu_classes() {
  static const std::vector<std::string> v{"RCORRECT", "RPARTIAL-MATCH",
                                          "RMISMATCH", "NO-RECOG"};
  return v;
}

inline const std::vector<std::string>& slu_binary_classes() {
  static const std::vector<std::string> v{"RCORRECT", "RINCORRECT"};
  return v;
}

inline const std::vector<std::string>& outcome_classes() {
  static const std::vector<std::string> v{"TASKSUCCESS", "HANGUP", "WIZARD",
                                          "TASKFAILURE"};
  return v;
}

inline const std::vector<std::string>& outcome_binary_classes() {
  static const std::vector<std::string> v{"TASKSUCCESS", "PROBLEMATIC"};
  return v;
}

inline std::string collapse_slu_binary(const std::string& label) {
  if (label == "RCORRECT") return "RCORRECT";
  if (label == "RPARTIAL-MATCH" || label == "RMISMATCH" || label == "NO-RECOG")
    return "RINCORRECT";
  fail("label-unknown", "not an understanding outcome: " + label);
}

inline std::string binary_outcome(const std::string& raw) {
  if (raw == "TASKSUCCESS") return "TASKSUCCESS";
  if (raw == "HANGUP" || raw == "WIZARD" || raw == "TASKFAILURE")
    return "PROBLEMATIC";
  fail("label-unknown", "not a dialogue outcome: " + raw);
}

// ---- log records ----

struct HandLog {
  std::optional<std::string> tscript;
  std::optional<std::string> clean_tscript;
  std::optional<double> cltscript_numwords;
  std::vector<std::string> human_label;  // empty = missing
  std::optional<std::string> user_modality;
};

struct ExchangeLog {
  std::optional<long long> index;  // 1-based; defaults to its position
  std::optional<std::string> prompt;
  bool reprompt = false, confirm = false, subdial = false;
  std::optional<std::string> recog;  // raw recognizer text
  std::optional<double> recog_numwords;
  std::optional<double> asr_duration;
  std::optional<bool> dtmf_flag;
  std::optional<std::string> rg_modality, rg_grammar;
  std::array<std::optional<double>, 15> task{};  // task1..task15
  std::optional<double> no_info;
  std::optional<std::string> top_task, nexttop_task;
  std::optional<double> top_confidence, diff_confidence;
  std::optional<double> salience_coverage, inconsistency, context_shift;
  std::optional<std::string> sys_label;
  std::optional<std::string> spoken_digit;
  std::optional<bool> digits_correct;  // absent = no digit strings in play
  bool no_input = false;
  bool closing_prompt_only = false;
  std::optional<HandLog> hand;
};

struct CallerMeta {
  std::optional<double> age;
  std::optional<std::string> gender;
};

struct DialogueRecord {
  std::string id;
  std::string terminal;  // completed | user-hangup | wizard-takeover
  std::optional<double> dial_duration;
  std::optional<CallerMeta> caller;
  std::vector<ExchangeLog> exchanges;
};

// ---- log JSON ----

namespace detail {

inline double get_confidence(const json& j, const char* field) {
  double v = j.get<double>();
  if (v < 0.0 || v > 1.0)
    fail("confidence-range", std::string(field) + " outside [0,1]");
  return v;
}

inline double get_duration(const json& j, const char* field) {
  double v = j.get<double>();
  if (v < 0.0) fail("negative-duration", std::string(field) + " is negative");
  return v;
}

inline void check_diff_confidence(const ExchangeLog& x) {
  if (!x.top_confidence || !x.diff_confidence) return;
  std::array<double, 15> vals{};
  for (std::size_t i = 0; i < 15; ++i) {
    if (!x.task[i]) return;  // only checkable when all confidences present
    vals[i] = *x.task[i];
  }
  std::sort(vals.begin(), vals.end(), std::greater<>());
  double expect = *x.top_confidence - vals[1];
  if (std::fabs(*x.diff_confidence - expect) > 1e-6)
    fail("inconsistent-diff",
         "diff_confidence does not equal top minus second-highest confidence");
}

}  // namespace detail

inline ExchangeLog exchange_from_json(const json& j, std::size_t* warnings) {
  if (!j.is_object()) fail("bad-format", "exchange must be an object");
  ExchangeLog x;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "index") x.index = val.get<long long>();
      else if (key == "prompt") x.prompt = val.get<std::string>();
      else if (key == "reprompt") x.reprompt = val.get<bool>();
      else if (key == "confirm") x.confirm = val.get<bool>();
      else if (key == "subdial") x.subdial = val.get<bool>();
      else if (key == "recog") x.recog = val.get<std::string>();
      else if (key == "recog_numwords") x.recog_numwords = val.get<double>();
      else if (key == "asr_duration") x.asr_duration = detail::get_duration(val, "asr_duration");
      else if (key == "dtmf_flag") x.dtmf_flag = val.get<bool>();
      else if (key == "rg_modality") x.rg_modality = val.get<std::string>();
      else if (key == "rg_grammar") x.rg_grammar = val.get<std::string>();
      else if (key.size() >= 5 && key.rfind("task", 0) == 0 &&
               key.find_first_not_of("0123456789", 4) == std::string::npos) {
        int t = std::stoi(key.substr(4));
        if (t < 1 || t > 15) fail("bad-format", "unknown task confidence: " + key);
        x.task[static_cast<std::size_t>(t - 1)] = detail::get_confidence(val, key.c_str());
      } else if (key == "no_info") x.no_info = detail::get_confidence(val, "no_info");
      else if (key == "top_task") x.top_task = val.get<std::string>();
      else if (key == "nexttop_task") x.nexttop_task = val.get<std::string>();
      else if (key == "top_confidence") x.top_confidence = detail::get_confidence(val, "top_confidence");
      else if (key == "diff_confidence") x.diff_confidence = val.get<double>();
      else if (key == "salience_coverage") x.salience_coverage = val.get<double>();
      else if (key == "inconsistency") x.inconsistency = val.get<double>();
      else if (key == "context_shift") x.context_shift = val.get<double>();
      else if (key == "sys_label") x.sys_label = val.get<std::string>();
      else if (key == "spoken_digit") x.spoken_digit = val.get<std::string>();
      else if (key == "digits_correct") x.digits_correct = val.get<bool>();
      else if (key == "no_input") x.no_input = val.get<bool>();
      else if (key == "is_closing_prompt_only") x.closing_prompt_only = val.get<bool>();
      else if (key == "hand") {
        HandLog h;
        for (const auto& [hk, hv] : val.items()) {
          if (hk == "tscript") h.tscript = hv.get<std::string>();
          else if (hk == "clean_tscript") h.clean_tscript = hv.get<std::string>();
          else if (hk == "cltscript_numwords") h.cltscript_numwords = hv.get<double>();
          else if (hk == "human_label") h.human_label = hv.get<std::vector<std::string>>();
          else if (hk == "user_modality") h.user_modality = hv.get<std::string>();
          else if (warnings) (*warnings)++;
        }
        x.hand = std::move(h);
      } else if (warnings) {
        (*warnings)++;
      }
    } catch (const json::exception&) {
      fail("bad-format", "malformed exchange field: " + key);
    }
  }
  if (x.recog_numwords && *x.recog_numwords < 0)
    fail("bad-format", "recog_numwords is negative");
  detail::check_diff_confidence(x);
  return x;
}

inline DialogueRecord dialogue_from_json(const json& j, std::size_t* warnings) {
  if (!j.is_object()) fail("bad-format", "dialogue must be an object");
  DialogueRecord d;
  bool have_id = false, have_terminal = false;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "id") {
        d.id = val.get<std::string>();
        have_id = true;
      } else if (key == "terminal") {
        d.terminal = val.get<std::string>();
        have_terminal = true;
      } else if (key == "dial_duration") {
        d.dial_duration = detail::get_duration(val, "dial_duration");
      } else if (key == "caller") {
        CallerMeta c;
        for (const auto& [ck, cv] : val.items()) {
          if (ck == "age") c.age = cv.get<double>();
          else if (ck == "gender") c.gender = cv.get<std::string>();
          else if (warnings) (*warnings)++;
        }
        d.caller = std::move(c);
      } else if (key == "exchanges") {
        for (const auto& xj : val) d.exchanges.push_back(exchange_from_json(xj, warnings));
      } else if (warnings) {
        (*warnings)++;
      }
    } catch (const json::exception&) {
      fail("bad-format", "malformed dialogue field: " + key);
    }
  }
  if (!have_id || d.id.empty()) fail("bad-format", "dialogue without id");
  if (!have_terminal) fail("bad-format", "dialogue without terminal event");
  if (d.terminal != "completed" && d.terminal != "user-hangup" &&
      d.terminal != "wizard-takeover")
    fail("bad-terminal", "unknown terminal event: " + d.terminal);
  if (d.exchanges.empty()) fail("empty-dialogue", "dialogue without exchanges: " + d.id);
  for (std::size_t i = 0; i < d.exchanges.size(); ++i)
    if (d.exchanges[i].index && *d.exchanges[i].index != static_cast<long long>(i + 1))
      fail("bad-index", "exchange index does not match its position in " + d.id);
  return d;
}

inline json exchange_to_json(const ExchangeLog& x) {
  json j = json::object();
  if (x.index) j["index"] = *x.index;
  if (x.prompt) j["prompt"] = *x.prompt;
  if (x.reprompt) j["reprompt"] = true;
  if (x.confirm) j["confirm"] = true;
  if (x.subdial) j["subdial"] = true;
  if (x.recog) j["recog"] = *x.recog;
  if (x.recog_numwords) j["recog_numwords"] = *x.recog_numwords;
  if (x.asr_duration) j["asr_duration"] = *x.asr_duration;
  if (x.dtmf_flag) j["dtmf_flag"] = *x.dtmf_flag;
  if (x.rg_modality) j["rg_modality"] = *x.rg_modality;
  if (x.rg_grammar) j["rg_grammar"] = *x.rg_grammar;
  for (std::size_t i = 0; i < 15; ++i)
    if (x.task[i]) j["task" + std::to_string(i + 1)] = *x.task[i];
  if (x.no_info) j["no_info"] = *x.no_info;
  if (x.top_task) j["top_task"] = *x.top_task;
  if (x.nexttop_task) j["nexttop_task"] = *x.nexttop_task;
  if (x.top_confidence) j["top_confidence"] = *x.top_confidence;
  if (x.diff_confidence) j["diff_confidence"] = *x.diff_confidence;
  if (x.salience_coverage) j["salience_coverage"] = *x.salience_coverage;
  if (x.inconsistency) j["inconsistency"] = *x.inconsistency;
  if (x.context_shift) j["context_shift"] = *x.context_shift;
  if (x.sys_label) j["sys_label"] = *x.sys_label;
  if (x.spoken_digit) j["spoken_digit"] = *x.spoken_digit;
  if (x.digits_correct) j["digits_correct"] = *x.digits_correct;
  if (x.no_input) j["no_input"] = true;
  if (x.closing_prompt_only) j["is_closing_prompt_only"] = true;
  if (x.hand) {
    json h = json::object();
    if (x.hand->tscript) h["tscript"] = *x.hand->tscript;
    if (x.hand->clean_tscript) h["clean_tscript"] = *x.hand->clean_tscript;
    if (x.hand->cltscript_numwords) h["cltscript_numwords"] = *x.hand->cltscript_numwords;
    if (!x.hand->human_label.empty()) h["human_label"] = x.hand->human_label;
    if (x.hand->user_modality) h["user_modality"] = *x.hand->user_modality;
    j["hand"] = std::move(h);
  }
  return j;
}

inline json dialogue_to_json(const DialogueRecord& d) {
  json j = json::object();
  j["id"] = d.id;
  j["terminal"] = d.terminal;
  if (d.dial_duration) j["dial_duration"] = *d.dial_duration;
  if (d.caller) {
    json c = json::object();
    if (d.caller->age) c["age"] = *d.caller->age;
    if (d.caller->gender) c["gender"] = *d.caller->gender;
    j["caller"] = std::move(c);
  }
  json xs = json::array();
  for (const auto& x : d.exchanges) xs.push_back(exchange_to_json(x));
  j["exchanges"] = std::move(xs);
  return j;
}

struct ParsedLog {
  std::vector<DialogueRecord> dialogues;
  std::size_t warnings = 0;  // unknown fields ignored
};

inline ParsedLog parse_dialogue_log(const std::string& text) {
  ParsedLog out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail("bad-format", std::string("malformed log line: ") + e.what());
    }
    out.dialogues.push_back(dialogue_from_json(j, &out.warnings));
  }
  return out;
}

inline std::string render_dialogue_log(const std::vector<DialogueRecord>& ds) {
  std::string out;
  for (const auto& d : ds) {
    out += dialogue_to_json(d).dump();
    out += '\n';
  }
  return out;
}

inline ParsedLog load_dialogue_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("missing-file", "cannot open log file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dialogue_log(ss.str());
}

// ---- label derivation ----

inline bool no_recognizer_input(const ExchangeLog& x) {
  if (x.no_input) return true;
  bool empty_recog = !x.recog || tokenize(*x.recog).empty();
  bool zero_dur = !x.asr_duration || *x.asr_duration == 0.0;
  return empty_recog && zero_dur;
}

// Four-way understanding outcome: no input beats everything; otherwise the
// system's task hypothesis is compared against the hand task labels, with
// digit-string recognition deciding full versus partial credit.
inline std::string derive_slu_label(const ExchangeLog& x) {
  if (no_recognizer_input(x)) return "NO-RECOG";
  if (!x.hand || x.hand->human_label.empty())
    fail("missing-hand-label", "cannot score understanding without hand labels");
  bool match = false;
  if (x.sys_label) {
    std::string sys = lower(*x.sys_label);
    for (const auto& h : x.hand->human_label)
      if (lower(h) == sys) {
        match = true;
        break;
      }
  }
  if (!match) return "RMISMATCH";
  return x.digits_correct.value_or(true) ? "RCORRECT" : "RPARTIAL-MATCH";
}

// Whole-dialogue outcome: terminal events first; a completed dialogue is a
// TASKSUCCESS when, at the last content exchange (ignoring closing-prompt
// turns), the executed task matches a hand task label.
inline std::string derive_outcome(const DialogueRecord& d) {
  if (d.terminal == "user-hangup") return "HANGUP";
  if (d.terminal == "wizard-takeover") return "WIZARD";
  for (auto it = d.exchanges.rbegin(); it != d.exchanges.rend(); ++it) {
    if (it->closing_prompt_only) continue;
    if (!it->sys_label || !it->hand || it->hand->human_label.empty()) continue;
    std::string sys = lower(*it->sys_label);
    for (const auto& h : it->hand->human_label)
      if (lower(h) == sys) return "TASKSUCCESS";
    return "TASKFAILURE";
  }
  fail("missing-hand-label",
       "completed dialogue lacks hand labels for task matching: " + d.id);
}

// ---- derived rates ----

struct RateFeatures {
  double tempo = 0, salpertime = 0, confpertime = 0;
  bool tempo_degenerate = false, salpertime_degenerate = false,
       confpertime_degenerate = false;
};

// Zero or missing denominators (and missing numerators) yield 0 with the
// corresponding degenerate flag; rates are always finite.
inline RateFeatures derive_rate_features(const ExchangeLog& x) {
  RateFeatures r;
  double words = x.recog_numwords ? *x.recog_numwords
                                  : (x.recog ? static_cast<double>(tokenize(*x.recog).size()) : 0.0);
  if (!x.asr_duration || words <= 0)
    r.tempo_degenerate = true;
  else
    r.tempo = *x.asr_duration / words;
  double dur = x.asr_duration.value_or(0.0);
  if (dur > 0 && x.salience_coverage)
    r.salpertime = *x.salience_coverage / dur;
  else
    r.salpertime_degenerate = true;
  if (dur > 0 && x.top_confidence)
    r.confpertime = *x.top_confidence / dur;
  else
    r.confpertime_degenerate = true;
  return r;
}

// ---- feature catalog ----

struct CatalogEntry {
  std::string name;
  FeatureKind kind;
  FeatureGroup group;
  bool task_indept;
};

struct FeatureCatalog {
  std::vector<CatalogEntry> entries;           // canonical order
  std::vector<std::string> task_names;         // the 15 task vocabulary
  std::vector<std::string> closing_prompts;    // terminal-indicating prompt names
};

inline FeatureCatalog default_catalog() {
  using K = FeatureKind;
  using G = FeatureGroup;
  FeatureCatalog c;
  auto add = [&](const char* n, K k, G g, bool ti) {
    c.entries.push_back(CatalogEntry{n, k, g, ti});
  };
  // recognizer group
  add("recog", K::set, G::asr, true);
  add("recog-numwords", K::continuous, G::asr, true);
  add("asr-duration", K::continuous, G::asr, true);
  add("dtmf-flag", K::symbolic, G::asr, true);
  add("rg-modality", K::symbolic, G::asr, true);
  add("rg-grammar", K::symbolic, G::asr, false);
  add("tempo", K::continuous, G::asr, false);
  add("spoken-digit", K::symbolic, G::asr, false);
  // understanding group
  for (int t = 1; t <= 15; ++t)
    add(("task" + std::to_string(t)).c_str(), K::continuous, G::slu, false);
  add("no-info", K::continuous, G::slu, false);
  add("salience-coverage", K::continuous, G::slu, true);
  add("inconsistency", K::continuous, G::slu, true);
  add("context-shift", K::continuous, G::slu, true);
  add("top-task", K::symbolic, G::slu, false);
  add("nexttop-task", K::symbolic, G::slu, false);
  add("top-confidence", K::continuous, G::slu, true);
  add("diff-confidence", K::continuous, G::slu, true);
  add("confpertime", K::continuous, G::slu, false);
  add("salpertime", K::continuous, G::slu, false);
  add("auto-SLU-success", K::symbolic, G::slu, true);
  // dialogue-manager group
  add("sys-label", K::symbolic, G::dm, false);
  add("utt-id", K::continuous, G::dm, true);
  add("prompt", K::symbolic, G::dm, false);
  add("reprompt", K::symbolic, G::dm, true);
  add("confirm", K::symbolic, G::dm, true);
  add("subdial", K::symbolic, G::dm, true);
  add("num-utts", K::continuous, G::dm, true);
  add("num-reprompts", K::continuous, G::dm, true);
  add("percent-reprompts", K::continuous, G::dm, true);
  add("num-confirms", K::continuous, G::dm, true);
  add("percent-confirms", K::continuous, G::dm, true);
  add("num-subdials", K::continuous, G::dm, true);
  add("percent-subdials", K::continuous, G::dm, true);
  add("dial-duration", K::continuous, G::dm, true);
  // hand-labelled group
  add("tscript", K::set, G::hand, false);
  add("human-label", K::set, G::hand, false);
  add("age", K::continuous, G::hand, false);
  add("gender", K::symbolic, G::hand, false);
  add("user-modality", K::symbolic, G::hand, false);
  add("clean-tscript", K::set, G::hand, false);
  add("cltscript-numwords", K::continuous, G::hand, false);
  add("SLU-success", K::symbolic, G::hand, false);

  c.task_names = {"dial-for-me",  "collect-call", "billing-credit",
                  "calling-card", "prepaid-card", "third-party",
                  "rate-info",    "area-code",    "directory",
                  "operator",     "time-charge",  "balance",
                  "account",      "payment",      "other-service"};
  c.closing_prompts = {"closing-goodbye", "closing-thanks"};
  return c;
}

// Named feature subsets. `auto` is everything not hand-labelled;
// `task-indept` is the runtime task-independent selection.
inline std::vector<std::string> feature_set_names(const FeatureCatalog& cat,
                                                  const std::string& set_name) {
  std::string s = lower(set_name);
  std::vector<std::string> out;
  for (const auto& e : cat.entries) {
    bool keep = false;
    if (s == "all") keep = true;
    else if (s == "auto") keep = e.group != FeatureGroup::hand;
    else if (s == "task-indept") keep = e.task_indept;
    else if (s == "asr") keep = e.group == FeatureGroup::asr;
    else if (s == "slu") keep = e.group == FeatureGroup::slu;
    else if (s == "dialogue") keep = e.group == FeatureGroup::dm;
    else if (s == "hand") keep = e.group == FeatureGroup::hand;
    else fail("unknown-feature-set", "no feature set named: " + set_name);
    if (keep) out.push_back(e.name);
  }
  return out;
}

// ---- per-exchange encoding ----

namespace detail {

inline void put_num(FeatureVector& fv, const std::string& name, double v) {
  fv.values[name] = v;
}

inline void put_sym(FeatureVector& fv, const std::string& name, std::string v) {
  fv.values[name] = std::move(v);
}

inline void put_bag(FeatureVector& fv, const std::string& name, const std::string& text) {
  fv.values[name] = tokenize(text);
}

}  // namespace detail

// Emits every automatic per-exchange feature for exchange i (1-based) with
// the given name prefix: raw recognizer/understanding/DM values, derived
// rates, and running prompt-kind tallies over exchanges 1..i. Hand-labelled
// features (including the derived understanding outcome and caller
// age/gender) are added only when requested and present.
inline FeatureVector encode_exchange(const DialogueRecord& d, std::size_t i,
                                     const std::string& prefix,
                                     bool include_hand = true) {
  if (i < 1 || i > d.exchanges.size())
    fail("index-out-of-range", "no exchange " + std::to_string(i) + " in " + d.id);
  const ExchangeLog& x = d.exchanges[i - 1];
  FeatureVector fv;
  fv.id = d.id;
  auto P = [&](const char* base) { return prefix + base; };

  if (x.recog) {
    detail::put_bag(fv, P("recog"), *x.recog);
    double words = x.recog_numwords ? *x.recog_numwords
                                    : static_cast<double>(tokenize(*x.recog).size());
    detail::put_num(fv, P("recog-numwords"), words);
  } else if (x.recog_numwords) {
    detail::put_num(fv, P("recog-numwords"), *x.recog_numwords);
  }
  if (x.asr_duration) detail::put_num(fv, P("asr-duration"), *x.asr_duration);
  if (x.dtmf_flag) detail::put_sym(fv, P("dtmf-flag"), *x.dtmf_flag ? "1" : "0");
  if (x.rg_modality) detail::put_sym(fv, P("rg-modality"), *x.rg_modality);
  if (x.rg_grammar) detail::put_sym(fv, P("rg-grammar"), *x.rg_grammar);
  if (x.spoken_digit) detail::put_sym(fv, P("spoken-digit"), *x.spoken_digit);

  for (std::size_t t = 0; t < 15; ++t)
    if (x.task[t]) detail::put_num(fv, P(("task" + std::to_string(t + 1)).c_str()), *x.task[t]);
  if (x.no_info) detail::put_num(fv, P("no-info"), *x.no_info);
  if (x.top_task) detail::put_sym(fv, P("top-task"), *x.top_task);
  if (x.nexttop_task) detail::put_sym(fv, P("nexttop-task"), *x.nexttop_task);
  if (x.top_confidence) detail::put_num(fv, P("top-confidence"), *x.top_confidence);
  if (x.diff_confidence) detail::put_num(fv, P("diff-confidence"), *x.diff_confidence);
  if (x.salience_coverage) detail::put_num(fv, P("salience-coverage"), *x.salience_coverage);
  if (x.inconsistency) detail::put_num(fv, P("inconsistency"), *x.inconsistency);
  if (x.context_shift) detail::put_num(fv, P("context-shift"), *x.context_shift);

  RateFeatures rates = derive_rate_features(x);
  detail::put_num(fv, P("tempo"), rates.tempo);
  detail::put_num(fv, P("salpertime"), rates.salpertime);
  detail::put_num(fv, P("confpertime"), rates.confpertime);

  if (x.sys_label) detail::put_sym(fv, P("sys-label"), *x.sys_label);
  detail::put_num(fv, P("utt-id"), static_cast<double>(x.index.value_or(static_cast<long long>(i))));
  if (x.prompt) detail::put_sym(fv, P("prompt"), *x.prompt);
  detail::put_sym(fv, P("reprompt"), x.reprompt ? "reprompt" : "not-reprompt");
  detail::put_sym(fv, P("confirm"), x.confirm ? "confirm" : "not-confirm");
  detail::put_sym(fv, P("subdial"), x.subdial ? "subdial" : "not-subdial");

  double reprompts = 0, confirms = 0, subdials = 0;
  for (std::size_t k = 0; k < i; ++k) {
    if (d.exchanges[k].reprompt) reprompts++;
    if (d.exchanges[k].confirm) confirms++;
    if (d.exchanges[k].subdial) subdials++;
  }
  double turns = static_cast<double>(i);
  detail::put_num(fv, P("num-utts"), turns);
  detail::put_num(fv, P("num-reprompts"), reprompts);
  detail::put_num(fv, P("percent-reprompts"), reprompts / turns);
  detail::put_num(fv, P("num-confirms"), confirms);
  detail::put_num(fv, P("percent-confirms"), confirms / turns);
  detail::put_num(fv, P("num-subdials"), subdials);
  detail::put_num(fv, P("percent-subdials"), subdials / turns);

  if (include_hand) {
    if (x.hand) {
      const HandLog& h = *x.hand;
      if (h.tscript) detail::put_bag(fv, P("tscript"), *h.tscript);
      if (h.clean_tscript) {
        detail::put_bag(fv, P("clean-tscript"), *h.clean_tscript);
        double words = h.cltscript_numwords
                           ? *h.cltscript_numwords
                           : static_cast<double>(tokenize(*h.clean_tscript).size());
        detail::put_num(fv, P("cltscript-numwords"), words);
      } else if (h.cltscript_numwords) {
        detail::put_num(fv, P("cltscript-numwords"), *h.cltscript_numwords);
      }
      if (!h.human_label.empty()) {
        TokenBag bag;
        for (const auto& l : h.human_label) bag.push_back(lower(l));
        fv.values[P("human-label")] = canonical_bag(std::move(bag));
      }
      if (h.user_modality) detail::put_sym(fv, P("user-modality"), *h.user_modality);
    }
    if (d.caller) {
      if (d.caller->age) detail::put_num(fv, P("age"), *d.caller->age);
      if (d.caller->gender) detail::put_sym(fv, P("gender"), *d.caller->gender);
    }
    if (no_recognizer_input(x) || (x.hand && !x.hand->human_label.empty()))
      detail::put_sym(fv, P("SLU-success"), derive_slu_label(x));
  }
  return fv;
}

// ---- windows ----

enum class Window { ex1, ex12, whole };

inline const char* to_string(Window w) {
  switch (w) {
    case Window::ex1: return "ex1";
    case Window::ex12: return "ex12";
    case Window::whole: return "whole";
  }
  return "?";
}

inline Window parse_window(const std::string& s) {
  std::string v = lower(s);
  if (v == "ex1") return Window::ex1;
  if (v == "ex12") return Window::ex12;
  if (v == "whole") return Window::whole;
  fail("unknown-window", "no window named: " + s);
}

namespace detail {

inline bool is_closing_prompt(const FeatureCatalog& cat, const std::string& name) {
  return std::find(cat.closing_prompts.begin(), cat.closing_prompts.end(), name) !=
         cat.closing_prompts.end();
}

}  // namespace detail

// One feature vector for the dialogue over the requested window. EX1 uses
// exchange 1 only; EX12 adds exchange 2 unless it is a bare closing prompt;
// WHOLE covers every exchange plus dial-duration. Within EX1/EX12 the
// end-of-dialogue indicators are withheld: dial-duration, and any prompt
// value on the catalog's closing list. The label is the binary outcome when
// derivable.
inline FeatureVector build_window(const DialogueRecord& d, Window window,
                                  const FeatureCatalog& cat,
                                  const std::string& feature_set) {
  auto names = feature_set_names(cat, feature_set);
  std::set<std::string> keep(names.begin(), names.end());
  std::size_t upto = window == Window::ex1    ? 1
                     : window == Window::ex12 ? std::min<std::size_t>(2, d.exchanges.size())
                                              : d.exchanges.size();
  FeatureVector out;
  out.id = d.id;
  for (std::size_t k = 1; k <= upto; ++k) {
    if (window == Window::ex12 && k == 2 && d.exchanges[1].closing_prompt_only)
      break;
    std::string prefix = "e" + std::to_string(k) + "-";
    FeatureVector frag = encode_exchange(d, k, prefix, true);
    for (auto& [name, value] : frag.values) {
      std::string base = name.substr(prefix.size());
      if (!keep.count(base)) continue;
      if (window != Window::whole && base == "prompt" &&
          detail::is_closing_prompt(cat, std::get<std::string>(value)))
        continue;
      out.values[name] = std::move(value);
    }
  }
  if (window == Window::whole && keep.count("dial-duration") && d.dial_duration)
    out.values["dial-duration"] = *d.dial_duration;
  try {
    out.label = binary_outcome(derive_outcome(d));
  } catch (const error&) {
    // outcome not derivable: leave the vector unlabeled
  }
  return out;
}

// ---- schemas ----

enum class SluInject { none, four_class, two_class };

// Schema for window vectors: per-exchange declarations e1-..e<K>- in catalog
// order, the optional injected understanding feature, dial-duration for the
// whole-dialogue window, and the binary outcome label.
inline FeatureSchema make_window_schema(const FeatureCatalog& cat,
                                        const std::string& feature_set,
                                        Window window, std::size_t max_exchanges,
                                        SluInject inject) {
  auto names = feature_set_names(cat, feature_set);
  std::set<std::string> keep(names.begin(), names.end());
  std::size_t upto = window == Window::ex1    ? 1
                     : window == Window::ex12 ? 2
                                              : std::max<std::size_t>(max_exchanges, 1);
  std::vector<FeatureDecl> decls;
  for (std::size_t k = 1; k <= upto; ++k) {
    std::string prefix = "e" + std::to_string(k) + "-";
    for (const auto& e : cat.entries) {
      if (!keep.count(e.name)) continue;
      if (e.name == "dial-duration") continue;  // whole-dialogue feature
      if (e.name == "auto-SLU-success") {
        if (inject == SluInject::none) continue;
        decls.push_back(FeatureDecl{prefix + e.name, FeatureKind::symbolic, e.group, {}});
        continue;
      }
      decls.push_back(FeatureDecl{prefix + e.name, e.kind, e.group, {}});
    }
  }
  if (window == Window::whole && keep.count("dial-duration"))
    decls.push_back(FeatureDecl{"dial-duration", FeatureKind::continuous, FeatureGroup::dm, {}});
  decls.push_back(FeatureDecl{"outcome", FeatureKind::symbolic, FeatureGroup::label,
                              outcome_binary_classes()});
  return define_schema(decls);
}

// Schema for per-exchange rows (understanding prediction): unprefixed catalog
// names minus the outcome-coincident and whole-dialogue features, plus the
// four-way or collapsed understanding label.
inline FeatureSchema make_exchange_schema(const FeatureCatalog& cat,
                                          const std::string& feature_set,
                                          bool collapse) {
  auto names = feature_set_names(cat, feature_set);
  std::vector<FeatureDecl> decls;
  for (const auto& e : cat.entries) {
    if (std::find(names.begin(), names.end(), e.name) == names.end()) continue;
    if (e.name == "dial-duration" || e.name == "auto-SLU-success" ||
        e.name == "SLU-success")
      continue;
    decls.push_back(FeatureDecl{e.name, e.kind, e.group, {}});
  }
  decls.push_back(FeatureDecl{"slu-outcome", FeatureKind::symbolic, FeatureGroup::label,
                              collapse ? slu_binary_classes() : slu_classes()});
  return define_schema(decls);
}

// Per-exchange dataset over the given dialogues; rows are exchanges with a
// derivable understanding label, ids "<dialogue>#e<i>".
inline Dataset make_exchange_dataset(const std::vector<DialogueRecord>& dialogues,
                                     const FeatureCatalog& cat,
                                     const std::string& feature_set,
                                     bool collapse) {
  Dataset ds;
  ds.schema = make_exchange_schema(cat, feature_set, collapse);
  for (const auto& d : dialogues) {
    for (std::size_t i = 1; i <= d.exchanges.size(); ++i) {
      std::string label;
      try {
        label = derive_slu_label(d.exchanges[i - 1]);
      } catch (const error&) {
        continue;  // unlabeled exchange: not a training row
      }
      FeatureVector fv = encode_exchange(d, i, "", false);
      FeatureVector row;
      row.id = d.id + "#e" + std::to_string(i);
      row.label = collapse ? collapse_slu_binary(label) : label;
      for (auto& [name, value] : fv.values)
        if (ds.schema.has(name)) row.values[name] = std::move(value);
      ds.rows.push_back(std::move(row));
    }
  }
  validate(ds);
  return ds;
}

}  // namespace ripple
