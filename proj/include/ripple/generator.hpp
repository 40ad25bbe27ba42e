#pragma once

// Synthetic dialogue-log generator. Each dialogue draws a terminal outcome
// from an exact largest-remainder quota and a per-exchange understanding
// label stream; a latent understanding quality u drives several noisy
// feature channels (confidence, salience, context shift, inconsistency,
// speech tempo). The binary outcome is always a function of the label
// stream: problematic iff one of the first two exchanges is a mismatch that
// the following exchange does not repair with a correct recognition. The
// signal-strength knob s only decides how much of that label signal
// survives into the machine features: at s = 1 the label is exactly
// decodable from the features, and as s falls the channels drift apart per
// recognizer cell and drown in noise until, at s = 0, they say nothing.
// Completed dialogues always keep the task-match relationship at the last
// content exchange consistent with their outcome, so outcome derivation
// from the log reproduces the drawn outcome at every s.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ripple/core.hpp"
#include "ripple/dialog.hpp"

namespace ripple {

struct GeneratorConfig {
  std::size_t dialogue_count = 4692;
  std::uint64_t seed = 0;
  double signal_strength = 0.9;
  // TASKSUCCESS, HANGUP, WIZARD, TASKFAILURE
  std::array<double, 4> outcome_mix{0.671, 0.084, 0.125, 0.120};
  // RCORRECT, RPARTIAL-MATCH, RMISMATCH, NO-RECOG (reference corpus shares)
  std::array<double, 4> slu_mix{7481.0 / 20730, 109.0 / 20730, 4197.0 / 20730,
                                8943.0 / 20730};
  double asr_duration_spread = 1.0;  // scales duration noise
  double confidence_overlap = 1.0;   // scales confidence-channel noise
  double hangup_propensity = 1.0;    // scales the HANGUP share before renormalizing
};

inline json generator_config_to_json(const GeneratorConfig& c) {
  return json{{"dialogue_count", c.dialogue_count},
              {"seed", c.seed},
              {"signal_strength", c.signal_strength},
              {"outcome_mix", c.outcome_mix},
              {"slu_mix", c.slu_mix},
              {"asr_duration_spread", c.asr_duration_spread},
              {"confidence_overlap", c.confidence_overlap},
              {"hangup_propensity", c.hangup_propensity}};
}

inline GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig c;
  if (j.contains("dialogue_count")) c.dialogue_count = j.at("dialogue_count").get<std::size_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("signal_strength")) c.signal_strength = j.at("signal_strength").get<double>();
  if (j.contains("outcome_mix")) c.outcome_mix = j.at("outcome_mix").get<std::array<double, 4>>();
  if (j.contains("slu_mix")) c.slu_mix = j.at("slu_mix").get<std::array<double, 4>>();
  if (j.contains("asr_duration_spread")) c.asr_duration_spread = j.at("asr_duration_spread").get<double>();
  if (j.contains("confidence_overlap")) c.confidence_overlap = j.at("confidence_overlap").get<double>();
  if (j.contains("hangup_propensity")) c.hangup_propensity = j.at("hangup_propensity").get<double>();
  return c;
}

inline void validate_generator_config(const GeneratorConfig& c) {
  if (c.dialogue_count < 1) fail("invalid-count", "dialogue_count must be positive");
  if (c.signal_strength < 0 || c.signal_strength > 1)
    fail("invalid-signal", "signal_strength must lie in [0,1]");
  auto check_mix = [](const std::array<double, 4>& m, const char* name) {
    double sum = 0;
    for (double p : m) {
      if (p < 0) fail("invalid-proportions", std::string(name) + " has a negative entry");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      fail("invalid-proportions", std::string(name) + " must sum to 1");
  };
  check_mix(c.outcome_mix, "outcome_mix");
  check_mix(c.slu_mix, "slu_mix");
  if (c.asr_duration_spread < 0 || c.confidence_overlap < 0 || c.hangup_propensity < 0)
    fail("invalid-proportions", "noise knobs must be non-negative");
}

namespace detail {

inline double round3(double v) { return std::round(v * 1000.0) / 1000.0; }
inline double round2(double v) { return std::round(v * 100.0) / 100.0; }
inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

inline std::string to_upper(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

// Exact class counts: floor each share, then hand out the remainder by
// descending fractional part (ties to the lower index).
inline std::array<std::size_t, 4> quota_counts(std::size_t n,
                                               const std::array<double, 4>& mix) {
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    double exact = static_cast<double>(n) * mix[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) counts[order[k % 4]]++;
  return counts;
}

struct Draw {
  std::mt19937_64 rng;
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
  double gauss() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
  long long intin(long long lo, long long hi) {
    return std::uniform_int_distribution<long long>(lo, hi)(rng);
  }
};

enum Slu { RC = 0, RP = 1, RM = 2, NR = 3 };

inline int draw_slu(Draw& d, const std::array<double, 4>& mix) {
  double u = d.uniform(), cum = 0;
  for (int c = 0; c < 4; ++c) {
    cum += mix[static_cast<std::size_t>(c)];
    if (u < cum) return c;
  }
  return NR;
}

inline int draw_slu_not_rc(Draw& d, const std::array<double, 4>& mix) {
  double total = mix[RM] + mix[RP];
  if (total <= 0) return RM;
  return d.uniform() * total < mix[RM] ? RM : RP;
}

inline int draw_slu_content(Draw& d, const std::array<double, 4>& mix) {
  double total = mix[RC] + mix[RP] + mix[RM];
  if (total <= 0) return RC;
  double u = d.uniform() * total;
  if (u < mix[RC]) return RC;
  if (u < mix[RC] + mix[RP]) return RP;
  return RM;
}

inline std::size_t draw_content_length(Draw& d) {
  // callers always get the greeting plus at least one task turn
  static constexpr std::array<double, 6> cum{0.0, 0.48, 0.73, 0.90, 0.98, 1.0};
  double u = d.uniform();
  for (std::size_t i = 0; i < cum.size(); ++i)
    if (u < cum[i]) return i + 1;
  return cum.size();
}

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> v{
      "call",  "collect", "charge", "card",   "number", "please", "yes",
      "no",    "help",    "person", "phone",  "want",   "make",   "a",
      "to",    "the",     "need",   "operator"};
  return v;
}

inline const std::vector<std::string>& digit_pool() {
  static const std::vector<std::string> v{"one", "eight", "hundred", "five",
                                          "two", "zero",  "nine",    "six"};
  return v;
}

}  // namespace detail

inline std::vector<DialogueRecord> gen_corpus(const GeneratorConfig& cfg) {
  validate_generator_config(cfg);
  const double s = cfg.signal_strength;
  const double noise_gate = std::min(1.0, 10.0 * (1.0 - s));  // full below s=0.9, 0 at s=1
  const double co = cfg.confidence_overlap * noise_gate;
  const FeatureCatalog cat = default_catalog();
  detail::Draw d{std::mt19937_64(mix_seed(cfg.seed, "gen-corpus"))};

  // terminal outcomes by exact quota, shuffled
  std::array<double, 4> omix = cfg.outcome_mix;
  omix[1] *= cfg.hangup_propensity;
  double osum = omix[0] + omix[1] + omix[2] + omix[3];
  if (osum <= 0) fail("invalid-proportions", "outcome mix vanished");
  for (double& p : omix) p /= osum;
  auto counts = detail::quota_counts(cfg.dialogue_count, omix);
  std::vector<int> outcomes;
  outcomes.reserve(cfg.dialogue_count);
  for (int c = 0; c < 4; ++c)
    outcomes.insert(outcomes.end(), counts[static_cast<std::size_t>(c)], c);
  std::shuffle(outcomes.begin(), outcomes.end(), d.rng);

  static constexpr int kTaskSuccess = 0, kHangup = 1, kWizard = 2, kTaskFailure = 3;

  std::vector<DialogueRecord> corpus;
  corpus.reserve(cfg.dialogue_count);
  char idbuf[32];

  for (std::size_t di = 0; di < cfg.dialogue_count; ++di) {
    const int outcome = outcomes[di];
    const bool completed = outcome == kTaskSuccess || outcome == kTaskFailure;
    const bool problematic = outcome != kTaskSuccess;
    const std::size_t len = detail::draw_content_length(d);
    const std::size_t requested = static_cast<std::size_t>(d.intin(0, 14));
    const bool digit_task = requested == 0 || requested == 3;  // dial-for-me, calling-card

    std::vector<int> labels(len);
    for (auto& l : labels) l = detail::draw_slu(d, cfg.slu_mix);
    {
      // The first two exchanges decide the outcome, so their labels are laid
      // out explicitly. Silence comes first and is drawn identically for
      // every outcome: where the caller went quiet says nothing about how
      // the call ends, only what the recognizer made of the audible turns.
      const bool two = len >= 2;
      const double tau = two ? d.uniform() : 1.0;
      const bool quiet0 = tau < 0.20;
      const bool quiet1 = two && tau >= 0.20 && tau < 0.40;
      if (quiet0) labels[0] = detail::NR;
      if (quiet1) labels[1] = detail::NR;
      auto content_ok = [&] { return d.uniform() < 0.88 ? detail::RC : detail::RP; };
      if (outcome == kTaskSuccess) {
        if (!quiet0) labels[0] = content_ok();
        if (two && !quiet1) labels[1] = content_ok();
        // some successes survive an opening mismatch because the very next
        // turn hears the caller perfectly
        if (!quiet0 && two && !quiet1 && d.uniform() < 0.18) {
          labels[0] = detail::RM;
          labels[1] = detail::RC;
        }
      } else {
        // plant a mismatch that no audible turn repairs
        if (quiet0) {
          labels[1] = detail::RM;
        } else if (quiet1 || !two) {
          labels[0] = detail::RM;
        } else {
          double w = d.uniform();
          if (w < 0.60) {         // opening mismatch, muddled follow-up
            labels[0] = detail::RM;
            labels[1] = detail::RP;
          } else if (w < 0.82) {  // two mismatches in a row
            labels[0] = labels[1] = detail::RM;
          } else {                // clean opening, the second turn fails
            labels[0] = content_ok();
            labels[1] = detail::RM;
          }
        }
      }
    }
    if (completed)  // keep the last content exchange consistent with the outcome
      labels[len - 1] = outcome == kTaskSuccess ? detail::RC : detail::RM;
    else if (labels[len - 1] == detail::NR)  // callers speak once more before giving up
      labels[len - 1] = detail::draw_slu_content(d, cfg.slu_mix);
    if (outcome != kTaskSuccess) {
      // a mismatch only sinks the dialogue when the next exchange fails to
      // recover; make sure the failures we planted stay unrecovered
      for (std::size_t k = 0; k < std::min<std::size_t>(2, len); ++k)
        if (labels[k] == detail::RM && k + 1 < len && labels[k + 1] == detail::RC)
          labels[k + 1] = detail::draw_slu_not_rc(d, cfg.slu_mix);
    }

    DialogueRecord dlg;
    std::snprintf(idbuf, sizeof idbuf, "dlg-%06zu", di + 1);
    dlg.id = idbuf;
    dlg.terminal = outcome == kHangup    ? "user-hangup"
                   : outcome == kWizard  ? "wizard-takeover"
                                         : "completed";
    CallerMeta caller;
    caller.age = static_cast<double>(d.intin(18, 77));
    caller.gender = d.uniform() < 0.5 ? "female" : "male";
    dlg.caller = caller;

    double asr_sum = 0;
    bool prev_silent = false;  // did the recognizer hear anything last turn
    for (std::size_t k = 0; k < len; ++k) {
      const int label = labels[k];
      ExchangeLog x;
      x.index = static_cast<long long>(k + 1);

      // prompt machinery: reprompt after silence, occasional courtesy
      // confirmation, otherwise march on with the task; every prompt type
      // rotates between two grammar builds with their own operating points
      const bool alt_gram = d.uniform() < 0.5;
      if (k == 0) {
        x.prompt = "top-how-may-i-help";
        x.rg_grammar = alt_gram ? "Top-gram-b" : "Top-gram-a";
      } else if (prev_silent && d.uniform() < 0.8) {
        x.prompt = "top-reject-rep";
        x.reprompt = true;
        x.subdial = true;
        x.rg_grammar = alt_gram ? "Reprompt-gram-b" : "Reprompt-gram-a";
      } else if (d.uniform() < 0.12) {
        x.prompt = "confirm-task";
        x.confirm = true;
        x.subdial = true;
        x.rg_grammar = alt_gram ? "Confirm-gram-b" : "Confirm-gram-a";
      } else {
        x.prompt = "task-continue";
        x.rg_grammar = alt_gram ? "Task-gram-b" : "Task-gram-a";
      }
      double mod = d.uniform();
      x.rg_modality = mod < 0.34 ? "speech" : mod < 0.67 ? "speech-plus-touchtone" : "touchtone";
      x.dtmf_flag = d.uniform() < 0.35;

      // each grammar/modality/keypress triple puts the recognizer at its own
      // operating point, so raw confidences only compare within a cell; the
      // drift closes as the channel cleans up
      static constexpr double kDrift[2][4][3] = {
          {{0.00, 0.17, -0.17},     // open prompt
           {0.34, -0.085, 0.255},   // reprompt
           {0.00, 0.17, -0.17},     // confirmation
           {0.085, 0.255, -0.085}}, // task continuation
          {{0.00, 0.17, -0.34},     // ... with a keypress in the turn
           {-0.255, 0.085, 0.34},
           {0.00, 0.17, -0.34},
           {-0.17, -0.255, -0.34}}};
      // per-cell scale: recognizers compress or stretch the usable score range
      static constexpr double kGain[2][4][3] = {
          {{1.25, 1.0, 0.8},
           {0.6, 1.25, 0.8},
           {1.25, 1.0, 0.8},
           {1.0, 0.6, 1.25}},
          {{0.8, 1.0, 0.6},
           {1.0, 1.25, 0.8},
           {0.8, 1.0, 0.6},
           {1.0, 0.8, 0.6}}};
      // cells marked 1 report LOW confidence for well-understood speech; their
      // scores only make sense once the cell is known
      static constexpr int kFlip[2][4][3] = {{{0, 1, 0},    // open prompt
                                              {1, 0, 1},    // reprompt
                                              {0, 1, 0},    // confirmation
                                              {0, 0, 1}},   // task continuation
                                             {{1, 0, 1},
                                              {0, 1, 0},
                                              {1, 0, 1},
                                              {1, 1, 0}}};
      const std::size_t gi = x.reprompt ? 1 : x.confirm ? 2 : k > 0 ? 3 : 0;
      const std::size_t mi = mod < 0.34 ? 0 : mod < 0.67 ? 1 : 2;
      const std::size_t di = x.dtmf_flag ? 1 : 0;
      // the alternate grammar build mirrors its sibling: scores reflect the
      // other way, the range complements, the bias runs opposite
      const double drift = (alt_gram ? -1.0 : 1.0) * kDrift[di][gi][mi] * noise_gate;
      const bool flip_cell = (kFlip[di][gi][mi] != 0) != alt_gram;
      const double cell_gain = alt_gram ? 1.85 - kGain[di][gi][mi] : kGain[di][gi][mi];

      HandLog hand;
      if (label == detail::NR) {
        x.no_input = true;
        x.asr_duration = 0.0;
        x.recog_numwords = 0.0;
        for (auto& t : x.task) t = 0.0;
        x.no_info = 1.0;
        x.top_confidence = 0.0;
        x.diff_confidence = 0.0;
        x.salience_coverage = 0.0;
        x.inconsistency = 0.0;
        x.context_shift = 0.0;
        x.top_task = "none";
        x.nexttop_task = "none";
        x.sys_label = "no-info";
        x.spoken_digit = "0";
        hand.human_label = {"no-info"};
        hand.user_modality = "nothing";
      } else {
        // latent understanding quality with class-disjoint core ranges
        double u_lab = label == detail::RC   ? 0.710 + 0.265 * d.uniform()
                       : label == detail::RP ? 0.552 + 0.108 * d.uniform()
                                             : 0.30 + 0.225 * d.uniform();
        double u = s * u_lab + (1.0 - s) * (0.45 + 0.30 * d.uniform());
        // every channel reads the same drifted quality, so no channel pair can
        // separate quality from drift; only the cell symbols can
        const double m = u + (flip_cell ? noise_gate * (1.0 - 2.0 * u) : 0.0);
        const double gain = 1.0 + (cell_gain - 1.0) * noise_gate;
        double v = detail::clamp01(gain * (m - 0.5) + 0.5 + drift);

        long long words = 3 + d.intin(0, 8) + (digit_task ? 4 : 0);
        std::vector<std::string> toks;
        for (long long w = 0; w < words; ++w) {
          const auto& pool = (digit_task && w >= 3) ? detail::digit_pool() : detail::word_pool();
          toks.push_back(pool[static_cast<std::size_t>(d.intin(
              0, static_cast<long long>(pool.size()) - 1))]);
        }
        std::string text;
        for (std::size_t w = 0; w < toks.size(); ++w) {
          if (w) text += ' ';
          text += toks[w];
        }
        x.recog = text;
        x.recog_numwords = static_cast<double>(words);
        double dur = static_cast<double>(words) * (0.45 + 0.15 * (1.0 - v)) +
                     cfg.asr_duration_spread * d.gauss() * 0.8;
        x.asr_duration = detail::round2(std::max(0.3, dur));
        asr_sum += *x.asr_duration;

        // top confidence is the one sharp readout of understanding quality;
        // the remaining scores are either blurry echoes or track the prompt
        // flow rather than the recognition result
        double top = detail::round3(detail::clamp01(v + co * d.gauss() * 0.055));
        x.top_confidence = top;
        x.salience_coverage =
            detail::round3(detail::clamp01(0.15 + 0.75 * v + co * d.gauss() * 0.18));
        x.context_shift = detail::round3(detail::clamp01(
            0.15 + (x.reprompt ? 0.35 : 0.0) + 0.18 * d.uniform() + co * d.gauss() * 0.05));
        x.inconsistency = detail::round3(detail::clamp01(
            (x.confirm ? 0.35 : 0.08) + 0.25 * d.uniform() + co * d.gauss() * 0.05));
        x.no_info = detail::round3(detail::clamp01(1.0 - v + co * d.gauss() * 0.22));

        std::size_t winner = requested;
        if (label == detail::RM) {
          winner = static_cast<std::size_t>(d.intin(0, 13));
          if (winner >= requested) winner++;  // any task but the requested one
        }
        for (auto& t : x.task) t = 0.0;
        x.task[winner] = top;
        x.top_task = cat.task_names[winner];
        if (d.uniform() < 0.6) {
          double second =
              detail::round3(std::max(0.0, top - (0.2 + 0.25 * d.uniform())));
          if (second > 0) {
            std::size_t other = static_cast<std::size_t>(d.intin(0, 13));
            if (other >= winner) other++;
            x.task[other] = second;
            x.nexttop_task = cat.task_names[other];
            x.diff_confidence = top - second;
          }
        }
        if (!x.diff_confidence) {
          x.nexttop_task = "none";
          x.diff_confidence = top;
        }
        x.sys_label = detail::to_upper(cat.task_names[winner]);
        x.spoken_digit = digit_task ? "1" : "0";
        if (label == detail::RP) x.digits_correct = false;

        hand.human_label = {cat.task_names[requested]};
        if (digit_task) hand.human_label.push_back("digitstr");
        std::string spoken = d.uniform() < 0.3 ? "uh " + text : text;
        hand.tscript = spoken;
        hand.clean_tscript = text;
        hand.user_modality = d.uniform() < 0.95 ? "speech" : "touchtone";
      }
      prev_silent = x.no_input;
      x.hand = std::move(hand);
      dlg.exchanges.push_back(std::move(x));
    }

    if (d.uniform() < 0.5) {
      ExchangeLog x;
      x.index = static_cast<long long>(len + 1);
      x.prompt = "closing-goodbye";
      x.closing_prompt_only = true;
      x.no_input = true;
      x.asr_duration = 0.0;
      x.recog_numwords = 0.0;
      for (auto& t : x.task) t = 0.0;
      x.no_info = 1.0;
      x.top_confidence = 0.0;
      x.diff_confidence = 0.0;
      x.salience_coverage = 0.0;
      x.inconsistency = 0.0;
      x.context_shift = 0.0;
      x.top_task = "none";
      x.nexttop_task = "none";
      x.sys_label = "no-info";
      x.spoken_digit = "0";
      x.rg_grammar = "Closing-gram";
      x.rg_modality = "none";
      HandLog hand;
      hand.human_label = {"no-info"};
      hand.user_modality = "nothing";
      x.hand = std::move(hand);
      dlg.exchanges.push_back(std::move(x));
    }

    double total = asr_sum + static_cast<double>(dlg.exchanges.size()) * 2.2 +
                   s * (problematic ? 16.0 : -2.0) + d.gauss() * 2.5;
    dlg.dial_duration = detail::round2(std::max(1.0, total));
    corpus.push_back(std::move(dlg));
  }
  return corpus;
}

// Decode the understanding label from emitted features alone; exact at
// signal strength 1, used by tests to certify invertibility.
inline std::string decode_slu_from_features(const ExchangeLog& x) {
  if (!x.asr_duration || *x.asr_duration == 0.0) return "NO-RECOG";
  double t = x.top_confidence.value_or(0.0);
  if (t < 0.550) return "RMISMATCH";
  if (t < 0.702) return "RPARTIAL-MATCH";
  return "RCORRECT";
}

}  // namespace ripple
