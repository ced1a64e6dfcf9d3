#pragma once

// Iterated learning: learning, interaction and transmission phases, budget
// calibration, and learnability experiments over fixed languages.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emcom/agents.hpp"
#include "emcom/autodiff.hpp"
#include "emcom/game.hpp"
#include "emcom/language.hpp"
#include "emcom/meanings.hpp"
#include "emcom/nn.hpp"
#include "emcom/optim.hpp"
#include "emcom/rng.hpp"

namespace emcom {

inline constexpr std::size_t kTransmissionPairs = 2000;

struct LabeledPair {
  Meaning meaning;
  Message message;
};

struct TransmissionDataset {
  Representation kind = Representation::concatenation;
  std::vector<LabeledPair> pairs;

  std::size_t size() const { return pairs.size(); }
};

/// True when every meaning of the space occurs at least once.
inline bool covers_space(const TransmissionDataset& d, const MeaningSpace& space) {
  std::vector<bool> seen(space.size(), false);
  for (const LabeledPair& p : d.pairs) {
    if (space.contains(p.meaning)) seen[space.index_of(p.meaning)] = true;
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

/// Round-robin over the space, one sample per visit, until `n_pairs` exist.
inline TransmissionDataset round_robin_dataset(
    const MeaningSpace& space, const std::function<Message(std::size_t)>& message_for,
    std::size_t n_pairs = kTransmissionPairs) {
  TransmissionDataset d;
  d.kind = space.kind();
  d.pairs.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::size_t m = i % space.size();
    d.pairs.push_back({space[m], message_for(m)});
  }
  return d;
}

/// Dataset that repeats a fixed language; used for calibration.
inline TransmissionDataset language_dataset(const Language& lang,
                                            std::size_t n_pairs = kTransmissionPairs) {
  return round_robin_dataset(lang.space(), [&](std::size_t m) { return lang[m]; },
                             n_pairs);
}

/// Transmission phase: messages sampled from the speaker's distribution.
inline TransmissionDataset transmission_phase(const Speaker& s, const Stimuli& stimuli,
                                              Rng& rng, std::uint64_t eval_seed = 0) {
  const auto dists = language_distributions(s, stimuli, eval_seed);
  return round_robin_dataset(stimuli.space(), [&](std::size_t m) {
    return message_from_index(rng.categorical(dists[m]));
  });
}

// ---------------------------------------------------------------------------
// Supervised speaker training

/// Per-symbol cross-entropy summed over positions, averaged over the batch.
/// `rows` index the meanings of the space; one rendering of every meaning is
/// shared by the batch.
inline ad::Var speaker_supervised_loss(const Speaker& s, ad::Tape& t,
                                       const Stimuli& stimuli,
                                       const std::vector<std::size_t>& rows,
                                       std::span<const Message> targets, Rng& rng) {
  const std::vector<EncodedInput> view = stimuli.encode_all(rng);
  const ad::Var features = ad::gather_rows(s.features(t, view), rows);
  const auto logits = speaker_logits(s, t, features, targets);
  ad::Var loss;
  for (std::size_t pos = 0; pos < kMessageLength; ++pos) {
    std::vector<std::size_t> sym(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) sym[i] = targets[i].symbols[pos];
    const ad::Var term = ad::nll(ad::log_softmax(logits[pos]), sym);
    loss = pos == 0 ? term : loss + term;
  }
  return loss;
}

namespace detail {

inline void supervised_step(Speaker& s, const Stimuli& stimuli,
                            const std::vector<std::size_t>& rows,
                            const std::vector<Message>& targets,
                            std::span<ad::Parameter* const> params, Optimizer& opt,
                            Rng& rng, std::string_view where, std::size_t it) {
  zero_grad(params);
  ad::Tape t;
  try {
    const ad::Var loss = speaker_supervised_loss(s, t, stimuli, rows, targets, rng);
    t.backward(loss);
  } catch (const NumericError& e) {
    throw NumericError(std::string(where) + ": iteration " + std::to_string(it) + ": " +
                       e.what());
  }
  opt.step(params);
}

}  // namespace detail

/// Trains a speaker to reproduce the dataset's messages. Minibatches are
/// drawn uniformly with replacement. The listener is not involved.
inline void learning_phase(Speaker& s, const Stimuli& stimuli,
                           const TransmissionDataset& data, std::size_t iterations,
                           const TrainHyper& hyper, Rng& rng) {
  if (data.pairs.empty()) throw std::invalid_argument("learning_phase: empty dataset");
  if (iterations == 0) return;
  const MeaningSpace& space = stimuli.space();
  const std::vector<ad::Parameter*> params = nn::parameters_of(s);
  Optimizer opt(hyper.optimizer, hyper.learning_rate);
  std::vector<std::size_t> rows(hyper.batch);
  std::vector<Message> targets(hyper.batch);
  for (std::size_t it = 1; it <= iterations; ++it) {
    for (std::size_t i = 0; i < hyper.batch; ++i) {
      const LabeledPair& p = data.pairs[rng.index(data.pairs.size())];
      rows[i] = space.index_of(p.meaning);
      targets[i] = p.message;
    }
    detail::supervised_step(s, stimuli, rows, targets, params, opt, rng, "learning_phase", it);
  }
}

struct SpeakerAccuracy {
  double sequence = 0.0;
  double token = 0.0;
};

/// Greedy reproduction accuracy of `lang` over every meaning.
inline SpeakerAccuracy speaker_accuracy(const Speaker& s, const Stimuli& stimuli,
                                        const Language& lang, std::uint64_t eval_seed = 0) {
  const Language produced = extract_language(s, stimuli, eval_seed);
  std::size_t seq = 0, tok = 0;
  for (std::size_t i = 0; i < lang.size(); ++i) {
    std::size_t same = 0;
    for (std::size_t p = 0; p < kMessageLength; ++p) {
      same += produced[i].symbols[p] == lang[i].symbols[p];
    }
    tok += same;
    seq += same == kMessageLength;
  }
  const auto n = static_cast<double>(lang.size());
  return {static_cast<double>(seq) / n,
          static_cast<double>(tok) / (n * static_cast<double>(kMessageLength))};
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationOptions {
  std::size_t streak = 200;      // consecutive perfect iterations required
  std::size_t cap = 50000;       // hard iteration cap per seed
  std::size_t round_to = 500;
};

inline std::size_t round_up(std::size_t n, std::size_t step) {
  return step == 0 ? n : (n + step - 1) / step * step;
}

/// Iterations a fresh speaker needs to reproduce the compositional language
/// exactly for `streak` consecutive iterations; max over seeds, rounded up.
inline std::size_t calibrate_learning_iterations(
    Representation kind, std::span<const std::uint64_t> seeds, const AgentHyper& agent,
    const TrainHyper& hyper, const CalibrationOptions& opts = {},
    std::vector<std::size_t>* per_seed = nullptr) {
  if (seeds.size() < 3) {
    throw std::invalid_argument("calibrate_learning_iterations: need at least 3 seeds");
  }
  const Stimuli stimuli{MeaningSpace(kind)};
  const Language target = compositional_language(stimuli.space());
  const TransmissionDataset data = language_dataset(target);
  std::size_t budget = 1;
  for (std::uint64_t seed : seeds) {
    Speaker s(kind, agent, derive_seed(seed, "calibrate.learning.speaker"));
    Rng rng(derive_seed(seed, "calibrate.learning"));
    const std::vector<ad::Parameter*> params = nn::parameters_of(s);
    Optimizer opt(hyper.optimizer, hyper.learning_rate);
    const MeaningSpace& space = stimuli.space();
    std::vector<std::size_t> rows(hyper.batch);
    std::vector<Message> targets(hyper.batch);
    std::size_t run = 0, reached = 0;
    for (std::size_t it = 1; it <= opts.cap; ++it) {
      for (std::size_t i = 0; i < hyper.batch; ++i) {
        const LabeledPair& p = data.pairs[rng.index(data.pairs.size())];
        rows[i] = space.index_of(p.meaning);
        targets[i] = p.message;
      }
      detail::supervised_step(s, stimuli, rows, targets, params, opt, rng,
                              "calibrate_learning_iterations", it);
      run = speaker_accuracy(s, stimuli, target, seed).sequence == 1.0 ? run + 1 : 0;
      if (run >= opts.streak) {
        reached = it;
        break;
      }
    }
    if (reached == 0) {
      throw std::runtime_error("calibrate_learning_iterations: seed " + std::to_string(seed) +
                               " did not converge within " + std::to_string(opts.cap) +
                               " iterations");
    }
    if (per_seed) per_seed->push_back(reached);
    budget = std::max(budget, reached);
  }
  return round_up(budget, opts.round_to);
}

struct InteractionCalibrationOptions {
  double target_success = 0.99;
  std::size_t streak = 5;   // consecutive checkpoints at or above target
  std::size_t cap = 15000;
  std::size_t round_to = 500;
};

/// Interaction iterations a fresh dyad needs to hold `target_success` for
/// `streak` consecutive checkpoints; max over seeds, rounded up.
inline std::size_t calibrate_interaction_iterations(
    Representation kind, std::span<const std::uint64_t> seeds, const AgentHyper& agent,
    const TrainHyper& hyper, const InteractionCalibrationOptions& opts = {},
    std::vector<std::size_t>* per_seed = nullptr, const Stimuli* stimuli_override = nullptr) {
  if (seeds.empty()) {
    throw std::invalid_argument("calibrate_interaction_iterations: need at least one seed");
  }
  const Stimuli default_stimuli{MeaningSpace(kind)};
  const Stimuli& stimuli = stimuli_override ? *stimuli_override : default_stimuli;
  std::size_t budget = 1;
  for (std::uint64_t seed : seeds) {
    Speaker s(kind, agent, derive_seed(seed, "calibrate.interaction.speaker"));
    Listener l(kind, agent, derive_seed(seed, "calibrate.interaction.listener"));
    Rng rng(derive_seed(seed, "calibrate.interaction"));
    std::size_t run = 0, reached = 0;
    InteractionOptions io;
    io.on_checkpoint = [&](const DyadCheckpoint& cp) {
      run = cp.success_rate >= opts.target_success ? run + 1 : 0;
      if (run >= opts.streak) {
        reached = cp.iteration;
        return false;
      }
      return true;
    };
    TrainHyper h = hyper;
    h.final_eval_rounds = 1;
    interaction_train(s, l, stimuli, opts.cap, h, rng, io);
    if (reached == 0) {
      throw std::runtime_error("calibrate_interaction_iterations: seed " +
                               std::to_string(seed) + " did not converge within " +
                               std::to_string(opts.cap) + " iterations");
    }
    if (per_seed) per_seed->push_back(reached);
    budget = std::max(budget, reached);
  }
  return round_up(budget, opts.round_to);
}

// ---------------------------------------------------------------------------
// Chains

struct GenerationRecord {
  std::size_t generation = 0;  // 1-based
  TopoSimResult rho;
  double p_high_comp = 0.0;
  double success_rate = 0.0;
  Language language{MeaningSpace(Representation::concatenation),
                    std::vector<Message>(MeaningSpace(Representation::concatenation).size())};
  TransmissionDataset dataset;
};

struct ChainConfig {
  Representation kind = Representation::concatenation;
  std::size_t generations = 20;
  std::uint64_t seed = 0;
  std::size_t learning_iterations = 0;
  std::size_t interaction_iterations = 0;
  AgentHyper agent;
  TrainHyper train;
  std::size_t n_samples = 200;
  double threshold = 0.6;
  Correlation correlation = Correlation::pearson;
  /// Stop once the posterior exceeds `early_stop_level` for
  /// `early_stop_patience` consecutive generations.
  bool early_stop = false;
  double early_stop_level = 0.95;
  std::size_t early_stop_patience = 3;
  bool fixed_layout = false;
  std::uint64_t layout_seed = 0;
};

/// Raised when a phase fails; carries every completed generation.
class ChainAborted : public std::runtime_error {
 public:
  ChainAborted(const std::string& what, std::vector<GenerationRecord> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const std::vector<GenerationRecord>& partial() const { return partial_; }

 private:
  std::vector<GenerationRecord> partial_;
};

using GenerationCallback = std::function<void(const GenerationRecord&)>;

/// Runs one iterated-learning chain. Every generation gets a fresh speaker
/// and listener; generation 1 has no learning phase.
inline std::vector<GenerationRecord> run_chain(const ChainConfig& cfg,
                                               const GenerationCallback& on_generation = {}) {
  if (cfg.generations == 0) throw std::invalid_argument("run_chain: generations must be >= 1");
  if (cfg.interaction_iterations == 0) {
    throw std::invalid_argument("run_chain: interaction budget must be positive");
  }
  if (cfg.generations > 1 && cfg.learning_iterations == 0) {
    throw std::invalid_argument("run_chain: learning budget must be positive");
  }
  const Stimuli stimuli(MeaningSpace(cfg.kind), cfg.fixed_layout,
                        cfg.layout_seed);
  std::vector<GenerationRecord> records;
  std::size_t above = 0;
  for (std::size_t g = 1; g <= cfg.generations; ++g) {
    try {
      Speaker s(cfg.kind, cfg.agent, derive_seed(cfg.seed, "chain.speaker", g));
      Listener l(cfg.kind, cfg.agent, derive_seed(cfg.seed, "chain.listener", g));
      if (g > 1) {
        Rng learn_rng(derive_seed(cfg.seed, "chain.learning", g));
        learning_phase(s, stimuli, records.back().dataset, cfg.learning_iterations,
                       cfg.train, learn_rng);
      }
      Rng interact_rng(derive_seed(cfg.seed, "chain.interaction", g));
      const DyadTrainReport report = interaction_train(
          s, l, stimuli, cfg.interaction_iterations, cfg.train, interact_rng);

      const std::uint64_t eval_seed = derive_seed(cfg.seed, "chain.eval", g);
      GenerationRecord rec;
      rec.generation = g;
      rec.success_rate = report.final_success;
      rec.language = extract_language(s, stimuli, eval_seed);
      rec.rho = topological_similarity(rec.language, cfg.correlation);
      Rng post_rng(derive_seed(cfg.seed, "chain.posterior", g));
      rec.p_high_comp = posterior_high_comp(s, stimuli, cfg.n_samples, cfg.threshold,
                                            post_rng, cfg.correlation, eval_seed);
      Rng tx_rng(derive_seed(cfg.seed, "chain.transmission", g));
      rec.dataset = transmission_phase(s, stimuli, tx_rng, eval_seed);
      if (rec.dataset.size() != kTransmissionPairs || !covers_space(rec.dataset, stimuli.space())) {
        throw std::logic_error("transmission dataset violates its contract");
      }
      records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw ChainAborted("run_chain: generation " + std::to_string(g) + ": " + e.what(),
                         std::move(records));
    }
    if (on_generation) on_generation(records.back());
    above = records.back().p_high_comp > cfg.early_stop_level ? above + 1 : 0;
    if (cfg.early_stop && above >= cfg.early_stop_patience) break;
  }
  return records;
}

// ---------------------------------------------------------------------------
// Learnability

enum class LanguageKind { compositional, holistic, emergent };

inline std::string_view to_string(LanguageKind k) {
  switch (k) {
    case LanguageKind::compositional: return "compositional";
    case LanguageKind::holistic: return "holistic";
    case LanguageKind::emergent: return "emergent";
  }
  return "?";
}

inline std::optional<LanguageKind> parse_language_kind(std::string_view s) {
  if (s == "compositional") return LanguageKind::compositional;
  if (s == "holistic") return LanguageKind::holistic;
  if (s == "emergent") return LanguageKind::emergent;
  return std::nullopt;
}

enum class CurveMetric { listener_accuracy, speaker_sequence_accuracy, speaker_token_accuracy };

inline std::string_view to_string(CurveMetric m) {
  switch (m) {
    case CurveMetric::listener_accuracy: return "listener_accuracy";
    case CurveMetric::speaker_sequence_accuracy: return "speaker_sequence_accuracy";
    case CurveMetric::speaker_token_accuracy: return "speaker_token_accuracy";
  }
  return "?";
}

struct CurvePoint {
  std::size_t iteration = 0;
  double value = 0.0;
};

struct LearningCurve {
  CurveMetric metric = CurveMetric::listener_accuracy;
  std::vector<CurvePoint> points;
};

struct LearnabilityHyper {
  std::size_t checkpoint_every = 5;
  std::size_t max_iterations = 400;
  std::size_t listener_eval_rounds = 500;
};

/// Trains a fresh speaker on a full language in shuffled epochs. Curves
/// include iteration 0.
inline std::pair<LearningCurve, LearningCurve> train_speaker_on_language(
    const Language& lang, const Stimuli& stimuli, const AgentHyper& agent,
    const TrainHyper& hyper, const LearnabilityHyper& lh, std::uint64_t seed) {
  if (lang.space().kind() != stimuli.space().kind()) {
    throw std::invalid_argument("train_speaker_on_language: language and stimuli differ in kind");
  }
  if (lh.checkpoint_every == 0) {
    throw std::invalid_argument("train_speaker_on_language: checkpoint interval must be positive");
  }
  Speaker s(stimuli.space().kind(), agent, derive_seed(seed, "learnability.speaker"));
  Rng rng(derive_seed(seed, "learnability.speaker.train"));
  const std::uint64_t eval_seed = derive_seed(seed, "learnability.speaker.eval");
  const std::vector<ad::Parameter*> params = nn::parameters_of(s);
  Optimizer opt(hyper.optimizer, hyper.learning_rate);

  LearningCurve seq{CurveMetric::speaker_sequence_accuracy, {}};
  LearningCurve tok{CurveMetric::speaker_token_accuracy, {}};
  auto checkpoint = [&](std::size_t it) {
    const SpeakerAccuracy a = speaker_accuracy(s, stimuli, lang, eval_seed);
    seq.points.push_back({it, a.sequence});
    tok.points.push_back({it, a.token});
  };
  checkpoint(0);

  std::vector<std::size_t> order(lang.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  std::vector<std::size_t> rows(hyper.batch);
  std::vector<Message> targets(hyper.batch);
  for (std::size_t it = 1; it <= lh.max_iterations; ++it) {
    for (std::size_t i = 0; i < hyper.batch; ++i) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      rows[i] = order[cursor++];
      targets[i] = lang[rows[i]];
    }
    detail::supervised_step(s, stimuli, rows, targets, params, opt, rng,
                            "train_speaker_on_language", it);
    if (it % lh.checkpoint_every == 0) checkpoint(it);
  }
  return {std::move(seq), std::move(tok)};
}

/// Candidate scores [B, 15] for rounds whose messages come from `lang`.
inline ad::Var listener_scores(const Listener& l, ad::Tape& t, const Stimuli& stimuli,
                               const RoundBatch& rounds, const Language& lang, Rng& rng) {
  std::array<ad::Var, kMessageLength> positions;
  for (std::size_t p = 0; p < kMessageLength; ++p) {
    std::vector<std::size_t> sym(rounds.size());
    for (std::size_t i = 0; i < rounds.size(); ++i) sym[i] = lang[rounds.target_rows[i]].symbols[p];
    positions[p] = t.constant(one_hot_rows(sym));
  }
  const std::vector<EncodedInput> view = stimuli.encode_all(rng);
  return candidate_scores(l.read(t, positions), l.candidate_features(t, view),
                          rounds.candidate_rows);
}

/// Argmax accuracy of a listener given a language's messages, over fresh rounds.
inline double listener_accuracy(const Listener& l, const Stimuli& stimuli,
                                const Language& lang, std::size_t n_rounds, Rng& rng) {
  if (n_rounds == 0) throw std::invalid_argument("listener_accuracy: n_rounds must be positive");
  std::size_t wins = 0;
  for (std::size_t done = 0; done < n_rounds; done += detail::kEvalChunk) {
    const std::size_t n = std::min(detail::kEvalChunk, n_rounds - done);
    const RoundBatch rounds = sample_rounds(stimuli.space(), n, rng);
    ad::Tape t;
    const ad::Var scores = listener_scores(l, t, stimuli, rounds, lang, rng);
    for (std::size_t i = 0; i < n; ++i) {
      wins += argmax_row(scores.value(), i) == rounds.target_positions[i];
    }
  }
  return static_cast<double>(wins) / static_cast<double>(n_rounds);
}

/// Trains a fresh listener to pick the meaning named by `lang`'s message.
inline LearningCurve train_listener_on_language(const Language& lang, const Stimuli& stimuli,
                                                const AgentHyper& agent,
                                                const TrainHyper& hyper,
                                                const LearnabilityHyper& lh,
                                                std::uint64_t seed) {
  if (lang.space().kind() != stimuli.space().kind()) {
    throw std::invalid_argument("train_listener_on_language: language and stimuli differ in kind");
  }
  if (lh.checkpoint_every == 0) {
    throw std::invalid_argument("train_listener_on_language: checkpoint interval must be positive");
  }
  Listener l(stimuli.space().kind(), agent, derive_seed(seed, "learnability.listener"));
  Rng rng(derive_seed(seed, "learnability.listener.train"));
  Rng eval_rng(derive_seed(seed, "learnability.listener.eval"));
  const std::vector<ad::Parameter*> params = nn::parameters_of(l);
  Optimizer opt(hyper.optimizer, hyper.learning_rate);

  LearningCurve curve{CurveMetric::listener_accuracy, {}};
  curve.points.push_back({0, listener_accuracy(l, stimuli, lang, lh.listener_eval_rounds, eval_rng)});
  for (std::size_t it = 1; it <= lh.max_iterations; ++it) {
    const RoundBatch rounds = sample_rounds(stimuli.space(), hyper.batch, rng);
    zero_grad(params);
    ad::Tape t;
    try {
      t.backward(ad::nll(ad::log_softmax(listener_scores(l, t, stimuli, rounds, lang, rng)),
                         rounds.target_positions));
    } catch (const NumericError& e) {
      throw NumericError("train_listener_on_language: iteration " + std::to_string(it) + ": " +
                         e.what());
    }
    opt.step(params);
    if (it % lh.checkpoint_every == 0) {
      curve.points.push_back(
          {it, listener_accuracy(l, stimuli, lang, lh.listener_eval_rounds, eval_rng)});
    }
  }
  return curve;
}

struct AggregatePoint {
  std::size_t iteration = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across seeds
};

/// Pointwise mean and standard deviation of curves sharing checkpoints.
inline std::vector<AggregatePoint> aggregate(std::span<const LearningCurve> curves) {
  if (curves.empty()) throw std::invalid_argument("aggregate: no curves");
  const std::size_t n = curves.front().points.size();
  std::vector<AggregatePoint> out(n);
  for (const LearningCurve& c : curves) {
    if (c.points.size() != n) throw std::invalid_argument("aggregate: curves differ in length");
  }
  const auto k = static_cast<double>(curves.size());
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const LearningCurve& c : curves) {
      if (c.points[i].iteration != curves.front().points[i].iteration) {
        throw std::invalid_argument("aggregate: checkpoints differ");
      }
      sum += c.points[i].value;
    }
    const double mean = sum / k;
    double ss = 0.0;
    for (const LearningCurve& c : curves) ss += (c.points[i].value - mean) * (c.points[i].value - mean);
    out[i] = {curves.front().points[i].iteration, mean, std::sqrt(ss / k)};
  }
  return out;
}

/// First checkpoint at which the value reaches `level`.
inline std::optional<std::size_t> first_crossing(std::span<const CurvePoint> points,
                                                 double level) {
  for (const CurvePoint& p : points) {
    if (p.value >= level) return p.iteration;
  }
  return std::nullopt;
}

inline std::optional<std::size_t> first_crossing(std::span<const AggregatePoint> points,
                                                 double level) {
  for (const AggregatePoint& p : points) {
    if (p.mean >= level) return p.iteration;
  }
  return std::nullopt;
}

struct LearnabilityResult {
  LanguageKind kind = LanguageKind::compositional;
  std::vector<Language> languages;  // one per seed
  std::vector<LearningCurve> listener, speaker_sequence, speaker_token;

  const std::vector<LearningCurve>& curves(CurveMetric m) const {
    switch (m) {
      case CurveMetric::listener_accuracy: return listener;
      case CurveMetric::speaker_sequence_accuracy: return speaker_sequence;
      case CurveMetric::speaker_token_accuracy: return speaker_token;
    }
    return listener;
  }
};

/// The language a learnability seed trains on. Compositional languages use
/// a random injective symbol assignment per seed; holistic languages are a
/// random reassignment of that seed's compositional messages; emergent
/// languages are given.
inline Language learnability_language(LanguageKind kind, const MeaningSpace& space,
                                      std::uint64_t seed, const Language* emergent) {
  if (kind == LanguageKind::emergent) {
    if (!emergent) throw std::invalid_argument("learnability: emergent kind needs a dyad language");
    if (emergent->space().kind() != space.kind()) {
      throw std::invalid_argument("learnability: emergent language has the wrong representation");
    }
    return *emergent;
  }
  Rng rng(derive_seed(seed, "learnability.language"));
  SymbolAssignment assign;
  for (auto* pos : {&assign.first, &assign.second}) {
    std::array<std::size_t, kVocabSize> symbols{};
    for (std::size_t i = 0; i < kVocabSize; ++i) symbols[i] = i;
    rng.shuffle(symbols);
    std::copy_n(symbols.begin(), kCountValues, pos->begin());
  }
  const Language comp = compositional_language(space, assign);
  if (kind == LanguageKind::compositional) return comp;
  return holistic_language(comp, rng);
}

/// Trains `seeds.size()` fresh speakers and listeners on a language kind.
inline LearnabilityResult learnability_experiment(LanguageKind kind, const Stimuli& stimuli,
                                                  std::span<const std::uint64_t> seeds,
                                                  const AgentHyper& agent,
                                                  const TrainHyper& hyper,
                                                  const LearnabilityHyper& lh,
                                                  const Language* emergent = nullptr) {
  if (seeds.empty()) throw std::invalid_argument("learnability_experiment: no seeds");
  LearnabilityResult r;
  r.kind = kind;
  for (std::uint64_t seed : seeds) {
    Language lang = learnability_language(kind, stimuli.space(), seed, emergent);
    auto [seq, tok] = train_speaker_on_language(lang, stimuli, agent, hyper, lh, seed);
    r.speaker_sequence.push_back(std::move(seq));
    r.speaker_token.push_back(std::move(tok));
    r.listener.push_back(train_listener_on_language(lang, stimuli, agent, hyper, lh, seed));
    r.languages.push_back(std::move(lang));
  }
  return r;
}

}  // namespace emcom
