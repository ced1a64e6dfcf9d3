#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emcom/agents.hpp"
#include "emcom/autodiff.hpp"
#include "emcom/meanings.hpp"
#include "emcom/optim.hpp"
#include "emcom/rng.hpp"

namespace emcom {

struct TrainHyper {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 5e-4;
  /// Bag dyads keep one or two message collisions at 32 rounds per step.
  std::size_t batch = 64;
  /// Hard straight-through messages. At temperature 1 the soft gradient is
  /// too peaked for the dyad to leave its early message collisions.
  GumbelConfig gumbel{4.0, true, GumbelNoise::sampled};
  std::size_t eval_every = 50;
  std::size_t eval_rounds = 500;
  std::size_t final_eval_rounds = 2000;
};

struct RoundOutcome {
  Meaning target;
  Message message;
  std::size_t choice = 0;
  bool success = false;
  double loss = 0.0;
};

struct DyadCheckpoint {
  std::size_t iteration = 0;
  double mean_loss = 0.0;
  double success_rate = 0.0;
};

struct DyadTrainReport {
  std::size_t iterations = 0;
  double initial_loss = 0.0;
  std::vector<DyadCheckpoint> curve;
  double final_success = 0.0;
};

/// A batch of independent rounds: targets, fresh candidate sets, and the
/// row indices needed to score against per-meaning feature pools.
struct RoundBatch {
  std::vector<CandidateSet> sets;
  std::vector<std::size_t> target_rows;     // space index of each target
  std::vector<std::size_t> candidate_rows;  // 15 space indices per round
  std::vector<std::size_t> target_positions;

  std::size_t size() const { return sets.size(); }
};

inline RoundBatch sample_rounds(const MeaningSpace& space, std::size_t n, Rng& rng) {
  RoundBatch b;
  b.sets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Meaning& target = space[rng.index(space.size())];
    CandidateSet cs = make_candidate_set(target, space, rng);
    b.target_rows.push_back(space.index_of(target));
    for (const Meaning& c : cs.candidates) b.candidate_rows.push_back(space.index_of(c));
    b.target_positions.push_back(cs.target_index);
    b.sets.push_back(std::move(cs));
  }
  return b;
}

/// Listener stand-in used by evaluation harnesses: picks a candidate index.
using ChooseFn = std::function<std::size_t(const Message&, const CandidateSet&)>;

/// Exact-match oracle: always picks the target meaning.
inline std::size_t oracle_choice(const Message&, const CandidateSet& cs) {
  for (std::size_t i = 0; i < cs.candidates.size(); ++i) {
    if (cs.candidates[i] == cs.target()) return i;
  }
  throw std::logic_error("oracle: target missing from candidate set");
}

/// One full game round. The speaker only ever sees the target.
inline RoundOutcome play_round(const Speaker& s, const Listener& l,
                               const Meaning& target, const Stimuli& stimuli,
                               SpeakMode mode, Rng& rng) {
  const MeaningSpace& space = stimuli.space();
  CandidateSet cs = make_candidate_set(target, space, rng);
  RoundOutcome out;
  out.target = target;
  out.message = speak(s, stimuli.encode(target, rng), mode, &rng);
  std::vector<EncodedInput> encoded;
  encoded.reserve(kNumCandidates);
  for (const Meaning& c : cs.candidates) encoded.push_back(stimuli.encode(c, rng));
  const std::vector<double> p = listen(l, out.message, encoded);
  out.choice = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[out.choice]) out.choice = i;
  }
  out.success = cs.candidates[out.choice] == target;
  out.loss = -std::log(p[cs.target_index]);
  return out;
}

namespace detail {

/// Greedy messages and argmax choices for a batch of rounds; one rendering
/// of every meaning is shared by the batch on each side of the channel.
inline std::vector<std::size_t> greedy_choices(const Speaker& s, const Listener& l,
                                               const Stimuli& stimuli,
                                               const RoundBatch& rounds, Rng& rng,
                                               std::vector<Message>* messages = nullptr) {
  std::vector<EncodedInput> speaker_view = stimuli.encode_all(rng);
  std::vector<EncodedInput> targets;
  targets.reserve(rounds.size());
  for (std::size_t r : rounds.target_rows) targets.push_back(speaker_view[r]);
  const std::vector<Message> msgs = speak_greedy(s, targets);

  ad::Tape t;
  std::array<ad::Var, kMessageLength> positions;
  for (std::size_t p = 0; p < kMessageLength; ++p) {
    std::vector<std::size_t> sym(msgs.size());
    for (std::size_t i = 0; i < msgs.size(); ++i) sym[i] = msgs[i].symbols[p];
    positions[p] = t.constant(one_hot_rows(sym));
  }
  const std::vector<EncodedInput> listener_view = stimuli.encode_all(rng);
  const ad::Var scores = candidate_scores(l.read(t, positions),
                                          l.candidate_features(t, listener_view),
                                          rounds.candidate_rows);
  std::vector<std::size_t> choice(rounds.size());
  for (std::size_t i = 0; i < rounds.size(); ++i) choice[i] = argmax_row(scores.value(), i);
  if (messages) *messages = msgs;
  return choice;
}

inline constexpr std::size_t kEvalChunk = 100;

}  // namespace detail

/// Fraction of successful rounds with greedy speaking and argmax listening
/// on freshly sampled candidate sets.
inline double evaluate_success(const Speaker& s, const Listener& l,
                               const Stimuli& stimuli, std::size_t n_rounds,
                               Rng& rng) {
  if (n_rounds == 0) throw std::invalid_argument("evaluate_success: n_rounds must be positive");
  std::size_t wins = 0;
  for (std::size_t done = 0; done < n_rounds; done += detail::kEvalChunk) {
    const std::size_t n = std::min(detail::kEvalChunk, n_rounds - done);
    const RoundBatch rounds = sample_rounds(stimuli.space(), n, rng);
    const auto choice = detail::greedy_choices(s, l, stimuli, rounds, rng);
    for (std::size_t i = 0; i < n; ++i) wins += choice[i] == rounds.target_positions[i];
  }
  return static_cast<double>(wins) / static_cast<double>(n_rounds);
}

/// Same harness with a substitute listener policy.
inline double evaluate_success(const Speaker& s, const ChooseFn& choose,
                               const Stimuli& stimuli, std::size_t n_rounds,
                               Rng& rng) {
  if (n_rounds == 0) throw std::invalid_argument("evaluate_success: n_rounds must be positive");
  std::size_t wins = 0;
  for (std::size_t done = 0; done < n_rounds; done += detail::kEvalChunk) {
    const std::size_t n = std::min(detail::kEvalChunk, n_rounds - done);
    const RoundBatch rounds = sample_rounds(stimuli.space(), n, rng);
    std::vector<EncodedInput> view = stimuli.encode_all(rng);
    std::vector<EncodedInput> targets;
    for (std::size_t r : rounds.target_rows) targets.push_back(view[r]);
    const auto msgs = speak_greedy(s, targets);
    for (std::size_t i = 0; i < n; ++i) {
      wins += choose(msgs[i], rounds.sets[i]) == rounds.target_positions[i];
    }
  }
  return static_cast<double>(wins) / static_cast<double>(n_rounds);
}

struct InteractionOptions {
  /// Replaces every message with a constant one (channel ablation).
  bool ablate_channel = false;
  /// Called at every checkpoint; return false to stop training early.
  std::function<bool(const DyadCheckpoint&)> on_checkpoint;
};

/// Game loss for one batch of rounds through the relaxed channel.
inline ad::Var game_loss(const Speaker& s, const Listener& l, ad::Tape& t,
                         const Stimuli& stimuli, const RoundBatch& rounds,
                         const GumbelConfig& gumbel, Rng& rng,
                         bool ablate_channel = false) {
  std::array<ad::Var, kMessageLength> positions;
  if (ablate_channel) {
    const std::vector<std::size_t> zeros(rounds.size(), 0);
    for (auto& p : positions) p = t.constant(one_hot_rows(zeros));
  } else {
    const std::vector<EncodedInput> speaker_view = stimuli.encode_all(rng);
    const ad::Var features = ad::gather_rows(s.features(t, speaker_view), rounds.target_rows);
    RelaxedMessages msg = speak_gumbel(s, t, features, gumbel, rng);
    positions = msg.positions;
  }
  const std::vector<EncodedInput> listener_view = stimuli.encode_all(rng);
  const ad::Var scores = candidate_scores(l.read(t, positions),
                                          l.candidate_features(t, listener_view),
                                          rounds.candidate_rows);
  return ad::nll(ad::log_softmax(scores), rounds.target_positions);
}

/// Trains speaker and listener end to end on the game loss.
inline DyadTrainReport interaction_train(Speaker& s, Listener& l, const Stimuli& stimuli,
                                         std::size_t iterations, const TrainHyper& hyper,
                                         Rng& rng, const InteractionOptions& options = {}) {
  if (iterations == 0) throw std::invalid_argument("interaction_train: iterations must be positive");
  if (hyper.batch == 0 || hyper.eval_every == 0 || hyper.eval_rounds == 0 ||
      hyper.final_eval_rounds == 0) {
    throw std::invalid_argument("interaction_train: batch and evaluation sizes must be positive");
  }
  std::vector<ad::Parameter*> params = nn::parameters_of(s);
  const std::vector<ad::Parameter*> lp = nn::parameters_of(l);
  params.insert(params.end(), lp.begin(), lp.end());
  Optimizer opt(hyper.optimizer, hyper.learning_rate);
  Rng eval_rng = rng.split("interaction.eval");

  DyadTrainReport report;
  double window_loss = 0.0;
  std::size_t window = 0;
  for (std::size_t it = 1; it <= iterations; ++it) {
    const RoundBatch rounds = sample_rounds(stimuli.space(), hyper.batch, rng);
    zero_grad(params);
    ad::Tape t;
    ad::Var loss;
    try {
      loss = game_loss(s, l, t, stimuli, rounds, hyper.gumbel, rng, options.ablate_channel);
      t.backward(loss);
    } catch (const NumericError& e) {
      throw NumericError("interaction_train: iteration " + std::to_string(it) + ": " + e.what());
    }
    opt.step(params);
    const double lv = loss.value().item();
    if (it == 1) report.initial_loss = lv;
    window_loss += lv;
    ++window;
    report.iterations = it;
    if (it % hyper.eval_every == 0 || it == iterations) {
      DyadCheckpoint cp{it, window_loss / static_cast<double>(window),
                        evaluate_success(s, l, stimuli, hyper.eval_rounds, eval_rng)};
      report.curve.push_back(cp);
      window_loss = 0.0;
      window = 0;
      if (options.on_checkpoint && !options.on_checkpoint(cp)) break;
    }
  }
  report.final_success = evaluate_success(s, l, stimuli, hyper.final_eval_rounds, eval_rng);
  return report;
}

}  // namespace emcom
