#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "emcom/autodiff.hpp"
#include "emcom/gumbel.hpp"
#include "emcom/meanings.hpp"
#include "emcom/nn.hpp"
#include "emcom/rng.hpp"

namespace emcom {

inline constexpr std::size_t kVocabSize = 10;
inline constexpr std::size_t kMessageLength = 2;

/// Two symbols from a 10-symbol alphabet, written as letters 'a'..'j'.
struct Message {
  std::array<std::size_t, kMessageLength> symbols{};

  friend bool operator==(const Message&, const Message&) = default;
  friend auto operator<=>(const Message&, const Message&) = default;

  bool valid() const {
    for (std::size_t s : symbols) {
      if (s >= kVocabSize) return false;
    }
    return true;
  }
};

inline constexpr std::string_view kAlphabet = "abcdefghij";

inline std::string to_string(const Message& m) {
  std::string s;
  for (std::size_t sym : m.symbols) s.push_back(kAlphabet.at(sym));
  return s;
}

inline Message parse_message(std::string_view s) {
  if (s.size() != kMessageLength) {
    throw std::invalid_argument("message: expected 2 symbols, got '" +
                                std::string(s) + "'");
  }
  Message m;
  for (std::size_t i = 0; i < kMessageLength; ++i) {
    const auto pos = kAlphabet.find(s[i]);
    if (pos == std::string_view::npos) {
      throw std::invalid_argument("message: symbol '" + std::string(1, s[i]) +
                                  "' outside the alphabet");
    }
    m.symbols[i] = pos;
  }
  return m;
}

inline std::size_t message_index(const Message& m) {
  return m.symbols[0] * kVocabSize + m.symbols[1];
}

struct AgentHyper {
  std::size_t embedding = 32;
  std::size_t hidden = 64;  // also the encoder feature width
  std::size_t bag_rounds = 5;

  friend bool operator==(const AgentHyper&, const AgentHyper&) = default;
};

enum class Role { speaker, listener };

inline std::string_view to_string(Role r) {
  return r == Role::speaker ? "speaker" : "listener";
}

/// Optional interception of per-step logits (greedy and sample modes).
using LogitHook = std::function<void(Tensor& logits)>;

// ---------------------------------------------------------------------------

/// Encoder -> GRU decoder unrolled for two steps -> 10-way output. The
/// encoder features are the decoder's initial state; step 2 consumes the
/// embedding of the step-1 symbol.
class Speaker {
 public:
  Speaker() = default;
  Speaker(Representation kind, const AgentHyper& hyper, std::uint64_t seed)
      : hyper_(hyper) {
    Rng rng(derive_seed(seed, "speaker.init"));
    encoder_ = nn::Encoder(kind, "speaker.encoder", hyper.hidden, hyper.bag_rounds, rng);
    cell_ = nn::GruCell("speaker.decoder.cell", hyper.embedding, hyper.hidden, rng);
    output_ = nn::Linear("speaker.decoder.output", hyper.hidden, kVocabSize, rng);
    symbol_embedding_ = nn::xavier("speaker.decoder.symbol_embedding",
                                   {kVocabSize, hyper.embedding}, kVocabSize,
                                   hyper.embedding, rng);
  }

  Representation kind() const { return encoder_.kind(); }
  const AgentHyper& hyper() const { return hyper_; }

  ad::Var features(ad::Tape& t, std::span<const EncodedInput> xs) const {
    return encoder_(t, xs);
  }

  ad::Var start_input(ad::Tape& t, std::size_t batch) const {
    return t.constant(Tensor({batch, hyper_.embedding}));
  }

  /// Advances the decoder one step; returns the step's logits [B, 10].
  ad::Var step(ad::Tape& t, const ad::Var& input, ad::Var& hidden) const {
    hidden = cell_(t, input, hidden);
    return output_(t, hidden);
  }

  ad::Var embed(ad::Tape& t, std::vector<std::size_t> symbols) const {
    return ad::gather_rows(t.param(symbol_embedding_), std::move(symbols));
  }

  /// Embedding of relaxed one-hot rows [B, 10].
  ad::Var embed_relaxed(ad::Tape& t, const ad::Var& one_hots) const {
    return ad::matmul(one_hots, t.param(symbol_embedding_));
  }

  template <class F> void visit(F&& f) {
    encoder_.visit(f); cell_.visit(f); output_.visit(f); f(symbol_embedding_);
  }
  template <class F> void visit(F&& f) const {
    encoder_.visit(f); cell_.visit(f); output_.visit(f); f(symbol_embedding_);
  }

 private:
  AgentHyper hyper_;
  nn::Encoder encoder_;
  nn::GruCell cell_;
  nn::Linear output_;
  ad::Parameter symbol_embedding_;
};

/// GRU message reader plus an independent candidate encoder; candidates are
/// scored by the dot product of their features with the message embedding.
class Listener {
 public:
  Listener() = default;
  Listener(Representation kind, const AgentHyper& hyper, std::uint64_t seed)
      : hyper_(hyper) {
    Rng rng(derive_seed(seed, "listener.init"));
    encoder_ = nn::Encoder(kind, "listener.encoder", hyper.hidden, hyper.bag_rounds, rng);
    symbol_embedding_ = nn::xavier("listener.reader.symbol_embedding",
                                   {kVocabSize, hyper.embedding}, kVocabSize,
                                   hyper.embedding, rng);
    cell_ = nn::GruCell("listener.reader.cell", hyper.embedding, hyper.hidden, rng);
    projection_ = nn::Linear("listener.reader.projection", hyper.hidden, hyper.hidden, rng);
  }

  Representation kind() const { return encoder_.kind(); }
  const AgentHyper& hyper() const { return hyper_; }

  /// Message embedding [B, H] from per-position (relaxed) one-hots [B, 10].
  ad::Var read(ad::Tape& t, std::span<const ad::Var> positions) const {
    const std::size_t batch = positions.front().shape()[0];
    ad::Var hidden = t.constant(Tensor({batch, hyper_.hidden}));
    const ad::Var table = t.param(symbol_embedding_);
    for (const ad::Var& y : positions) {
      hidden = cell_(t, ad::matmul(y, table), hidden);
    }
    return projection_(t, hidden);
  }

  ad::Var candidate_features(ad::Tape& t, std::span<const EncodedInput> xs) const {
    return encoder_(t, xs);
  }

  template <class F> void visit(F&& f) {
    encoder_.visit(f); f(symbol_embedding_); cell_.visit(f); projection_.visit(f);
  }
  template <class F> void visit(F&& f) const {
    encoder_.visit(f); f(symbol_embedding_); cell_.visit(f); projection_.visit(f);
  }

 private:
  AgentHyper hyper_;
  nn::Encoder encoder_;
  ad::Parameter symbol_embedding_;
  nn::GruCell cell_;
  nn::Linear projection_;
};

inline Speaker init_speaker(Representation kind, const AgentHyper& hyper,
                            std::uint64_t seed) {
  return Speaker(kind, hyper, seed);
}

inline Listener init_listener(Representation kind, const AgentHyper& hyper,
                              std::uint64_t seed) {
  return Listener(kind, hyper, seed);
}

/// One-hot rows [B, 10] for symbol indices.
inline Tensor one_hot_rows(std::span<const std::size_t> symbols) {
  Tensor t({symbols.size(), kVocabSize});
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] >= kVocabSize) throw std::out_of_range("symbol outside alphabet");
    t[i * kVocabSize + symbols[i]] = 1.0;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Speaking

/// Relaxed two-position message with the straight-through symbol choices.
struct RelaxedMessages {
  std::array<ad::Var, kMessageLength> positions;
  std::vector<Message> symbols;
};

struct GumbelConfig {
  double temperature = 1.0;
  bool hard = true;
  GumbelNoise noise = GumbelNoise::sampled;
};

/// Differentiable speaking through the Gumbel-softmax channel.
inline RelaxedMessages speak_gumbel(const Speaker& s, ad::Tape& t,
                                    const ad::Var& features,
                                    const GumbelConfig& cfg, Rng& rng) {
  const std::size_t batch = features.shape()[0];
  RelaxedMessages out;
  out.symbols.resize(batch);
  ad::Var hidden = features;
  ad::Var input = s.start_input(t, batch);
  for (std::size_t pos = 0; pos < kMessageLength; ++pos) {
    const ad::Var logits = s.step(t, input, hidden);
    GumbelSample g = gumbel_softmax_sample(logits, cfg.temperature, cfg.hard, rng, cfg.noise);
    for (std::size_t i = 0; i < batch; ++i) out.symbols[i].symbols[pos] = g.index[i];
    out.positions[pos] = g.output;
    if (pos + 1 < kMessageLength) input = s.embed_relaxed(t, g.output);
  }
  return out;
}

/// Per-position logits under teacher forcing on `targets`.
inline std::array<ad::Var, kMessageLength> speaker_logits(
    const Speaker& s, ad::Tape& t, const ad::Var& features,
    std::span<const Message> targets) {
  const std::size_t batch = features.shape()[0];
  if (targets.size() != batch) {
    throw std::invalid_argument("speaker_logits: target count differs from batch");
  }
  std::array<ad::Var, kMessageLength> logits;
  ad::Var hidden = features;
  ad::Var input = s.start_input(t, batch);
  for (std::size_t pos = 0; pos < kMessageLength; ++pos) {
    logits[pos] = s.step(t, input, hidden);
    if (pos + 1 < kMessageLength) {
      std::vector<std::size_t> prev(batch);
      for (std::size_t i = 0; i < batch; ++i) prev[i] = targets[i].symbols[pos];
      input = s.embed(t, std::move(prev));
    }
  }
  return logits;
}

enum class DecodeMode { greedy, sample };

/// Autoregressive decoding without gradients. Greedy ties go to the lowest
/// symbol index; sample draws each symbol from the step's softmax.
inline std::vector<Message> decode(const Speaker& s, std::span<const EncodedInput> xs,
                                   DecodeMode mode, Rng* rng = nullptr,
                                   const LogitHook& hook = {}) {
  if (mode == DecodeMode::sample && !rng) {
    throw std::invalid_argument("decode: sample mode needs an rng");
  }
  ad::Tape t;
  const std::size_t batch = xs.size();
  std::vector<Message> out(batch);
  ad::Var hidden = s.features(t, xs);
  ad::Var input = s.start_input(t, batch);
  for (std::size_t pos = 0; pos < kMessageLength; ++pos) {
    Tensor logits = s.step(t, input, hidden).value();
    if (hook) hook(logits);
    const Tensor probs = ad::softmax_rows_value(logits);
    std::vector<std::size_t> chosen(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      if (mode == DecodeMode::greedy) {
        chosen[i] = argmax_row(logits, i);
      } else {
        chosen[i] = rng->categorical(std::span<const double>(
            probs.data() + i * kVocabSize, kVocabSize));
      }
      out[i].symbols[pos] = chosen[i];
    }
    if (pos + 1 < kMessageLength) input = s.embed(t, std::move(chosen));
  }
  return out;
}

inline std::vector<Message> speak_greedy(const Speaker& s,
                                         std::span<const EncodedInput> xs) {
  return decode(s, xs, DecodeMode::greedy);
}

inline std::vector<Message> speak_sample(const Speaker& s,
                                         std::span<const EncodedInput> xs,
                                         Rng& rng, const LogitHook& hook = {}) {
  return decode(s, xs, DecodeMode::sample, &rng, hook);
}

/// Full message distribution per input: row i holds p(m | x_i) for all 100
/// messages, indexed by message_index().
inline std::vector<std::array<double, kVocabSize * kVocabSize>>
message_distributions(const Speaker& s, std::span<const EncodedInput> xs,
                      const LogitHook& hook = {}) {
  ad::Tape t;
  const std::size_t batch = xs.size();
  const ad::Var features = s.features(t, xs);
  ad::Var hidden = features;
  Tensor first = s.step(t, s.start_input(t, batch), hidden).value();
  if (hook) hook(first);
  const Tensor p1 = ad::softmax_rows_value(first);

  // Second step for every (input, first symbol) combination.
  std::vector<std::size_t> rows, symbols;
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t a = 0; a < kVocabSize; ++a) {
      rows.push_back(i);
      symbols.push_back(a);
    }
  }
  ad::Var hidden2 = ad::gather_rows(hidden, rows);
  Tensor second = s.step(t, s.embed(t, symbols), hidden2).value();
  if (hook) hook(second);
  const Tensor p2 = ad::softmax_rows_value(second);

  std::vector<std::array<double, kVocabSize * kVocabSize>> out(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t a = 0; a < kVocabSize; ++a) {
      for (std::size_t b = 0; b < kVocabSize; ++b) {
        out[i][a * kVocabSize + b] = p1[i * kVocabSize + a] *
                                     p2[(i * kVocabSize + a) * kVocabSize + b];
      }
    }
  }
  return out;
}

enum class SpeakMode { greedy, sample, gumbel };

/// Single-input speaking in any mode. Gumbel mode returns the
/// straight-through symbol choices of the relaxed message.
inline Message speak(const Speaker& s, const EncodedInput& x, SpeakMode mode,
                     Rng* rng = nullptr, const GumbelConfig& gumbel = {}) {
  const std::span<const EncodedInput> one(&x, 1);
  switch (mode) {
    case SpeakMode::greedy: return speak_greedy(s, one).front();
    case SpeakMode::sample:
      if (!rng) throw std::invalid_argument("speak: sample mode needs an rng");
      return speak_sample(s, one, *rng).front();
    case SpeakMode::gumbel: {
      if (!rng) throw std::invalid_argument("speak: gumbel mode needs an rng");
      ad::Tape t;
      return speak_gumbel(s, t, s.features(t, one), gumbel, *rng).symbols.front();
    }
  }
  throw std::logic_error("speak: unknown mode");
}

// ---------------------------------------------------------------------------
// Listening

/// Scores [B, 15]: message embedding [B, H] against the features of each
/// round's candidates. `pool` holds features [S, H] for a pool of inputs and
/// `candidates` the pool row of every candidate, 15 per round.
inline ad::Var candidate_scores(const ad::Var& message_embedding,
                                const ad::Var& pool,
                                std::vector<std::size_t> candidates) {
  return ad::gather_per_row(ad::matmul_nt(message_embedding, pool),
                            std::move(candidates), kNumCandidates);
}

/// Probability over the 15 candidates for one message.
inline std::vector<double> listen(const Listener& l, const Message& m,
                                  std::span<const EncodedInput> candidates) {
  if (candidates.size() != kNumCandidates) {
    throw std::invalid_argument("listen: expected 15 candidates, got " +
                                std::to_string(candidates.size()));
  }
  ad::Tape t;
  std::array<ad::Var, kMessageLength> positions;
  for (std::size_t p = 0; p < kMessageLength; ++p) {
    const std::size_t sym = m.symbols[p];
    positions[p] = t.constant(one_hot_rows(std::span<const std::size_t>(&sym, 1)));
  }
  const ad::Var msg = l.read(t, positions);
  std::vector<std::size_t> idx(kNumCandidates);
  for (std::size_t i = 0; i < kNumCandidates; ++i) idx[i] = i;
  const ad::Var probs = ad::softmax(
      candidate_scores(msg, l.candidate_features(t, candidates), std::move(idx)));
  const auto v = probs.value().values();
  return {v.begin(), v.end()};
}

}  // namespace emcom
