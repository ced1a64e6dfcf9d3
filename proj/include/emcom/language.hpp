#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emcom/agents.hpp"
#include "emcom/meanings.hpp"
#include "emcom/rng.hpp"

namespace emcom {

/// Total map from every meaning of a space to a message, stored in space order.
class Language {
 public:
  Language(MeaningSpace space, std::vector<Message> messages)
      : space_(std::move(space)), messages_(std::move(messages)) {
    if (messages_.size() != space_.size()) {
      throw std::invalid_argument("language: " + std::to_string(messages_.size()) +
                                  " messages for " + std::to_string(space_.size()) +
                                  " meanings");
    }
    for (const Message& m : messages_) {
      if (!m.valid()) throw std::invalid_argument("language: symbol outside alphabet");
    }
  }

  const MeaningSpace& space() const { return space_; }
  const std::vector<Message>& messages() const { return messages_; }
  std::size_t size() const { return messages_.size(); }

  const Message& operator[](std::size_t i) const { return messages_[i]; }
  const Message& operator()(const Meaning& m) const {
    return messages_[space_.index_of(m)];
  }

  bool injective() const {
    return std::set<Message>(messages_.begin(), messages_.end()).size() ==
           messages_.size();
  }

  friend bool operator==(const Language& a, const Language& b) {
    return a.space_.kind() == b.space_.kind() && a.messages_ == b.messages_;
  }

 private:
  MeaningSpace space_;
  std::vector<Message> messages_;
};

// ---------------------------------------------------------------------------
// Generators

/// Symbol used for each count value, per message position.
struct SymbolAssignment {
  std::array<std::size_t, kCountValues> first{0, 1, 2, 3, 4, 5};
  std::array<std::size_t, kCountValues> second{0, 1, 2, 3, 4, 5};
};

/// message(a, b) = [first[a], second[b]].
inline Language compositional_language(const MeaningSpace& space,
                                       const SymbolAssignment& assign = {}) {
  for (const auto* pos : {&assign.first, &assign.second}) {
    std::set<std::size_t> seen;
    for (std::size_t s : *pos) {
      if (s >= kVocabSize) {
        throw std::invalid_argument("compositional_language: symbol outside alphabet");
      }
      if (!seen.insert(s).second) {
        throw std::invalid_argument("compositional_language: assignment is not injective");
      }
    }
  }
  std::vector<Message> msgs;
  msgs.reserve(space.size());
  for (const Meaning& m : space) {
    msgs.push_back(Message{{assign.first[static_cast<std::size_t>(m.count_a)],
                            assign.second[static_cast<std::size_t>(m.count_b)]}});
  }
  return Language(space, std::move(msgs));
}

/// Same messages as `comp`, reassigned to meanings by a random permutation.
inline Language holistic_language(const Language& comp, Rng& rng) {
  std::vector<Message> msgs = comp.messages();
  if (std::set<Message>(msgs.begin(), msgs.end()).size() < 2) return comp;
  do {
    rng.shuffle(msgs);
  } while (msgs == comp.messages());
  return Language(comp.space(), std::move(msgs));
}

/// Mode language: the greedy message for every meaning. Images are rendered
/// with a fixed evaluation seed so extraction is repeatable.
inline Language extract_language(const Speaker& s, const Stimuli& stimuli,
                                 std::uint64_t eval_seed = 0) {
  Rng render(derive_seed(eval_seed, "extract.render"));
  return Language(stimuli.space(), speak_greedy(s, stimuli.encode_all(render)));
}

using MessageDistribution = std::array<double, kVocabSize * kVocabSize>;

/// Per-meaning message distributions of a speaker, in space order.
inline std::vector<MessageDistribution> language_distributions(
    const Speaker& s, const Stimuli& stimuli, std::uint64_t eval_seed = 0,
    const LogitHook& hook = {}) {
  Rng render(derive_seed(eval_seed, "extract.render"));
  return message_distributions(s, stimuli.encode_all(render), hook);
}

inline Message message_from_index(std::size_t i) {
  return Message{{i / kVocabSize, i % kVocabSize}};
}

/// Draws one message per meaning from precomputed distributions.
inline Language sample_language(const MeaningSpace& space,
                                std::span<const MessageDistribution> dists,
                                Rng& rng) {
  if (dists.size() != space.size()) {
    throw std::invalid_argument("sample_language: distribution count differs from space");
  }
  std::vector<Message> msgs;
  msgs.reserve(dists.size());
  for (const auto& d : dists) msgs.push_back(message_from_index(rng.categorical(d)));
  return Language(space, std::move(msgs));
}

inline Language sample_language(const Speaker& s, const Stimuli& stimuli, Rng& rng,
                                std::uint64_t eval_seed = 0) {
  const auto dists = language_distributions(s, stimuli, eval_seed);
  return sample_language(stimuli.space(), dists, rng);
}

// ---------------------------------------------------------------------------
// Distances

inline int hamming(const Meaning& x, const Meaning& y) {
  return (x.count_a != y.count_a) + (x.count_b != y.count_b);
}

/// Levenshtein distance with unit costs.
inline std::size_t edit_distance(std::span<const std::size_t> x,
                                 std::span<const std::size_t> y) {
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] != y[j - 1]);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

inline std::size_t edit_distance(const Message& x, const Message& y) {
  return edit_distance(std::span<const std::size_t>(x.symbols),
                       std::span<const std::size_t>(y.symbols));
}

// ---------------------------------------------------------------------------
// Topological similarity

enum class Correlation { pearson, spearman };

struct TopoSimResult {
  std::optional<double> rho;  // empty when either distance list is constant
  std::size_t n_pairs = 0;

  bool degenerate() const { return !rho.has_value(); }
};

namespace detail {

/// Pearson correlation of integer sequences, evaluated in exact integer
/// arithmetic up to the final division.
inline std::optional<double> pearson_exact(std::span<const std::int64_t> x,
                                           std::span<const std::int64_t> y) {
  const auto n = static_cast<std::int64_t>(x.size());
  std::int64_t sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const std::int64_t vx = n * sxx - sx * sx;
  const std::int64_t vy = n * syy - sy * sy;
  if (vx == 0 || vy == 0) return std::nullopt;
  const std::int64_t cov = n * sxy - sx * sy;
  const long double denom = std::sqrt(static_cast<long double>(vx)) *
                            std::sqrt(static_cast<long double>(vy));
  if (vx == vy) {
    return static_cast<double>(static_cast<long double>(cov) /
                               static_cast<long double>(vx));
  }
  return static_cast<double>(static_cast<long double>(cov) / denom);
}

/// Doubled average ranks (ties share the mean rank), kept integral.
inline std::vector<std::int64_t> doubled_ranks(std::span<const std::int64_t> v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<std::int64_t> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    // ranks i+1 .. j averaged, doubled: (i+1 + j)
    const auto r = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = r;
    i = j;
  }
  return rank;
}

}  // namespace detail

/// Correlation between pairwise meaning Hamming distances and pairwise
/// message edit distances over all unordered meaning pairs.
inline TopoSimResult topological_similarity(const Language& lang,
                                            Correlation kind = Correlation::pearson) {
  const MeaningSpace& space = lang.space();
  std::vector<std::int64_t> dm, dx;
  const std::size_t n = space.size();
  dm.reserve(n * (n - 1) / 2);
  dx.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dm.push_back(hamming(space[i], space[j]));
      dx.push_back(static_cast<std::int64_t>(edit_distance(lang[i], lang[j])));
    }
  }
  TopoSimResult r;
  r.n_pairs = dm.size();
  if (kind == Correlation::spearman) {
    r.rho = detail::pearson_exact(detail::doubled_ranks(dm), detail::doubled_ranks(dx));
  } else {
    r.rho = detail::pearson_exact(dm, dx);
  }
  return r;
}

/// Fraction of languages sampled from the speaker whose rho exceeds the
/// threshold; degenerate samples count as not high.
inline double posterior_high_comp(const Speaker& s, const Stimuli& stimuli,
                                  std::size_t n_samples, double threshold, Rng& rng,
                                  Correlation kind = Correlation::pearson,
                                  std::uint64_t eval_seed = 0,
                                  const LogitHook& hook = {}) {
  if (n_samples == 0) throw std::invalid_argument("posterior_high_comp: n_samples must be >= 1");
  const auto dists = language_distributions(s, stimuli, eval_seed, hook);
  std::size_t high = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const TopoSimResult r =
        topological_similarity(sample_language(stimuli.space(), dists, rng), kind);
    high += r.rho.has_value() && *r.rho > threshold;
  }
  return static_cast<double>(high) / static_cast<double>(n_samples);
}

// ---------------------------------------------------------------------------
// JSON dump

inline nlohmann::json language_to_json(const Language& lang) {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < lang.size(); ++i) {
    entries.push_back({{"meaning", to_string(lang.space()[i])},
                       {"message", to_string(lang[i])}});
  }
  return {{"alphabet", std::string(kAlphabet)},
          {"representation", std::string(to_string(lang.space().kind()))},
          {"language", std::move(entries)}};
}

inline Language language_from_json(const nlohmann::json& j) {
  if (j.contains("alphabet") && j.at("alphabet").get<std::string>() != kAlphabet) {
    throw std::invalid_argument("language dump: unsupported alphabet");
  }
  const nlohmann::json& entries = j.is_array() ? j : j.at("language");
  std::map<Meaning, Message> mapping;
  for (const auto& e : entries) {
    const Meaning m = parse_meaning(e.at("meaning").get<std::string>());
    if (!mapping.emplace(m, parse_message(e.at("message").get<std::string>())).second) {
      throw std::invalid_argument("language dump: duplicate meaning " + to_string(m));
    }
  }
  Representation kind = mapping.size() == MeaningSpace(Representation::bag).size()
                            ? Representation::bag
                            : Representation::concatenation;
  if (j.is_object() && j.contains("representation")) {
    const auto parsed = parse_representation(j.at("representation").get<std::string>());
    if (!parsed) throw std::invalid_argument("language dump: unknown representation");
    kind = *parsed;
  }
  MeaningSpace space(kind);
  std::vector<Message> msgs;
  for (const Meaning& m : space) {
    const auto it = mapping.find(m);
    if (it == mapping.end()) {
      throw std::invalid_argument("language dump: no message for " + to_string(m));
    }
    msgs.push_back(it->second);
  }
  if (mapping.size() != space.size()) {
    throw std::invalid_argument("language dump: entries outside the meaning space");
  }
  return Language(std::move(space), std::move(msgs));
}

inline void write_language(const std::string& path, const Language& lang) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << language_to_json(lang).dump(2) << '\n';
}

inline Language read_language(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return language_from_json(nlohmann::json::parse(in));
}

}  // namespace emcom
