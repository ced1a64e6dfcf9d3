#include <catch_amalgamated.hpp>

#include <map>

#include "emcom/checkpoint.hpp"
#include "emcom/illearn.hpp"

using namespace emcom;

namespace {

const AgentHyper kSmall{16, 32, 2};

TrainHyper quick_train() {
  TrainHyper h;
  h.eval_every = 25;
  h.eval_rounds = 100;
  h.final_eval_rounds = 200;
  return h;
}

}  // namespace

TEST_CASE("transmission datasets are balanced over the space") {
  for (Representation kind : {Representation::concatenation, Representation::bag,
                              Representation::image}) {
    const Stimuli stimuli{MeaningSpace(kind)};
    const Speaker s(kind, kSmall, 2);
    Rng rng(7);
    const TransmissionDataset d = transmission_phase(s, stimuli, rng, 1);
    CHECK(d.size() == kTransmissionPairs);
    CHECK(d.kind == kind);
    CHECK(covers_space(d, stimuli.space()));
    std::map<std::size_t, std::size_t> per_meaning;
    for (const LabeledPair& p : d.pairs) {
      CHECK(p.message.valid());
      ++per_meaning[stimuli.space().index_of(p.meaning)];
    }
    const std::size_t lo = kTransmissionPairs / stimuli.space().size();
    for (const auto& [m, n] : per_meaning) {
      CHECK(n >= lo);
      CHECK(n <= lo + 1);
    }
    Rng again(7);
    const TransmissionDataset e = transmission_phase(s, stimuli, again, 1);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.pairs[i].message == e.pairs[i].message);
  }
}

TEST_CASE("a language dataset repeats its language") {
  const Language lang = compositional_language(MeaningSpace(Representation::bag));
  const TransmissionDataset d = language_dataset(lang);
  CHECK(d.size() == kTransmissionPairs);
  for (const LabeledPair& p : d.pairs) CHECK(p.message == lang[lang.space().index_of(p.meaning)]);
  TransmissionDataset partial = d;
  partial.pairs.resize(10);
  CHECK_FALSE(covers_space(partial, lang.space()));
}

TEST_CASE("learning phase") {
  const Stimuli stimuli{MeaningSpace(Representation::concatenation)};
  const TrainHyper hyper = quick_train();
  Speaker s(Representation::concatenation, kSmall, 3);
  Rng rng(1);

  SECTION("rejects an empty dataset") {
    CHECK_THROWS_AS(learning_phase(s, stimuli, TransmissionDataset{}, 10, hyper, rng),
                    std::invalid_argument);
  }
  SECTION("zero iterations leave the speaker unchanged") {
    const Speaker before = s;
    learning_phase(s, stimuli, language_dataset(compositional_language(stimuli.space())), 0,
                   hyper, rng);
    CHECK(dyad_to_json(s, Listener(Representation::concatenation, kSmall, 0)) ==
          dyad_to_json(before, Listener(Representation::concatenation, kSmall, 0)));
  }
  SECTION("a speaker fits a single labelled meaning") {
    TransmissionDataset d;
    d.pairs.assign(kTransmissionPairs, LabeledPair{{2, 3}, parse_message("hj")});
    learning_phase(s, stimuli, d, 300, hyper, rng);
    Rng render(0);
    CHECK(speak(s, stimuli.encode({2, 3}, render), SpeakMode::greedy) == parse_message("hj"));
  }
  SECTION("a speaker learns the compositional language") {
    const Language comp = compositional_language(stimuli.space());
    learning_phase(s, stimuli, language_dataset(comp), 1500, hyper, rng);
    CHECK(speaker_accuracy(s, stimuli, comp).sequence == 1.0);
  }
}

TEST_CASE("speaker accuracy counts whole messages and symbols") {
  const MeaningSpace space(Representation::concatenation);
  const Stimuli stimuli{space};
  const Speaker s(Representation::concatenation, kSmall, 4);
  const Language produced = extract_language(s, stimuli, 0);
  const SpeakerAccuracy self = speaker_accuracy(s, stimuli, produced, 0);
  CHECK(self.sequence == 1.0);
  CHECK(self.token == 1.0);

  std::vector<Message> half = produced.messages();
  for (Message& m : half) m.symbols[1] = (m.symbols[1] + 1) % kVocabSize;
  const SpeakerAccuracy a = speaker_accuracy(s, stimuli, Language(space, half), 0);
  CHECK(a.sequence == 0.0);
  CHECK(a.token == 0.5);
}

TEST_CASE("speaker learning curves") {
  const Stimuli stimuli{MeaningSpace(Representation::concatenation)};
  LearnabilityHyper lh;
  lh.max_iterations = 60;
  lh.checkpoint_every = 20;
  const Language comp = compositional_language(stimuli.space());
  const auto [seq, tok] = train_speaker_on_language(comp, stimuli, kSmall, quick_train(), lh, 5);
  REQUIRE(seq.points.size() == 4);
  REQUIRE(tok.points.size() == 4);
  for (std::size_t i = 0; i < seq.points.size(); ++i) {
    CHECK(seq.points[i].iteration == 20 * i);
    CHECK(tok.points[i].iteration == 20 * i);
    CHECK(seq.points[i].value <= tok.points[i].value);
  }
  const auto again = train_speaker_on_language(comp, stimuli, kSmall, quick_train(), lh, 5);
  for (std::size_t i = 0; i < seq.points.size(); ++i) CHECK(again.first.points[i].value == seq.points[i].value);

  lh.checkpoint_every = 0;
  CHECK_THROWS_AS(train_speaker_on_language(comp, stimuli, kSmall, quick_train(), lh, 5),
                  std::invalid_argument);
  const Language bag = compositional_language(MeaningSpace(Representation::bag));
  lh.checkpoint_every = 5;
  CHECK_THROWS_AS(train_speaker_on_language(bag, stimuli, kSmall, quick_train(), lh, 5),
                  std::invalid_argument);
}

TEST_CASE("untrained listeners sit at chance") {
  const Stimuli stimuli{MeaningSpace(Representation::concatenation)};
  const Language comp = compositional_language(stimuli.space());
  double sum = 0.0;
  constexpr int kListeners = 10;
  for (int k = 0; k < kListeners; ++k) {
    const Listener l(Representation::concatenation, AgentHyper{}, 100 + k);
    Rng rng(k);
    sum += listener_accuracy(l, stimuli, comp, 1000, rng);
  }
  CHECK(std::abs(sum / kListeners - 1.0 / 15.0) < 0.03);
}

TEST_CASE("a listener cannot exceed chance on a constant language") {
  const MeaningSpace space(Representation::concatenation);
  const Stimuli stimuli{space};
  const Language constant(space, std::vector<Message>(space.size(), parse_message("ee")));
  LearnabilityHyper lh;
  lh.max_iterations = 150;
  lh.checkpoint_every = 50;
  lh.listener_eval_rounds = 1000;
  const LearningCurve c = train_listener_on_language(constant, stimuli, kSmall, quick_train(), lh, 2);
  REQUIRE(c.points.size() == 4);
  for (const CurvePoint& p : c.points) CHECK(p.value < 0.15);

  const Language comp = compositional_language(space);
  const LearningCurve learnt = train_listener_on_language(comp, stimuli, kSmall, quick_train(), lh, 2);
  CHECK(learnt.points.back().value > 0.5);
}

TEST_CASE("aggregation across seeds") {
  const std::vector<LearningCurve> curves{
      {CurveMetric::listener_accuracy, {{0, 0.0}, {10, 1.0}}},
      {CurveMetric::listener_accuracy, {{0, 1.0}, {10, 1.0}}},
  };
  const auto agg = aggregate(curves);
  REQUIRE(agg.size() == 2);
  CHECK(agg[0].mean == 0.5);
  CHECK(agg[0].std == 0.5);
  CHECK(agg[1].mean == 1.0);
  CHECK(agg[1].std == 0.0);
  CHECK(first_crossing(std::span<const AggregatePoint>(agg), 0.95) == 10u);
  CHECK(first_crossing(std::span<const AggregatePoint>(agg), 0.5) == 0u);
  CHECK_FALSE(first_crossing(std::span<const CurvePoint>(curves[0].points), 1.5).has_value());

  std::vector<LearningCurve> ragged = curves;
  ragged[1].points.pop_back();
  CHECK_THROWS_AS(aggregate(ragged), std::invalid_argument);
  std::vector<LearningCurve> shifted = curves;
  shifted[1].points[1].iteration = 11;
  CHECK_THROWS_AS(aggregate(shifted), std::invalid_argument);
  CHECK_THROWS_AS(aggregate(std::vector<LearningCurve>{}), std::invalid_argument);
}

TEST_CASE("learnability languages") {
  const MeaningSpace space(Representation::concatenation);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Language comp = learnability_language(LanguageKind::compositional, space, seed, nullptr);
    const Language hol = learnability_language(LanguageKind::holistic, space, seed, nullptr);
    CHECK(comp == learnability_language(LanguageKind::compositional, space, seed, nullptr));
    CHECK(*topological_similarity(comp).rho == 1.0);
    CHECK(hol.injective());
    auto a = comp.messages(), b = hol.messages();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
  CHECK_THROWS_AS(learnability_language(LanguageKind::emergent, space, 0, nullptr),
                  std::invalid_argument);
  const Language bag = compositional_language(MeaningSpace(Representation::bag));
  CHECK_THROWS_AS(learnability_language(LanguageKind::emergent, space, 0, &bag),
                  std::invalid_argument);
  CHECK(parse_language_kind("holistic") == LanguageKind::holistic);
  CHECK_FALSE(parse_language_kind("random").has_value());
}

TEST_CASE("learning calibration") {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  CalibrationOptions opts;
  opts.streak = 10;
  opts.cap = 3000;
  std::vector<std::size_t> per_seed;
  const std::size_t n = calibrate_learning_iterations(Representation::concatenation, seeds, kSmall,
                                                      quick_train(), opts, &per_seed);
  REQUIRE(per_seed.size() == 3);
  CHECK(n % opts.round_to == 0);
  CHECK(n >= *std::max_element(per_seed.begin(), per_seed.end()));
  CHECK(n < *std::max_element(per_seed.begin(), per_seed.end()) + opts.round_to);
  CHECK_THROWS_AS(calibrate_learning_iterations(Representation::concatenation,
                                                std::vector<std::uint64_t>{1, 2}, kSmall,
                                                quick_train(), opts),
                  std::invalid_argument);
  opts.cap = 5;
  CHECK_THROWS_AS(calibrate_learning_iterations(Representation::concatenation, seeds, kSmall,
                                                quick_train(), opts),
                  std::runtime_error);
}

TEST_CASE("chains") {
  ChainConfig cfg;
  cfg.agent = kSmall;
  cfg.train = quick_train();
  cfg.generations = 2;
  cfg.seed = 11;
  cfg.learning_iterations = 50;
  cfg.interaction_iterations = 50;
  cfg.n_samples = 20;

  SECTION("records every generation and is reproducible") {
    std::vector<std::size_t> seen;
    const auto a = run_chain(cfg, [&](const GenerationRecord& r) { seen.push_back(r.generation); });
    const auto b = run_chain(cfg);
    REQUIRE(a.size() == 2);
    CHECK(seen == std::vector<std::size_t>{1, 2});
    for (std::size_t g = 0; g < 2; ++g) {
      CHECK(a[g].generation == g + 1);
      CHECK(a[g].language == b[g].language);
      CHECK(a[g].p_high_comp == b[g].p_high_comp);
      CHECK(a[g].success_rate == b[g].success_rate);
      CHECK(a[g].dataset.size() == kTransmissionPairs);
    }
  }
  SECTION("a single generation skips learning") {
    cfg.generations = 1;
    cfg.learning_iterations = 0;
    CHECK(run_chain(cfg).size() == 1);
  }
  SECTION("invalid budgets") {
    cfg.generations = 0;
    CHECK_THROWS_AS(run_chain(cfg), std::invalid_argument);
    cfg.generations = 2;
    cfg.learning_iterations = 0;
    CHECK_THROWS_AS(run_chain(cfg), std::invalid_argument);
  }
  SECTION("a diverging run aborts with the completed generations") {
    cfg.train.learning_rate = 1e300;
    try {
      run_chain(cfg);
      FAIL("expected ChainAborted");
    } catch (const ChainAborted& e) {
      CHECK(e.partial().empty());
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("generation 1"));
    }
  }
}
