#include <catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "emcom/agents.hpp"
#include "emcom/checkpoint.hpp"
#include "emcom/game.hpp"
#include "emcom/language.hpp"
#include "gradcheck.hpp"

using namespace emcom;
using Catch::Approx;

TEST_CASE("messages print and parse as two letters") {
  CHECK(to_string(Message{{2, 3}}) == "cd");
  CHECK(parse_message("cd") == Message{{2, 3}});
  CHECK_THROWS_AS(parse_message("c"), std::invalid_argument);
  CHECK_THROWS_AS(parse_message("ck"), std::invalid_argument);
  for (std::size_t i = 0; i < 100; ++i) {
    const Message m = message_from_index(i);
    CHECK(message_index(m) == i);
    CHECK(parse_message(to_string(m)) == m);
  }
}

TEST_CASE("agent graphs pass the finite-difference oracle") {
  for (Representation kind : {Representation::concatenation, Representation::bag,
                              Representation::image}) {
    const std::size_t per_param = kind == Representation::image ? 12 : 0;
    for (const auto& c : emcom::testing::agent_grad_checks(kind, 21, per_param)) {
      INFO(to_string(kind) << " " << c.graph << " worst " << c.result.worst_tensor);
      CHECK(c.result.checked > 0);
      CHECK(c.result.max_tensor_rel_error < 1e-4);
    }
  }
}

TEST_CASE("speaker and listener output shapes") {
  const AgentHyper hyper{8, 12, 2};
  for (Representation kind : {Representation::concatenation, Representation::bag,
                              Representation::image}) {
    const Stimuli stimuli{MeaningSpace(kind)};
    Speaker s(kind, hyper, 1);
    Listener l(kind, hyper, 2);
    Rng rng(3);
    const auto view = stimuli.encode_all(rng);
    const auto msgs = speak_greedy(s, view);
    CHECK(msgs.size() == stimuli.space().size());
    for (const Message& m : msgs) CHECK(m.valid());

    const std::vector<EncodedInput> cands(view.begin(), view.begin() + 15);
    const auto p = listen(l, msgs.front(), cands);
    REQUIRE(p.size() == 15);
    double total = 0.0;
    for (double v : p) total += v;
    CHECK(total == Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(listen(l, msgs.front(), std::span(view.begin(), 14)), std::invalid_argument);
  }
}

TEST_CASE("speaking modes") {
  const Stimuli stimuli{MeaningSpace(Representation::concatenation)};
  Speaker s(Representation::concatenation, AgentHyper{}, 4);
  Rng render(0);
  const EncodedInput x = stimuli.encode({1, 4}, render);
  CHECK(speak(s, x, SpeakMode::greedy) == speak(s, x, SpeakMode::greedy));
  CHECK_THROWS_AS(speak(s, x, SpeakMode::sample), std::invalid_argument);
  Rng rng(5);
  CHECK(speak(s, x, SpeakMode::sample, &rng).valid());
  CHECK(speak(s, x, SpeakMode::gumbel, &rng).valid());
}

TEST_CASE("a uniform-logit speaker almost never repeats a whole language") {
  const Stimuli stimuli{MeaningSpace(Representation::concatenation)};
  Speaker s(Representation::concatenation, AgentHyper{}, 4);
  const LogitHook flat = [](Tensor& logits) { logits.fill(0.0); };
  Rng rng(6);
  const auto view = stimuli.encode_all(rng);
  int identical = 0;
  for (int k = 0; k < 50; ++k) {
    identical += speak_sample(s, view, rng, flat) == speak_sample(s, view, rng, flat);
  }
  CHECK(identical == 0);
}

TEST_CASE("sampled messages follow the speaker's distribution") {
  const Stimuli stimuli{MeaningSpace(Representation::concatenation)};
  Speaker s(Representation::concatenation, AgentHyper{}, 8);
  Rng rng(9);
  const auto view = stimuli.encode_all(rng);
  const std::vector<EncodedInput> one{view[13]};
  const auto dist = message_distributions(s, one).front();
  double total = 0.0;
  for (double p : dist) total += p;
  CHECK(total == Approx(1.0).epsilon(1e-12));

  constexpr int kSamples = 10000;
  std::vector<int> count(100, 0);
  const std::vector<EncodedInput> batch(kSamples, view[13]);
  for (const Message& m : speak_sample(s, batch, rng)) ++count[message_index(m)];
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(std::abs(count[i] / double(kSamples) - dist[i]) < 0.02);
  }
}

TEST_CASE("the set encoder ignores token order") {
  const MeaningSpace space(Representation::bag);
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    Rng init(draw);
    const nn::BagEncoder enc("bag", 9, 4, init);
    Rng rng(100 + draw);
    for (const Meaning& m : space) {
      const Bag base = encode_bag(m);
      ad::Tape t0;
      const std::vector<EncodedInput> x0{base};
      const Tensor ref = enc(t0, x0).value();
      for (int k = 0; k < 100; ++k) {
        Bag shuffled = base;
        rng.shuffle(shuffled.tokens);
        ad::Tape t;
        const std::vector<EncodedInput> x{shuffled};
        const Tensor f = enc(t, x).value();
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(f[i] - ref[i]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("the set encoder separates every bag meaning") {
  Rng init(1);
  const nn::BagEncoder enc("bag", 16, 5, init);
  const MeaningSpace space(Representation::bag);
  std::vector<EncodedInput> xs;
  for (const Meaning& m : space) xs.push_back(encode_bag(m));
  ad::Tape t;
  const Tensor f = enc(t, xs).value();
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < space.size(); ++i) {
    rows.insert({f.data() + i * 16, f.data() + (i + 1) * 16});
  }
  CHECK(rows.size() == space.size());
}

TEST_CASE("initialisation follows the uniform fan rule") {
  Rng rng(2);
  const auto p = nn::xavier("w", {30, 50}, 30, 50, rng);
  const double a = std::sqrt(6.0 / 80.0);
  double lo = 1.0, hi = -1.0;
  for (double v : p.value.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -a);
  CHECK(hi <= a);
  CHECK(hi - lo > 1.8 * a);
  const Speaker s(Representation::concatenation, AgentHyper{}, 1);
  s.visit([](const ad::Parameter& q) {
    if (q.name.ends_with("bias")) {
      for (double v : q.value.values()) CHECK(v == 0.0);
    }
  });
}

TEST_CASE("agents are deterministic in their seed") {
  const Speaker a(Representation::bag, AgentHyper{}, 5), b(Representation::bag, AgentHyper{}, 5);
  const Speaker c(Representation::bag, AgentHyper{}, 6);
  CHECK(dyad_to_json(a, Listener(Representation::bag, AgentHyper{}, 1)) ==
        dyad_to_json(b, Listener(Representation::bag, AgentHyper{}, 1)));
  CHECK(dyad_to_json(a, Listener(Representation::bag, AgentHyper{}, 1)) !=
        dyad_to_json(c, Listener(Representation::bag, AgentHyper{}, 1)));
}

TEST_CASE("checkpoints round-trip and reject mismatches") {
  for (Representation kind : {Representation::concatenation, Representation::bag,
                              Representation::image}) {
    const AgentHyper hyper{6, 10, 2};
    const Speaker s(kind, hyper, 3);
    const Listener l(kind, hyper, 4);
    const auto j = dyad_to_json(s, l);
    const DyadState st = dyad_from_json(j);
    CHECK(st.kind == kind);
    CHECK(st.hyper == hyper);
    CHECK(dyad_to_json(st.speaker, st.listener) == j);

    const Stimuli stimuli{MeaningSpace(kind)};
    Rng r1(1), r2(1);
    CHECK(speak_greedy(s, stimuli.encode_all(r1)) == speak_greedy(st.speaker, stimuli.encode_all(r2)));

    auto missing = j;
    missing["tensors"].erase("speaker.decoder.output.bias");
    CHECK_THROWS_WITH(dyad_from_json(missing), Catch::Matchers::ContainsSubstring("missing tensor"));
    auto extra = j;
    extra["tensors"]["stray"] = {{"shape", {1}}, {"data", {0.0}}};
    CHECK_THROWS_WITH(dyad_from_json(extra), Catch::Matchers::ContainsSubstring("extra"));
    auto reshaped = j;
    reshaped["hyper"]["hidden"] = 11;
    CHECK_THROWS_WITH(dyad_from_json(reshaped), Catch::Matchers::ContainsSubstring("shape"));
    auto version = j;
    version["version"] = 99;
    CHECK_THROWS(dyad_from_json(version));
  }
}
