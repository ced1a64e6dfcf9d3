#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "emcom/autodiff.hpp"
#include "emcom/meanings.hpp"
#include "emcom/rng.hpp"

namespace emcom::nn {

using ad::Parameter;
using ad::Tape;
using ad::Var;

/// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
inline Parameter xavier(std::string name, Shape shape, std::size_t fan_in,
                        std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-a, a);
  return Parameter(std::move(name), std::move(t));
}

inline Parameter zeros(std::string name, Shape shape) {
  return Parameter(std::move(name), Tensor(std::move(shape)));
}

/// Collects mutable pointers to every parameter of a module, in visit order.
template <class Module>
std::vector<Parameter*> parameters_of(Module& m) {
  std::vector<Parameter*> out;
  m.visit([&](Parameter& p) { out.push_back(&p); });
  return out;
}

template <class Module>
std::size_t parameter_count(const Module& m) {
  std::size_t n = 0;
  m.visit([&](const Parameter& p) { n += p.value.size(); });
  return n;
}

// ---------------------------------------------------------------------------

/// y = x W + b with W [in, out].
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
      : weight(xavier(name + ".weight", {in, out}, in, out, rng)),
        bias(zeros(name + ".bias", {out})) {}

  Var operator()(Tape& t, const Var& x) const {
    return ad::add_bias(ad::matmul(x, t.param(weight)), t.param(bias));
  }

  template <class F> void visit(F&& f) { f(weight); f(bias); }
  template <class F> void visit(F&& f) const { f(weight); f(bias); }
};

/// Single-layer gated recurrent cell with update and reset gates.
struct GruCell {
  std::size_t hidden = 0;
  Parameter input_weight;    // [in, 3H]  (update | reset | candidate)
  Parameter hidden_weight;   // [H, 3H]
  Parameter input_bias;      // [3H]
  Parameter hidden_bias;     // [3H]

  GruCell() = default;
  GruCell(const std::string& name, std::size_t in, std::size_t h, Rng& rng)
      : hidden(h),
        input_weight(xavier(name + ".input_weight", {in, 3 * h}, in, h, rng)),
        hidden_weight(xavier(name + ".hidden_weight", {h, 3 * h}, h, h, rng)),
        input_bias(zeros(name + ".input_bias", {3 * h})),
        hidden_bias(zeros(name + ".hidden_bias", {3 * h})) {}

  Var operator()(Tape& t, const Var& x, const Var& h) const {
    const Var xw = ad::add_bias(ad::matmul(x, t.param(input_weight)),
                                t.param(input_bias));
    const Var hu = ad::add_bias(ad::matmul(h, t.param(hidden_weight)),
                                t.param(hidden_bias));
    const std::size_t H = hidden;
    const Var z = ad::sigmoid(ad::slice_cols(xw, 0, H) + ad::slice_cols(hu, 0, H));
    const Var r = ad::sigmoid(ad::slice_cols(xw, H, H) + ad::slice_cols(hu, H, H));
    const Var n = ad::tanh(ad::slice_cols(xw, 2 * H, H) +
                           r * ad::slice_cols(hu, 2 * H, H));
    return ad::one_minus(z) * n + z * h;
  }

  template <class F> void visit(F&& f) {
    f(input_weight); f(hidden_weight); f(input_bias); f(hidden_bias);
  }
  template <class F> void visit(F&& f) const {
    f(input_weight); f(hidden_weight); f(input_bias); f(hidden_bias);
  }
};

// ---------------------------------------------------------------------------
// Input encoders. Each maps a batch of encoded inputs to [N, width] features.

/// Two-layer tanh perceptron over the 12-wide concatenated one-hots.
struct MlpEncoder {
  Linear hidden;
  Linear out;

  MlpEncoder() = default;
  MlpEncoder(const std::string& name, std::size_t width, Rng& rng)
      : hidden(name + ".fc1", 2 * kCountValues, width, rng),
        out(name + ".fc2", width, width, rng) {}

  Var operator()(Tape& t, std::span<const EncodedInput> xs) const {
    Tensor batch({xs.size(), 2 * kCountValues});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto* v = std::get_if<ConcatVector>(&xs[i]);
      if (!v) throw std::invalid_argument("mlp encoder: expected a concatenation input");
      std::copy(v->begin(), v->end(), batch.data() + i * v->size());
    }
    return ad::tanh(out(t, ad::tanh(hidden(t, t.constant(std::move(batch))))));
  }

  template <class F> void visit(F&& f) { hidden.visit(f); out.visit(f); }
  template <class F> void visit(F&& f) const { hidden.visit(f); out.visit(f); }
};

/// LeNet-5 layout: conv(6,5x5) -> avgpool -> conv(16,5x5) -> avgpool ->
/// 120 -> 84 -> width, tanh throughout.
struct LeNetEncoder {
  Parameter conv1_weight, conv1_bias;
  Parameter conv2_weight, conv2_bias;
  Linear fc1, fc2, fc3;

  LeNetEncoder() = default;
  LeNetEncoder(const std::string& name, std::size_t width, Rng& rng)
      : conv1_weight(xavier(name + ".conv1.weight", {6, 1, 5, 5}, 25, 150, rng)),
        conv1_bias(zeros(name + ".conv1.bias", {6})),
        conv2_weight(xavier(name + ".conv2.weight", {16, 6, 5, 5}, 150, 400, rng)),
        conv2_bias(zeros(name + ".conv2.bias", {16})),
        fc1(name + ".fc1", 16 * 5 * 5, 120, rng),
        fc2(name + ".fc2", 120, 84, rng),
        fc3(name + ".fc3", 84, width, rng) {}

  Var operator()(Tape& t, std::span<const EncodedInput> xs) const {
    Tensor batch({xs.size(), 1, kImageSide, kImageSide});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto* img = std::get_if<Image>(&xs[i]);
      if (!img) throw std::invalid_argument("cnn encoder: expected an image input");
      std::copy(img->pixels.begin(), img->pixels.end(), batch.data() + i * kImagePixels);
    }
    Var h = t.constant(std::move(batch));
    h = ad::avg_pool2(ad::tanh(ad::conv2d(h, t.param(conv1_weight), t.param(conv1_bias))));
    h = ad::avg_pool2(ad::tanh(ad::conv2d(h, t.param(conv2_weight), t.param(conv2_bias))));
    h = ad::reshape(h, {xs.size(), 16 * 5 * 5});
    h = ad::tanh(fc1(t, h));
    h = ad::tanh(fc2(t, h));
    return ad::tanh(fc3(t, h));
  }

  template <class F> void visit(F&& f) {
    f(conv1_weight); f(conv1_bias); f(conv2_weight); f(conv2_bias);
    fc1.visit(f); fc2.visit(f); fc3.visit(f);
  }
  template <class F> void visit(F&& f) const {
    f(conv1_weight); f(conv1_bias); f(conv2_weight); f(conv2_bias);
    fc1.visit(f); fc2.visit(f); fc3.visit(f);
  }
};

/// Order-invariant set encoder in the read-process-write style. Tokens are
/// embedded into memory rows; each processing round updates a query with a
/// GRU, scores every memory row against it, squashes the scores with a
/// sigmoid and sums the weighted rows. Because the weights are not
/// normalized across the set, the readout grows with bag cardinality.
struct BagEncoder {
  std::size_t rounds = 5;
  Parameter token_embedding;  // [2, width]
  GruCell process;
  Linear readout;             // [q; r] -> width

  BagEncoder() = default;
  BagEncoder(const std::string& name, std::size_t width, std::size_t n_rounds,
             Rng& rng)
      : rounds(n_rounds),
        token_embedding(xavier(name + ".token_embedding", {2, width}, 2, width, rng)),
        process(name + ".process", width, width, rng),
        readout(name + ".readout", 2 * width, width, rng) {}

  Var operator()(Tape& t, std::span<const EncodedInput> xs) const {
    std::vector<std::size_t> segment;
    std::vector<double> one_hot;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto* bag = std::get_if<Bag>(&xs[i]);
      if (!bag) throw std::invalid_argument("bag encoder: expected a bag input");
      if (bag->tokens.empty()) throw std::invalid_argument("bag encoder: empty bag");
      for (Token tok : bag->tokens) {
        const auto v = token_vector(tok);
        one_hot.insert(one_hot.end(), v.begin(), v.end());
        segment.push_back(i);
      }
    }
    const std::size_t n_tokens = segment.size();
    const std::size_t width = process.hidden;
    const Var memory = ad::matmul(t.constant(Tensor({n_tokens, 2}, std::move(one_hot))),
                                  t.param(token_embedding));
    Var query = t.constant(Tensor({xs.size(), width}));
    Var read = t.constant(Tensor({xs.size(), width}));
    for (std::size_t r = 0; r < rounds; ++r) {
      query = process(t, read, query);
      const Var scores = ad::row_dot(memory, ad::gather_rows(query, segment));
      read = ad::segment_sum(ad::mul_rows(memory, ad::sigmoid(scores)), segment,
                             xs.size());
    }
    return ad::tanh(readout(t, ad::concat_cols(query, read)));
  }

  template <class F> void visit(F&& f) {
    f(token_embedding); process.visit(f); readout.visit(f);
  }
  template <class F> void visit(F&& f) const {
    f(token_embedding); process.visit(f); readout.visit(f);
  }
};

/// Encoder matching a representation kind.
class Encoder {
 public:
  Encoder() = default;
  Encoder(Representation kind, const std::string& name, std::size_t width,
          std::size_t bag_rounds, Rng& rng)
      : kind_(kind) {
    switch (kind) {
      case Representation::concatenation: impl_ = MlpEncoder(name, width, rng); break;
      case Representation::image: impl_ = LeNetEncoder(name, width, rng); break;
      case Representation::bag: impl_ = BagEncoder(name, width, bag_rounds, rng); break;
    }
  }

  Representation kind() const { return kind_; }

  Var operator()(Tape& t, std::span<const EncodedInput> xs) const {
    if (xs.empty()) throw std::invalid_argument("encoder: empty batch");
    return std::visit([&](const auto& e) { return e(t, xs); }, impl_);
  }

  template <class F> void visit(F&& f) {
    std::visit([&](auto& e) { e.visit(f); }, impl_);
  }
  template <class F> void visit(F&& f) const {
    std::visit([&](const auto& e) { e.visit(f); }, impl_);
  }

 private:
  Representation kind_ = Representation::concatenation;
  std::variant<MlpEncoder, LeNetEncoder, BagEncoder> impl_;
};

}  // namespace emcom::nn
