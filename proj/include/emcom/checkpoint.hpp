#pragma once

// Versioned JSON checkpoints of named tensors for a speaker/listener pair.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emcom/agents.hpp"
#include "emcom/meanings.hpp"
#include "emcom/nn.hpp"

namespace emcom {

inline constexpr std::string_view kCheckpointFormat = "emcom-agents";
inline constexpr int kCheckpointVersion = 1;

struct DyadState {
  Representation kind = Representation::concatenation;
  AgentHyper hyper;
  Speaker speaker;
  Listener listener;
};

namespace detail {

template <class Module>
void tensors_to_json(const Module& m, nlohmann::json& out) {
  m.visit([&](const ad::Parameter& p) {
    if (out.contains(p.name)) throw std::logic_error("checkpoint: duplicate tensor " + p.name);
    std::vector<double> data(p.value.values().begin(), p.value.values().end());
    out[p.name] = {{"shape", p.value.shape()}, {"data", std::move(data)}};
  });
}

template <class Module>
void tensors_from_json(Module& m, const nlohmann::json& in, std::size_t& used) {
  m.visit([&](ad::Parameter& p) {
    if (!in.contains(p.name)) throw std::runtime_error("checkpoint: missing tensor " + p.name);
    const nlohmann::json& t = in.at(p.name);
    const auto shape = t.at("shape").get<Shape>();
    if (shape != p.value.shape()) {
      throw std::runtime_error("checkpoint: tensor " + p.name + " has shape " +
                               shape_string(shape) + ", expected " +
                               shape_string(p.value.shape()));
    }
    auto data = t.at("data").get<std::vector<double>>();
    p.value = Tensor(shape, std::move(data));
    p.grad = Tensor(shape);
    ++used;
  });
}

}  // namespace detail

inline nlohmann::json dyad_to_json(const Speaker& s, const Listener& l) {
  if (s.kind() != l.kind()) throw std::invalid_argument("checkpoint: agents differ in representation");
  nlohmann::json tensors = nlohmann::json::object();
  detail::tensors_to_json(s, tensors);
  detail::tensors_to_json(l, tensors);
  const AgentHyper& h = s.hyper();
  return {{"format", std::string(kCheckpointFormat)},
          {"version", kCheckpointVersion},
          {"representation", std::string(to_string(s.kind()))},
          {"hyper", {{"embedding", h.embedding}, {"hidden", h.hidden}, {"bag_rounds", h.bag_rounds}}},
          {"tensors", std::move(tensors)}};
}

inline DyadState dyad_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) {
    throw std::runtime_error("checkpoint: not an agent checkpoint");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + j.at("version").dump());
  }
  const auto kind = parse_representation(j.at("representation").get<std::string>());
  if (!kind) throw std::runtime_error("checkpoint: unknown representation");
  DyadState st;
  st.kind = *kind;
  const nlohmann::json& h = j.at("hyper");
  st.hyper.embedding = h.at("embedding").get<std::size_t>();
  st.hyper.hidden = h.at("hidden").get<std::size_t>();
  st.hyper.bag_rounds = h.at("bag_rounds").get<std::size_t>();
  st.speaker = Speaker(st.kind, st.hyper, 0);
  st.listener = Listener(st.kind, st.hyper, 0);
  const nlohmann::json& tensors = j.at("tensors");
  std::size_t used = 0;
  detail::tensors_from_json(st.speaker, tensors, used);
  detail::tensors_from_json(st.listener, tensors, used);
  if (used != tensors.size()) throw std::runtime_error("checkpoint: unexpected extra tensors");
  return st;
}

inline void save_dyad(const std::string& path, const Speaker& s, const Listener& l) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << dyad_to_json(s, l).dump() << '\n';
}

inline DyadState load_dyad(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return dyad_from_json(nlohmann::json::parse(in));
}

}  // namespace emcom
