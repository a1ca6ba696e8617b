#include <cstdio>
#include <cstdlib>

#include <json.hpp>

#include "tailflow/flow.hpp"

namespace tailflow::flow {

namespace {

using nlohmann::json;

std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::invalid_argument("checkpoint: bad float literal: " + s);
  return v;
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::additive_coupling: return "additive_coupling";
    case LayerKind::affine_coupling: return "affine_coupling";
    case LayerKind::masked_autoregressive: return "masked_autoregressive";
    case LayerKind::permutation: return "permutation";
  }
  throw std::logic_error("unknown layer kind");
}

LayerKind kind_from(const std::string& s) {
  if (s == "additive_coupling") return LayerKind::additive_coupling;
  if (s == "affine_coupling") return LayerKind::affine_coupling;
  if (s == "masked_autoregressive") return LayerKind::masked_autoregressive;
  if (s == "permutation") return LayerKind::permutation;
  throw std::invalid_argument("checkpoint: unknown layer kind: " + s);
}

const char* scale_head_name(ScaleHead h) {
  switch (h) {
    case ScaleHead::tanh_exp: return "tanh_exp";
    case ScaleHead::sigmoid: return "sigmoid";
    case ScaleHead::exp: return "exp";
  }
  throw std::logic_error("unknown scale head");
}

ScaleHead scale_head_from(const std::string& s) {
  if (s == "tanh_exp") return ScaleHead::tanh_exp;
  if (s == "sigmoid") return ScaleHead::sigmoid;
  if (s == "exp") return ScaleHead::exp;
  throw std::invalid_argument("checkpoint: unknown scale head: " + s);
}

const char* activation_name(autograd::Activation a) {
  switch (a) {
    case autograd::Activation::tanh: return "tanh";
    case autograd::Activation::sigmoid: return "sigmoid";
    case autograd::Activation::relu: return "relu";
  }
  throw std::logic_error("unknown activation");
}

autograd::Activation activation_from(const std::string& s) {
  if (s == "tanh") return autograd::Activation::tanh;
  if (s == "sigmoid") return autograd::Activation::sigmoid;
  if (s == "relu") return autograd::Activation::relu;
  throw std::invalid_argument("checkpoint: unknown activation: " + s);
}

}  // namespace

std::string to_json_string(const FlowStack& stack, const Source& source) {
  json doc;
  doc["dim"] = stack.dim;
  doc["layers"] = json::array();
  for (const auto& layer : stack.layers) {
    json jl;
    jl["kind"] = kind_name(layer.kind);
    if (layer.kind == LayerKind::permutation) {
      jl["mask"] = layer.perm;
      jl["layer_sizes"] = json::array();
      jl["params"] = json::array();
    } else {
      jl["mask"] = json::array();
      for (auto f : layer.transformed) jl["mask"].push_back(static_cast<int>(f));
      jl["layer_sizes"] = layer.conditioner.layer_sizes;
      jl["activation"] = activation_name(layer.conditioner.activation);
      jl["scale_head"] = scale_head_name(layer.scale_head);
      jl["shift_head"] = layer.shift_head == ShiftHead::relu ? "relu" : "linear";
      jl["affine_form"] =
          layer.affine_form == AffineForm::convex ? "convex" : "scale_shift";
      json params = json::array();
      for (double v : layer.conditioner.values) params.push_back(hex_double(v));
      jl["params"] = std::move(params);
    }
    doc["layers"].push_back(std::move(jl));
  }
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TafSource>) {
          doc["source"] = {{"kind", "taf"}, {"theta", hex_double(s.theta)}, {"dim", s.dim}};
        } else {
          doc["source"] = {{"kind", "gaussian"}, {"theta", nullptr}, {"dim", s.dim}};
        }
      },
      source);
  return doc.dump(2);
}

std::pair<FlowStack, Source> from_json_string(const std::string& text) {
  const json doc = json::parse(text);
  FlowStack stack;
  stack.dim = doc.at("dim").get<int>();
  for (const auto& jl : doc.at("layers")) {
    FlowLayer layer;
    layer.kind = kind_from(jl.at("kind").get<std::string>());
    layer.dim = stack.dim;
    if (layer.kind == LayerKind::permutation) {
      layer.perm = jl.at("mask").get<std::vector<int>>();
    } else {
      for (int f : jl.at("mask").get<std::vector<int>>())
        layer.transformed.push_back(static_cast<std::uint8_t>(f));
      layer.conditioner.layer_sizes = jl.at("layer_sizes").get<std::vector<int>>();
      layer.conditioner.activation = activation_from(jl.at("activation").get<std::string>());
      layer.scale_head = scale_head_from(jl.at("scale_head").get<std::string>());
      layer.shift_head =
          jl.at("shift_head").get<std::string>() == "relu" ? ShiftHead::relu : ShiftHead::linear;
      layer.affine_form = jl.at("affine_form").get<std::string>() == "convex"
                              ? AffineForm::convex
                              : AffineForm::scale_shift;
      for (const auto& p : jl.at("params"))
        layer.conditioner.values.push_back(parse_hex_double(p.get<std::string>()));
      if (layer.conditioner.values.size() != layer.conditioner.param_count())
        throw std::invalid_argument("checkpoint: parameter count mismatch");
      if (layer.kind == LayerKind::masked_autoregressive)
        layer.made_masks = made_connectivity(stack.dim, layer.conditioner.layer_sizes);
    }
    stack.layers.push_back(std::move(layer));
  }
  const json& js = doc.at("source");
  Source source;
  if (js.at("kind").get<std::string>() == "taf") {
    source = TafSource{js.at("dim").get<int>(), parse_hex_double(js.at("theta").get<std::string>())};
  } else {
    source = dists::IidSource{js.at("dim").get<int>(),
                              dists::Distribution1D::gaussian(0.0, 1.0)};
  }
  return {std::move(stack), std::move(source)};
}

}  // namespace tailflow::flow
