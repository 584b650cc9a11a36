#include "unigen/param_set.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace unigen {
namespace {

constexpr int kCheckpointVersion = 1;
constexpr char kBase64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kBase64Chars[(v >> 18) & 63];
    out += kBase64Chars[(v >> 12) & 63];
    out += kBase64Chars[(v >> 6) & 63];
    out += kBase64Chars[v & 63];
    i += 3;
  }
  const std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kBase64Chars[(v >> 18) & 63];
    out += kBase64Chars[(v >> 12) & 63];
    out += "==";
  } else if (rem == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kBase64Chars[(v >> 18) & 63];
    out += kBase64Chars[(v >> 12) & 63];
    out += kBase64Chars[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kBase64Chars[i])] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = lut[static_cast<unsigned char>(c)];
    if (v < 0) throw std::runtime_error("checkpoint: invalid base64 payload");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

std::string doubles_to_base64(const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>((u >> (8 * b)) & 0xff);
  }
  return base64_encode(bytes);
}

std::vector<double> base64_to_doubles(const std::string& text, std::size_t expected) {
  const std::vector<std::uint8_t> bytes = base64_decode(text);
  if (bytes.size() != expected * 8) {
    throw std::runtime_error("checkpoint: payload holds " + std::to_string(bytes.size() / 8) +
                             " doubles, expected " + std::to_string(expected));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    values[i] = std::bit_cast<double>(u);
  }
  return values;
}

nlohmann::json tensor_to_json(const Tensor& t) {
  return nlohmann::json{{"shape", t.shape()}, {"data", doubles_to_base64(t.data())}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return Tensor(shape, base64_to_doubles(j.at("data").get<std::string>(), n));
}

}  // namespace

void ParamSet::add(const std::string& name, Tensor init) {
  if (slots_.contains(name)) {
    throw std::invalid_argument("ParamSet::add: parameter '" + name + "' already registered");
  }
  Slot s;
  s.m = Tensor::zeros(init.shape());
  s.v = Tensor::zeros(init.shape());
  s.value = std::move(init);
  slots_.emplace(name, std::move(s));
}

Tensor& ParamSet::value(const std::string& name) { return slot(name).value; }

const Tensor& ParamSet::value(const std::string& name) const { return slot(name).value; }

ParamSet::Slot& ParamSet::slot(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) {
    throw std::invalid_argument("ParamSet: unknown parameter '" + name + "'");
  }
  return it->second;
}

const ParamSet::Slot& ParamSet::slot(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) {
    throw std::invalid_argument("ParamSet: unknown parameter '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, slot] : slots_) out.push_back(name);
  return out;
}

void adam_step(ParamSet& params, const GradMap& grads, const AdamConfig& cfg) {
  for (const auto& [name, g] : grads) {
    if (!params.has(name)) {
      throw std::invalid_argument("adam_step: gradient for unregistered parameter '" + name + "'");
    }
    ParamSet::Slot& s = params.slot(name);
    if (!g.same_shape(s.value)) {
      throw std::invalid_argument("adam_step: gradient shape " + shape_str(g.shape()) +
                                  " does not match parameter '" + name + "' of shape " +
                                  shape_str(s.value.shape()));
    }
    if (!g.all_finite()) {
      throw std::runtime_error("adam_step: non-finite gradient for parameter '" + name + "'");
    }
  }
  for (const auto& [name, g] : grads) {
    ParamSet::Slot& s = params.slot(name);
    s.step += 1;
    const double t = static_cast<double>(s.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g.at(i);
      s.m.at(i) = cfg.beta1 * s.m.at(i) + (1.0 - cfg.beta1) * gi;
      s.v.at(i) = cfg.beta2 * s.v.at(i) + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = s.m.at(i) / bc1;
      const double vhat = s.v.at(i) / bc2;
      s.value.at(i) -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  nlohmann::json j;
  j["format"] = "unigen-checkpoint";
  j["version"] = kCheckpointVersion;
  nlohmann::json entries = nlohmann::json::object();
  for (const std::string& name : params.names()) {
    const ParamSet::Slot& s = params.slot(name);
    entries[name] = {{"value", tensor_to_json(s.value)},
                     {"m", tensor_to_json(s.m)},
                     {"v", tensor_to_json(s.v)},
                     {"step", s.step}};
  }
  j["params"] = std::move(entries);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out << j.dump(2) << '\n';
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not valid JSON: " +
                             e.what());
  }
  if (j.value("format", "") != "unigen-checkpoint") {
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint file");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported checkpoint version " +
                             j.value("version", nlohmann::json()).dump());
  }
  ParamSet params;
  for (const auto& [name, entry] : j.at("params").items()) {
    params.add(name, tensor_from_json(entry.at("value")));
    ParamSet::Slot& s = params.slot(name);
    s.m = tensor_from_json(entry.at("m"));
    s.v = tensor_from_json(entry.at("v"));
    s.step = entry.at("step").get<std::int64_t>();
    if (!s.m.same_shape(s.value) || !s.v.same_shape(s.value)) {
      throw std::runtime_error("load_checkpoint: optimizer state shape mismatch for '" + name +
                               "'");
    }
  }
  return params;
}

}  // namespace unigen
