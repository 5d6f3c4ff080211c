#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "duo/io/config.hpp"

// Text checkpoint:
//   duo-ckpt v1
//   model <one-line JSON model config>
//   tensors <count>
//   then per tensor: "<name> <rank> <extents...>" and one line of values
//   printed with %.17g, so a reload is bit-exact.
namespace duo::io {

inline constexpr const char* kCheckpointTag = "duo-ckpt v1";

inline void write_checkpoint(std::ostream& out, const ModelConfig& cfg, const ModelParams& p) {
  out << kCheckpointTag << '\n' << "model " << model_to_json(cfg).dump() << '\n';
  const auto names = param_names(p);
  const auto flat = flatten(p);
  out << "tensors " << flat.size() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < flat.size(); ++i) {
    out << names[i] << ' ' << flat[i].rank();
    for (auto e : flat[i].shape()) out << ' ' << e;
    out << '\n';
    for (std::size_t k = 0; k < flat[i].size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", flat[i][k]);
      out << (k ? " " : "") << buf;
    }
    out << '\n';
  }
}

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& p) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  write_checkpoint(out, cfg, p);
}

struct Checkpoint {
  ModelConfig model;
  ModelParams params;
};

inline Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>") {
  auto fail = [&](const std::string& m) -> Checkpoint { throw CheckpointError(source + ": " + m); };
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointTag) return fail("missing format tag '" + std::string(kCheckpointTag) + "'");
  if (!std::getline(in, line) || line.rfind("model ", 0) != 0) return fail("missing model line");
  Checkpoint c;
  try {
    c.model = model_from_json(json::parse(line.substr(6)));
  } catch (const std::exception& e) {
    return fail(std::string("bad model config: ") + e.what());
  }
  c.params = zero_params(c.model);
  const auto names = param_names(c.params);
  std::size_t count = 0;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "tensors %zu", &count) != 1) return fail("missing tensor count");
  if (count != names.size())
    return fail("holds " + std::to_string(count) + " tensors, model needs " + std::to_string(names.size()));
  std::vector<Tensor> flat = flatten(c.params);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) return fail("truncated at tensor " + std::to_string(i));
    std::istringstream h(line);
    std::string name;
    std::size_t rank = 0;
    h >> name >> rank;
    Shape s(rank);
    for (auto& e : s) h >> e;
    if (!h || name != names[i] || s != flat[i].shape())
      return fail("tensor " + std::to_string(i) + " is '" + line + "', expected " + names[i] + " " + shape_str(flat[i].shape()));
    if (!std::getline(in, line)) return fail("truncated values of " + name);
    std::istringstream v(line);
    for (auto& x : flat[i].data())
      if (!(v >> x)) return fail("too few values for " + name);
    std::string extra;
    if (v >> extra) return fail("too many values for " + name);
  }
  unflatten(c.params, flat);
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  return read_checkpoint(in, path);
}

} // namespace duo::io
