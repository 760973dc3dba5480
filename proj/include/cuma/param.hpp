#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cuma/tape.hpp"

namespace cuma::ad {

// Named contiguous parameter blocks, one per layer weight or bias.
// Flatten/unflatten round-trips exactly; segment order is the identity of
// the vector, so two ParamVectors with equal layouts are elementwise
// compatible.
struct ParamVector {
  struct Segment {
    std::string name;
    Tensor value;
  };

  std::vector<Segment> segments;

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const Segment& s : segments) n += s.value.numel();
    return n;
  }

  void add(std::string name, Tensor value) {
    for (const Segment& s : segments)
      require(s.name != name, "param: duplicate segment name '", name, "'");
    segments.push_back({std::move(name), std::move(value)});
  }

  const Tensor& at(const std::string& name) const {
    for (const Segment& s : segments)
      if (s.name == name) return s.value;
    fail("param: no segment named '", name, "'");
  }

  Tensor& at(const std::string& name) {
    for (Segment& s : segments)
      if (s.name == name) return s.value;
    fail("param: no segment named '", name, "'");
  }

  bool same_layout(const ParamVector& o) const {
    if (segments.size() != o.segments.size()) return false;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (segments[i].name != o.segments[i].name) return false;
      if (!segments[i].value.same_shape(o.segments[i].value)) return false;
    }
    return true;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const Segment& s : segments) out.insert(out.end(), s.value.v.begin(), s.value.v.end());
    return out;
  }

  // Rebuilds values from a flat vector laid out as flatten() produces.
  void unflatten(std::span<const double> flat) {
    require(flat.size() == total_size(), "param: flat length ", flat.size(),
            " does not match total size ", total_size());
    std::size_t off = 0;
    for (Segment& s : segments) {
      std::copy(flat.begin() + off, flat.begin() + off + s.value.numel(), s.value.v.begin());
      off += s.value.numel();
    }
  }

  ParamVector zeros_like() const {
    ParamVector out;
    for (const Segment& s : segments)
      out.segments.push_back({s.name, Tensor(s.value.rows, s.value.cols)});
    return out;
  }
};

// Leaves on a tape, one per segment, in segment order.
struct ParamBinding {
  std::vector<std::string> names;
  std::vector<Var> vars;

  Var at(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return vars[i];
    fail("binding: no segment named '", name, "'");
  }
};

inline ParamBinding bind(Tape& tape, const ParamVector& params) {
  ParamBinding b;
  b.names.reserve(params.segments.size());
  b.vars.reserve(params.segments.size());
  for (const ParamVector::Segment& s : params.segments) {
    b.names.push_back(s.name);
    b.vars.push_back(tape.leaf(s.value));
  }
  return b;
}

// Reads gradient vars (aligned with a binding) back into a ParamVector.
inline ParamVector materialize(const ParamBinding& binding, std::span<const Var> grads) {
  require(grads.size() == binding.vars.size(), "materialize: arity mismatch");
  ParamVector out;
  for (std::size_t i = 0; i < grads.size(); ++i)
    out.segments.push_back({binding.names[i], grads[i].tape->value(grads[i])});
  return out;
}

}  // namespace cuma::ad
