#pragma once

// Bounded-exhaustive trace enumeration. Depth-first expansion of the
// speculative successor set; a trace ends at a rule-level halt (self-loop) or
// at the step bound. Loads carry provenance: which store step produced the
// value they returned, or initial memory. Provenance survives LFENCE drains.

#include <functional>
#include <random>
#include <unordered_set>

#include "sct/semantics.hpp"

namespace sct {

struct Provenance {
  enum class Kind : uint8_t { none, initial, store_step };
  Kind kind = Kind::none;
  size_t step = 0;

  static Provenance none() { return {}; }
  static Provenance initial() { return {Kind::initial, 0}; }
  static Provenance store(size_t s) { return {Kind::store_step, s}; }
  bool is_store() const { return kind == Kind::store_step; }
};

struct StepRecord {
  Configuration pre;
  uint64_t instr_addr = 0;
  Observation obs;
  bool transient_rule = false;  // taken via delta_t
  bool halted = false;
  Successor::Cause cause = Successor::Cause::normal;
  Provenance prov;       // present iff the instruction is a LD
  size_t succ_index = 0;  // index into successors(pre) for replay
};

struct Trace {
  std::vector<StepRecord> steps;
  Configuration final_config;
  bool truncated = false;  // hit the step bound
  bool pruned = false;     // cut short at a memoized configuration

  // the configuration after step i
  const Configuration& post(size_t i) const {
    return i + 1 < steps.size() ? steps[i + 1].pre : final_config;
  }
  // an instruction executes transiently if the trace is transient at i+1
  bool executed_transiently(size_t i) const { return post(i).transient; }
  bool complete() const { return !truncated && !pruned; }
};

struct ExplorationLimits {
  size_t max_steps = 200;
  size_t max_traces = 1'000'000;
  bool memoize = false;
};

struct Coverage {
  bool step_bound_hit = false;
  bool trace_limit_hit = false;
  bool stopped_by_sink = false;
  bool memoized = false;
  size_t traces = 0;

  // every speculative path enumerated up to the step bound
  bool exhaustive_within_bound() const { return !trace_limit_hit && !stopped_by_sink; }
  // additionally, no path was cut short by the bound
  bool complete() const { return exhaustive_within_bound() && !step_bound_hit && !memoized; }
};

namespace detail {

struct PathState {
  std::vector<size_t> store_steps;       // step index per spec_stores entry
  std::map<uint64_t, size_t> drained;    // addr -> step of last drained store
};

// provenance of the value a LD successor returned
inline Provenance load_provenance(const Successor& s, const Instruction& ins,
                                  const PathState& ps) {
  if (ins.kind != Instruction::Kind::Ld) return Provenance::none();
  if (s.load_src.kind == LoadSource::Kind::store_entry)
    return Provenance::store(ps.store_steps.at(s.load_src.index));
  auto it = ps.drained.find(s.obs.a.value);
  if (it != ps.drained.end()) return Provenance::store(it->second);
  return Provenance::initial();
}

template <typename Sink>
class Explorer {
 public:
  Explorer(const Program& p, const ExplorationLimits& lim, const HardwareMode& mode,
           Sink& sink)
      : p_(p), lim_(lim), mode_(mode), sink_(sink) {}

  Coverage run(const Configuration& init) {
    cov_ = Coverage{};
    cov_.memoized = lim_.memoize;
    path_.clear();
    visited_.clear();
    dfs(init, PathState{});
    return cov_;
  }

 private:
  const Program& p_;
  const ExplorationLimits& lim_;
  const HardwareMode& mode_;
  Sink& sink_;
  Coverage cov_;
  std::vector<StepRecord> path_;
  std::unordered_set<std::string> visited_;
  bool stop_ = false;

  void emit(const Configuration& final, bool truncated, bool pruned) {
    if (stop_) return;
    if (cov_.traces >= lim_.max_traces) {
      cov_.trace_limit_hit = true;
      stop_ = true;
      return;
    }
    Trace t;
    t.steps = path_;
    t.final_config = final;
    t.truncated = truncated;
    t.pruned = pruned;
    ++cov_.traces;
    if (truncated) cov_.step_bound_hit = true;
    if (!sink_(std::move(t))) {
      cov_.stopped_by_sink = true;
      stop_ = true;
    }
  }

  void dfs(const Configuration& c, PathState ps) {
    if (stop_) return;
    if (path_.size() >= lim_.max_steps) {
      emit(c, /*truncated=*/true, /*pruned=*/false);
      return;
    }
    if (lim_.memoize) {
      std::string key = c.key() + std::to_string(path_.size());
      if (!visited_.insert(std::move(key)).second) {
        emit(c, /*truncated=*/false, /*pruned=*/true);
        return;
      }
    }
    auto succs = successors(c, p_, mode_);
    for (size_t i = 0; i < succs.size(); ++i) {
      if (stop_) return;
      const Successor& s = succs[i];
      StepRecord rec;
      rec.pre = c;
      rec.instr_addr = c.pc.value;
      rec.obs = s.obs;
      rec.transient_rule = s.transient_rule;
      rec.halted = s.halted;
      rec.cause = s.cause;
      rec.succ_index = i;
      if (p_.instr_mapped(c.pc.value))
        rec.prov = load_provenance(s, p_.at(c.pc.value), ps);
      path_.push_back(rec);
      if (s.halted) {
        emit(s.config, false, false);
      } else {
        PathState next = ps;
        update_path_state(next, c, s, path_.size() - 1);
        dfs(s.config, std::move(next));
      }
      path_.pop_back();
    }
  }

  void update_path_state(PathState& ps, const Configuration& pre, const Successor& s,
                         size_t step) {
    if (!p_.instr_mapped(pre.pc.value)) return;
    const Instruction& ins = p_.at(pre.pc.value);
    if (ins.kind == Instruction::Kind::St && !s.transient_rule &&
        s.config.spec_stores.size() > pre.spec_stores.size()) {
      ps.store_steps.push_back(step);
    } else if (ins.kind == Instruction::Kind::Lfence && !s.transient_rule &&
               s.config.spec_stores.empty() && !pre.spec_stores.empty()) {
      for (size_t i = 0; i < pre.spec_stores.size(); ++i)
        ps.drained[pre.spec_stores[i].first] = ps.store_steps.at(i);
      ps.store_steps.clear();
    }
  }
};

}  // namespace detail

// Enumerate all bounded traces from one initial configuration. The sink
// receives each trace and returns false to stop the enumeration.
template <typename Sink>
Coverage explore(const Program& p, const ExplorationLimits& lim, const HardwareMode& mode,
                 Sink&& sink, const Configuration* init = nullptr) {
  detail::Explorer<Sink> ex(p, lim, mode, sink);
  return ex.run(init ? *init : initial_configuration(p));
}

// Initial configurations swept over the program's declared input registers.
inline std::vector<Configuration> initial_configurations(const Program& p,
                                                         bool enumerate_inputs) {
  std::vector<Configuration> out{initial_configuration(p)};
  if (!enumerate_inputs || p.input_regs.empty()) return out;
  uint64_t domain = p.mask() + 1;
  for (Reg r : p.input_regs) {
    std::vector<Configuration> next;
    next.reserve(out.size() * domain);
    for (const auto& c : out) {
      for (uint64_t v = 0; v < domain; ++v) {
        Configuration c2 = c;
        c2.write(r, LabeledValue{v, Label::PUB});
        next.push_back(std::move(c2));
      }
    }
    out = std::move(next);
  }
  return out;
}

// The unique sequential trace from an initial configuration.
inline Trace sequential_trace(const Program& p, size_t max_steps,
                              const Configuration* init = nullptr) {
  Trace t;
  Configuration c = init ? *init : initial_configuration(p);
  for (size_t i = 0; i < max_steps; ++i) {
    Successor s = step_sequential(c, p);
    StepRecord rec;
    rec.pre = c;
    rec.instr_addr = c.pc.value;
    rec.obs = s.obs;
    rec.halted = s.halted;
    rec.succ_index = 0;
    t.steps.push_back(rec);
    if (s.halted) {
      t.final_config = c;
      return t;
    }
    c = s.config;
  }
  t.final_config = c;
  t.truncated = true;
  return t;
}

// Uniform random walks over the speculative successor set, for sampling-based
// property checks. Deterministic under a fixed seed.
inline std::vector<Trace> sample_random_traces(const Program& p, const HardwareMode& mode,
                                               size_t count, size_t max_steps,
                                               uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Trace> out;
  out.reserve(count);
  for (size_t n = 0; n < count; ++n) {
    Trace t;
    Configuration c = initial_configuration(p);
    detail::PathState ps;
    for (size_t i = 0; i < max_steps; ++i) {
      auto succs = successors(c, p, mode);
      size_t pick = succs.size() == 1
                        ? 0
                        : std::uniform_int_distribution<size_t>(0, succs.size() - 1)(rng);
      const Successor& s = succs[pick];
      StepRecord rec;
      rec.pre = c;
      rec.instr_addr = c.pc.value;
      rec.obs = s.obs;
      rec.transient_rule = s.transient_rule;
      rec.halted = s.halted;
      rec.cause = s.cause;
      rec.succ_index = pick;
      if (p.instr_mapped(c.pc.value)) rec.prov = detail::load_provenance(s, p.at(c.pc.value), ps);
      t.steps.push_back(rec);
      if (s.halted) break;
      detail::PathState next = ps;
      // mirror the explorer's bookkeeping
      {
        const Instruction& ins = p.at(c.pc.value);
        if (ins.kind == Instruction::Kind::St && !s.transient_rule &&
            s.config.spec_stores.size() > c.spec_stores.size()) {
          next.store_steps.push_back(t.steps.size() - 1);
        } else if (ins.kind == Instruction::Kind::Lfence && !s.transient_rule &&
                   s.config.spec_stores.empty() && !c.spec_stores.empty()) {
          for (size_t k = 0; k < c.spec_stores.size(); ++k)
            next.drained[c.spec_stores[k].first] = next.store_steps.at(k);
          next.store_steps.clear();
        }
      }
      ps = std::move(next);
      c = s.config;
    }
    t.final_config = c;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace sct
