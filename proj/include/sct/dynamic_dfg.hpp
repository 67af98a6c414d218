#pragma once

// Dynamic data-flow graph over a trace. Nodes are (register, step) pairs; an
// instruction's output is referenced with a one-step delay since the written
// register holds its new value only in the next configuration.

#include "sct/cts.hpp"
#include "sct/explore.hpp"

namespace sct {

struct DynDfg {
  const Program* prog = nullptr;
  const Trace* trace = nullptr;
  RegSlots slots{*prog};

  // edge sets, step-indexed: per step i, which dependencies feed step i+1
  struct StepEdges {
    std::vector<size_t> nop;                       // slots carried through
    std::vector<std::pair<size_t, size_t>> reg;    // (src slot, dst slot)
    // memory deps: load at step i gets (source reg slot, store step)
    bool mem = false;
    size_t mem_src_slot = 0;
    size_t mem_store_step = 0;
  };
  std::vector<StepEdges> edges;
};

inline DynDfg build_dynamic_dfg(const Program& p, const Trace& t) {
  using K = Instruction::Kind;
  DynDfg g{&p, &t, RegSlots(p)};
  g.edges.resize(t.steps.size());
  for (size_t i = 0; i < t.steps.size(); ++i) {
    auto& e = g.edges[i];
    if (!p.instr_mapped(t.steps[i].instr_addr) || t.steps[i].halted) {
      for (size_t s = 0; s < g.slots.count(); ++s) e.nop.push_back(s);
      continue;
    }
    const Instruction& ins = p.at(t.steps[i].instr_addr);
    std::set<size_t> written;
    for (Reg r : ins.written_regs()) written.insert(g.slots.of(r));
    written.insert(g.slots.of(Reg::pc()));
    for (size_t s = 0; s < g.slots.count(); ++s)
      if (!written.count(s)) e.nop.push_back(s);
    if (ins.kind == K::Op) {
      for (const auto& in : ins.inputs)
        if (!in.is_imm)
          e.reg.emplace_back(g.slots.of(in.reg), g.slots.of(ins.dst));
    }
    if (ins.kind == K::Ld && t.steps[i].prov.is_store()) {
      size_t j = t.steps[i].prov.step;
      const Instruction& st = p.at(t.steps[j].instr_addr);
      e.mem = true;
      e.mem_src_slot = g.slots.of(st.aux);
      e.mem_store_step = j;
    }
  }
  return g;
}

// Forward closure: given marked (slot, step) seeds, propagate along edges.
// marked[k] holds the slots whose node (r, k) is reachable from a seed.
class DynReach {
 public:
  explicit DynReach(const DynDfg& g)
      : g_(g), marked_(g.trace->steps.size() + 1,
                       std::vector<char>(g.slots.count(), 0)) {}

  void seed(size_t slot, size_t step) { marked_[step][slot] = 1; }

  void propagate() {
    size_t n = g_.trace->steps.size();
    for (size_t i = 0; i < n; ++i) {
      const auto& e = g_.edges[i];
      for (size_t s : e.nop)
        if (marked_[i][s]) marked_[i + 1][s] = 1;
      for (auto [src, dst] : e.reg)
        if (marked_[i][src]) marked_[i + 1][dst] = 1;
      if (e.mem) {
        // store output is referenced at (src, j) .. the value the store read
        if (marked_[e.mem_store_step][e.mem_src_slot]) {
          const Instruction& ld = g_.prog->at(g_.trace->steps[i].instr_addr);
          marked_[i + 1][g_.slots.of(ld.dst)] = 1;
        }
      }
    }
  }

  bool at(size_t slot, size_t step) const { return marked_[step][slot] != 0; }

 private:
  const DynDfg& g_;
  std::vector<std::vector<char>> marked_;
};

// dyn_dep((r,i) ->* (r',j)): single-pair reachability query
inline bool dyn_dep(const DynDfg& g, Reg r, size_t i, Reg r2, size_t j) {
  if (j < i) return false;
  DynReach reach(g);
  reach.seed(g.slots.of(r), i);
  reach.propagate();
  return reach.at(g.slots.of(r2), j);
}

}  // namespace sct
