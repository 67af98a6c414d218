#pragma once

// Taint-primitive classification. A security-type violation is a
// publicly-typed register holding a secretly-labeled value; an instruction is
// a taint primitive when it introduces a violation that does not depend on
// any earlier one. Every such instruction must fall into the classes the
// hardware mode permits; anything else is an internal error.

#include "sct/dynamic_dfg.hpp"

namespace sct {

enum class TaintClass : uint8_t { NCAL, NCAS, STKL, NARG, LOAD, LINE };

inline const char* taint_class_name(TaintClass c) {
  switch (c) {
    case TaintClass::NCAL: return "NCAL";
    case TaintClass::NCAS: return "NCAS";
    case TaintClass::STKL: return "STKL";
    case TaintClass::NARG: return "NARG";
    case TaintClass::LOAD: return "LOAD";
    case TaintClass::LINE: return "LINE";
  }
  return "?";
}

struct TaintFinding {
  size_t step = 0;          // the taint primitive executes at this step
  uint64_t instr = 0;       // its instruction address
  TaintClass cls{};
  Reg violating_register{};  // violates its type at step+1
};

namespace detail {

// violations per step: slots with PUB type but SEC value
inline std::vector<std::vector<char>> violations_per_step(const Program& p, const Trace& t,
                                                          const SecurityTyping& ty) {
  RegSlots slots(p);
  std::vector<std::vector<char>> v(t.steps.size() + 1,
                                   std::vector<char>(slots.count(), 0));
  auto config_at = [&](size_t k) -> const Configuration& {
    return k < t.steps.size() ? t.steps[k].pre : t.final_config;
  };
  for (size_t k = 0; k <= t.steps.size(); ++k) {
    const Configuration& c = config_at(k);
    uint64_t I = c.pc.value;
    if (!p.instr_mapped(I)) continue;
    for (size_t s = 0; s < slots.count(); ++s) {
      Reg r = slots.reg(s);
      if (r.is_zr() || r.is_pc()) continue;
      if (ty.tau_reg[I][s] == Label::PUB && c.read(r).label == Label::SEC) v[k][s] = 1;
    }
  }
  return v;
}

}  // namespace detail

// All taint primitives in the trace, in step order. Throws AnalysisBug if a
// primitive matches no class permitted by the mode.
inline std::vector<TaintFinding> classify_taint_primitives(const Program& p, const Trace& t,
                                                           const SecurityTyping& ty,
                                                           const HardwareMode& mode) {
  using K = Instruction::Kind;
  RegSlots slots(p);
  DynDfg g = build_dynamic_dfg(p, t);
  auto viol = detail::violations_per_step(p, t, ty);

  std::vector<TaintFinding> out;
  // tainted[k][s]: (s,k) is dynamic-dependent on some violation at step < k,
  // or is itself a violation at step <= k (the union used for propagation)
  std::vector<std::vector<char>> dep(t.steps.size() + 1,
                                     std::vector<char>(slots.count(), 0));
  std::vector<std::vector<char>> uni(t.steps.size() + 1,
                                     std::vector<char>(slots.count(), 0));
  for (size_t s = 0; s < slots.count(); ++s) uni[0][s] = viol[0][s];

  for (size_t i = 0; i < t.steps.size(); ++i) {
    const auto& e = g.edges[i];
    for (size_t s : e.nop)
      if (uni[i][s]) dep[i + 1][s] = 1;
    for (auto [src, dst] : e.reg)
      if (uni[i][src]) dep[i + 1][dst] = 1;
    if (e.mem && uni[e.mem_store_step][e.mem_src_slot]) {
      const Instruction& ld = p.at(t.steps[i].instr_addr);
      dep[i + 1][slots.of(ld.dst)] = 1;
    }
    // new violations at step i+1 make I_i a taint primitive
    std::vector<Reg> fresh;
    for (size_t s = 0; s < slots.count(); ++s) {
      uni[i + 1][s] = dep[i + 1][s] | viol[i + 1][s];
      if (viol[i + 1][s] && !dep[i + 1][s]) fresh.push_back(slots.reg(s));
    }
    if (fresh.empty()) continue;
    if (!p.instr_mapped(t.steps[i].instr_addr))
      throw AnalysisBug("taint primitive at an unmapped instruction");
    const Instruction& ins = p.at(t.steps[i].instr_addr);
    bool transient = t.executed_transiently(i);
    for (Reg r : fresh) {
      TaintFinding f;
      f.step = i;
      f.instr = t.steps[i].instr_addr;
      f.violating_register = r;
      if (t.steps[i].cause == Successor::Cause::sls_fall) {
        if (!mode.sls) throw AnalysisBug("straight-line fall-through without sls mode");
        f.cls = TaintClass::LINE;
      } else if (ins.kind == K::Ld) {
        if (!transient)
          throw AnalysisBug("load taint primitive in a sequential context");
        if (mode.psf) {
          f.cls = TaintClass::LOAD;
        } else if (ins.is_nca()) {
          f.cls = TaintClass::NCAL;
        } else if (ins.is_ca_stack()) {
          f.cls = TaintClass::STKL;
        } else {
          // CA global load: must have read from a transient NCA store
          if (!t.steps[i].prov.is_store())
            throw AnalysisBug("CA global load taint primitive sourced by initial memory");
          size_t j = t.steps[i].prov.step;
          const Instruction& st = p.at(t.steps[j].instr_addr);
          if (!st.is_nca() || !t.executed_transiently(j))
            throw AnalysisBug("CA global load taint primitive not fed by a transient NCA store");
          f.cls = TaintClass::NCAS;
        }
      } else if (ins.kind == K::Call || ins.kind == K::Ret) {
        if (!transient)
          throw AnalysisBug("call/return taint primitive in a sequential context");
        auto cc = p.calling_convention.find(t.steps[i].instr_addr);
        if (cc != p.calling_convention.end() && cc->second.count(r))
          throw AnalysisBug("argument register introduced a type violation across a call");
        f.cls = TaintClass::NARG;
      } else {
        throw AnalysisBug(std::string("taint primitive of unclassifiable kind ") +
                          instr_kind_name(ins.kind));
      }
      out.push_back(f);
    }
  }
  return out;
}

// Findings whose violating node reaches (operand, step) in the dynamic DFG,
// most recent first.
inline std::vector<TaintFinding> taint_ancestors(const Program& p, const Trace& t,
                                                 const std::vector<TaintFinding>& findings,
                                                 Reg operand, size_t step) {
  RegSlots slots(p);
  DynDfg g = build_dynamic_dfg(p, t);
  // backward reachability from (operand, step)
  std::vector<std::vector<char>> mark(t.steps.size() + 1,
                                      std::vector<char>(slots.count(), 0));
  mark[step][slots.of(operand)] = 1;
  for (size_t i = step; i-- > 0;) {
    const auto& e = g.edges[i];
    for (size_t s : e.nop)
      if (mark[i + 1][s]) mark[i][s] = 1;
    for (auto [src, dst] : e.reg)
      if (mark[i + 1][dst]) mark[i][src] = 1;
    if (e.mem) {
      const Instruction& ld = p.at(t.steps[i].instr_addr);
      if (mark[i + 1][slots.of(ld.dst)]) mark[e.mem_store_step][e.mem_src_slot] = 1;
    }
  }
  std::vector<TaintFinding> out;
  for (const auto& f : findings) {
    if (f.step + 1 > step) continue;
    if (mark[f.step + 1][slots.of(f.violating_register)]) out.push_back(f);
  }
  std::sort(out.begin(), out.end(),
            [](const TaintFinding& a, const TaintFinding& b) { return a.step > b.step; });
  return out;
}

}  // namespace sct
