#pragma once

// Test-only reference enumerator for the execution model. Written directly
// from the transition rules as a plain recursive enumeration, independent of
// the library's successor/explore machinery. Used to cross-check the
// production explorer: for small word widths the two trace sets must match
// exactly.

#include <set>
#include <sstream>
#include <string>

#include "sct/isa.hpp"
#include "sct/semantics.hpp"

namespace oracle {

using sct::Configuration;
using sct::HardwareMode;
using sct::Instruction;
using sct::Label;
using sct::LabeledValue;
using sct::Observation;
using sct::Opcode;
using sct::Program;
using sct::Reg;

inline std::string show_config(const Configuration& c) {
  std::ostringstream o;
  auto lv = [&](const LabeledValue& v) {
    o << v.value << (v.label == Label::SEC ? "S" : "P");
  };
  o << "R[";
  for (const auto& g : c.gprs) { lv(g); o << " "; }
  o << "sp:"; lv(c.sp);
  o << " pc:"; lv(c.pc);
  o << "] D{";
  for (const auto& [a, v] : c.dmem) { o << a << ":"; lv(v); o << " "; }
  o << "} S[";
  for (const auto& [a, v] : c.spec_stores) { o << a << ":"; lv(v); o << " "; }
  o << "] CS[";
  for (auto a : c.call_stack) o << a << " ";
  o << "] " << (c.transient ? "T" : "SEQ");
  return o.str();
}

// one (config, observation, via-transient-rule) outcome
struct Out {
  Configuration c;
  Observation o;
  bool t;
};

inline uint64_t wrap(const Program& p, uint64_t v) { return v & p.mask(); }

inline LabeledValue get(const Configuration& c, Reg r) {
  if (r.is_zr()) return {0, Label::PUB};
  if (r.is_sp()) return c.sp;
  if (r.is_pc()) return c.pc;
  return c.gprs[r.index];
}

inline void set(Configuration& c, Reg r, LabeledValue v) {
  if (r.is_sp()) c.sp = v;
  else if (r.is_pc()) c.pc = v;
  else if (r.is_gpr()) c.gprs[r.index] = v;
}

inline void declass(Configuration& c, Reg r) {
  if (r.is_zr() || r.is_pc()) return;
  auto v = get(c, r);
  v.label = Label::PUB;
  set(c, r, v);
}

inline void setpc(const Program& p, Configuration& c, uint64_t target) {
  c.pc = {wrap(p, target), Label::PUB};
}

// all outcomes of one step from c, sequential first; (config, obs) duplicates
// among the transient outcomes removed
inline std::vector<Out> step(const Program& p, const Configuration& c,
                             const HardwareMode& hw, bool& halted) {
  using K = Instruction::Kind;
  std::vector<Out> outs;
  halted = false;
  uint64_t I = c.pc.value;
  if (I >= p.instrs.size()) {
    halted = true;
    outs.push_back({c, Observation::none(), false});
    return outs;
  }
  const Instruction& ins = p.instrs[I];
  auto addt = [&](Configuration cc, Observation oo) {
    cc.transient = true;
    for (const auto& e : outs)
      if (e.t && e.c == cc && e.o == oo) return;
    outs.push_back({std::move(cc), oo, true});
  };
  auto sls = [&](Observation oo) {
    Configuration cc = c;
    setpc(p, cc, I + 1);
    addt(std::move(cc), oo);
  };
  switch (ins.kind) {
    case K::Jmp: {
      Configuration cc = c;
      setpc(p, cc, I + 1 + ins.disp);
      outs.push_back({cc, Observation::none(), false});
      if (hw.sls) sls(Observation::none());
      break;
    }
    case K::Bnz: {
      auto v = get(c, ins.base);
      bool taken = v.value != 0;
      Observation o = Observation::bnz(v);
      Configuration cs = c;
      setpc(p, cs, taken ? I + 1 + ins.disp : I + 1);
      declass(cs, ins.base);
      outs.push_back({cs, o, false});
      Configuration ct = c;
      setpc(p, ct, taken ? I + 1 : I + 1 + ins.disp);
      declass(ct, ins.base);
      addt(std::move(ct), o);
      break;
    }
    case K::Call: {
      auto t = get(c, ins.base);
      Observation o = Observation::call(t);
      bool valid = t.value < p.instrs.size() && p.instrs[t.value].kind == K::Endbr;
      if (valid) {
        Configuration cs = c;
        cs.call_stack.push_back(wrap(p, I + 1));
        setpc(p, cs, t.value);
        declass(cs, ins.base);
        outs.push_back({cs, o, false});
      } else {
        halted = true;
        outs.push_back({c, o, false});
      }
      for (uint64_t e = 0; e < p.instrs.size(); ++e) {
        if (p.instrs[e].kind != K::Endbr || e == t.value) continue;
        Configuration ct = c;
        ct.call_stack.push_back(wrap(p, I + 1));
        setpc(p, ct, e);
        declass(ct, ins.base);
        addt(std::move(ct), o);
      }
      if (hw.sls) sls(o);
      // a CFI-violating call still has transient outcomes; the trace from the
      // sequential side simply ends here
      break;
    }
    case K::Ret: {
      if (c.call_stack.empty()) {
        halted = true;
        outs.push_back({c, Observation::none(), false});
      } else {
        uint64_t target = c.call_stack.back();
        Configuration cs = c;
        cs.call_stack.pop_back();
        setpc(p, cs, target);
        outs.push_back({cs, Observation::none(), false});
        for (uint64_t a = 1; a < p.instrs.size() + 1; ++a) {
          if (p.instrs[a - 1].kind != K::Call) continue;
          if (a == target) continue;
          Configuration ct = c;
          ct.call_stack.pop_back();
          setpc(p, ct, a);
          addt(std::move(ct), Observation::none());
        }
      }
      if (hw.sls) sls(Observation::none());
      break;
    }
    case K::Endbr: {
      Configuration cc = c;
      setpc(p, cc, I + 1);
      outs.push_back({cc, Observation::none(), false});
      break;
    }
    case K::Lfence: {
      if (c.transient) {
        halted = true;
        outs.push_back({c, Observation::none(), false});
      } else {
        Configuration cc = c;
        for (const auto& [a, v] : c.spec_stores) cc.dmem[a] = v;
        cc.spec_stores.clear();
        setpc(p, cc, I + 1);
        outs.push_back({cc, Observation::none(), false});
      }
      break;
    }
    case K::Ld: {
      auto base = get(c, ins.base);
      LabeledValue al{wrap(p, base.value + static_cast<uint64_t>(ins.disp)), base.label};
      Observation o = Observation::ld(al);
      bool mapped = p.data_addrs.count(al.value) != 0;
      if (!mapped) {
        halted = true;
        outs.push_back({c, o, false});
        Configuration ct = c;
        set(ct, ins.dst, {0, Label::PUB});
        setpc(p, ct, I + 1);
        declass(ct, ins.base);
        addt(std::move(ct), o);
        break;
      }
      // sequential: most recent same-address store, else memory
      LabeledValue vseq = c.dmem.at(al.value);
      for (const auto& [a, v] : c.spec_stores)
        if (a == al.value) vseq = v;
      Configuration cs = c;
      set(cs, ins.dst, vseq);
      setpc(p, cs, I + 1);
      declass(cs, ins.base);
      outs.push_back({cs, o, false});
      auto emit_t = [&](LabeledValue v) {
        Configuration ct = c;
        set(ct, ins.dst, v);
        setpc(p, ct, I + 1);
        declass(ct, ins.base);
        addt(std::move(ct), o);
      };
      if (hw.psf) {
        if (c.dmem.at(al.value) != vseq) emit_t(c.dmem.at(al.value));
        for (const auto& [a, v] : c.spec_stores)
          if (v != vseq) emit_t(v);
      } else if (hw.stl) {
        emit_t(c.dmem.at(al.value));
        for (const auto& [a, v] : c.spec_stores)
          if (a == al.value) emit_t(v);
      }
      break;
    }
    case K::St: {
      auto base = get(c, ins.base);
      LabeledValue al{wrap(p, base.value + static_cast<uint64_t>(ins.disp)), base.label};
      Observation o = Observation::st(al);
      bool mapped = p.data_addrs.count(al.value) != 0;
      if (mapped) {
        Configuration cs = c;
        cs.spec_stores.emplace_back(al.value, get(c, ins.aux));
        setpc(p, cs, I + 1);
        declass(cs, ins.base);
        outs.push_back({cs, o, false});
      } else {
        halted = true;
        outs.push_back({c, o, false});
        Configuration ct = c;
        setpc(p, ct, I + 1);
        declass(ct, ins.base);
        addt(std::move(ct), o);
      }
      break;
    }
    case K::Op: {
      Label l = Label::PUB;
      std::vector<uint64_t> vals;
      for (const auto& in : ins.inputs) {
        if (in.is_imm) {
          vals.push_back(wrap(p, static_cast<uint64_t>(in.imm)));
        } else {
          auto v = get(c, in.reg);
          vals.push_back(v.value);
          l = sct::join(l, v.label);
        }
      }
      uint64_t r = 0;
      switch (ins.op) {
        case Opcode::MOV: case Opcode::CONST: r = vals[0]; break;
        case Opcode::ADD: r = vals[0] + vals[1]; break;
        case Opcode::SUB: r = vals[0] - vals[1]; break;
        case Opcode::XOR: r = vals[0] ^ vals[1]; break;
        case Opcode::AND: r = vals[0] & vals[1]; break;
        case Opcode::OR: r = vals[0] | vals[1]; break;
        case Opcode::MUL: r = vals[0] * vals[1]; break;
        case Opcode::MAX: r = vals[0] > vals[1] ? vals[0] : vals[1]; break;
        case Opcode::MIN: r = vals[0] < vals[1] ? vals[0] : vals[1]; break;
      }
      Configuration cc = c;
      set(cc, ins.dst, {wrap(p, r), l});
      setpc(p, cc, I + 1);
      outs.push_back({cc, Observation::none(), false});
      break;
    }
    case K::Div: {
      auto a = get(c, ins.base), b = get(c, ins.aux);
      Observation o = Observation::div(a, b);
      Configuration cc = c;
      set(cc, ins.dst, {wrap(p, b.value == 0 ? 0 : a.value / b.value), Label::PUB});
      setpc(p, cc, I + 1);
      declass(cc, ins.base);
      declass(cc, ins.aux);
      outs.push_back({cc, o, false});
      break;
    }
  }
  return outs;
}

// All maximal traces, serialized: one line per step "addr kind obs | config".
inline void enumerate_rec(const Program& p, const HardwareMode& hw,
                          const Configuration& c, std::string& prefix,
                          std::multiset<std::string>& out, size_t depth,
                          size_t max_depth) {
  if (depth >= max_depth) {
    out.insert(prefix + "...bound\n");
    return;
  }
  bool halted = false;
  auto outs = step(p, c, hw, halted);
  for (const auto& e : outs) {
    std::ostringstream line;
    line << c.pc.value << " " << (e.t ? "t" : "s") << " " << e.o.str() << " | "
         << show_config(e.c) << "\n";
    size_t mark = prefix.size();
    prefix += line.str();
    bool this_halts = !e.t && halted;
    if (this_halts)
      out.insert(prefix);
    else
      enumerate_rec(p, hw, e.c, prefix, out, depth + 1, max_depth);
    prefix.resize(mark);
  }
}

inline std::multiset<std::string> enumerate_traces(const Program& p, const HardwareMode& hw,
                                                   size_t max_depth = 64) {
  std::multiset<std::string> out;
  std::string prefix;
  enumerate_rec(p, hw, sct::initial_configuration(p), prefix, out, 0, max_depth);
  return out;
}

}  // namespace oracle
