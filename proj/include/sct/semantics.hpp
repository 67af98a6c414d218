#pragma once

// ASP execution model: configurations plus the sequential and transient
// transition functions. Transmitters (BNZ, CALL, LD, ST, DIV) expose labeled
// operands as observations and declassify the exposed register afterwards, so
// each secret is recorded at most once per trace.

#include <algorithm>
#include <cassert>

#include "sct/isa.hpp"

namespace sct {

struct HardwareMode {
  bool stl = true;   // store-to-load forwarding speculation
  bool psf = false;  // predictive store forwarding (replaces the STL load rule)
  bool sls = false;  // straight-line speculation on CALL/RET/JMP

  static HardwareMode core() { return {}; }
  static HardwareMode for_variant(Variant v) {
    switch (v) {
      case Variant::core: return {true, false, false};
      case Variant::psf: return {true, true, false};
      case Variant::nostl: return {false, false, false};
      case Variant::sls: return {true, false, true};
    }
    return {};
  }
  std::string str() const {
    std::string s = stl ? "stl" : "nostl";
    s += psf ? ",psf" : ",nopsf";
    s += sls ? ",sls" : ",nosls";
    return s;
  }
};

struct Configuration {
  std::vector<LabeledValue> gprs;
  LabeledValue sp{};
  LabeledValue pc{};
  std::map<uint64_t, LabeledValue> dmem;
  std::vector<std::pair<uint64_t, LabeledValue>> spec_stores;
  std::vector<uint64_t> call_stack;
  bool transient = false;

  friend bool operator==(const Configuration&, const Configuration&) = default;

  LabeledValue read(Reg r) const {
    switch (r.kind) {
      case Reg::Kind::gpr: return gprs[r.index];
      case Reg::Kind::sp: return sp;
      case Reg::Kind::pc: return pc;
      case Reg::Kind::zr: return LabeledValue{0, Label::PUB};
    }
    return {};
  }

  void write(Reg r, LabeledValue v) {
    switch (r.kind) {
      case Reg::Kind::gpr: gprs[r.index] = v; break;
      case Reg::Kind::sp: sp = v; break;
      case Reg::Kind::pc: pc = v; break;
      case Reg::Kind::zr: break;  // writes to zr are rejected at parse time
    }
  }

  // force the label of an exposed transmitter operand to PUB
  void declassify(Reg r) {
    if (r.is_zr() || r.is_pc()) return;
    LabeledValue v = read(r);
    v.label = Label::PUB;
    write(r, v);
  }

  std::string key() const {
    std::string s;
    s.reserve(64);
    auto put = [&](uint64_t v) {
      s.append(reinterpret_cast<const char*>(&v), sizeof v);
    };
    auto putlv = [&](const LabeledValue& v) {
      put(v.value);
      s.push_back(v.label == Label::SEC ? 'S' : 'P');
    };
    for (const auto& g : gprs) putlv(g);
    putlv(sp);
    putlv(pc);
    for (const auto& [a, v] : dmem) { put(a); putlv(v); }
    s.push_back('|');
    for (const auto& [a, v] : spec_stores) { put(a); putlv(v); }
    s.push_back('|');
    for (uint64_t a : call_stack) put(a);
    s.push_back(transient ? 'T' : 'Q');
    return s;
  }
};

inline Configuration initial_configuration(const Program& p) {
  Configuration c;
  c.gprs.assign(p.gpr_count, LabeledValue{0, Label::PUB});
  for (const auto& [r, v] : p.reg_init) {
    if (r.is_gpr()) c.gprs[r.index] = LabeledValue{p.wrap(v), Label::PUB};
  }
  c.sp = LabeledValue{p.initial_sp(), Label::PUB};
  if (auto it = p.reg_init.find(Reg::sp()); it != p.reg_init.end())
    c.sp = LabeledValue{p.wrap(it->second), Label::PUB};
  c.pc = LabeledValue{0, Label::PUB};
  for (const auto& [a, v] : p.policy) c.dmem[a] = v;
  return c;
}

// Where a loaded value came from, relative to the current configuration.
struct LoadSource {
  enum class Kind : uint8_t { none, dmem, store_entry };
  Kind kind = Kind::none;
  size_t index = 0;  // spec_stores index when kind == store_entry
};

// One successor of a configuration under delta_seq or delta_t.
struct Successor {
  Configuration config;
  Observation obs;
  bool transient_rule = false;  // produced by delta_t
  bool halted = false;          // rule-level halt: config == predecessor
  LoadSource load_src{};        // meaningful for LD only
  enum class Cause : uint8_t {
    normal, pht, btb, rsb, stl_forward, psf_forward, fault_zero, sls_fall
  };
  Cause cause = Cause::normal;
};

namespace detail {

inline LabeledValue op_apply(const Program& p, Opcode op,
                             const std::vector<LabeledValue>& vs) {
  Label l = Label::PUB;
  for (const auto& v : vs) l = join(l, v.label);
  uint64_t r = 0;
  switch (op) {
    case Opcode::MOV: r = vs.at(0).value; break;
    case Opcode::CONST: r = vs.at(0).value; break;
    case Opcode::ADD: r = vs.at(0).value + vs.at(1).value; break;
    case Opcode::SUB: r = vs.at(0).value - vs.at(1).value; break;
    case Opcode::XOR: r = vs.at(0).value ^ vs.at(1).value; break;
    case Opcode::AND: r = vs.at(0).value & vs.at(1).value; break;
    case Opcode::OR: r = vs.at(0).value | vs.at(1).value; break;
    case Opcode::MUL: r = vs.at(0).value * vs.at(1).value; break;
    case Opcode::MAX: r = std::max(vs.at(0).value, vs.at(1).value); break;
    case Opcode::MIN: r = std::min(vs.at(0).value, vs.at(1).value); break;
  }
  return LabeledValue{p.wrap(r), l};
}

// effective address of a LD/ST: R(base) + d with d public
inline LabeledValue effective_address(const Program& p, const Configuration& c,
                                      const Instruction& ins) {
  LabeledValue base = c.read(ins.base);
  return LabeledValue{p.wrap(base.value + p.wrap_signed(ins.disp)), base.label};
}

inline void advance_pc(const Program& p, Configuration& c) {
  c.pc = LabeledValue{p.wrap(c.pc.value + 1), Label::PUB};
}

}  // namespace detail

// delta_seq: exactly one successor. Halting cases return the configuration
// unchanged together with the rule's observation.
inline Successor step_sequential(const Configuration& c, const Program& p) {
  using K = Instruction::Kind;
  Successor s;
  s.config = c;
  uint64_t I = c.pc.value;
  if (!p.instr_mapped(I)) {
    s.obs = Observation::none();
    s.halted = true;
    return s;
  }
  const Instruction& ins = p.at(I);
  switch (ins.kind) {
    case K::Jmp: {
      s.config.pc = LabeledValue{p.wrap(I + 1 + p.wrap_signed(ins.disp)), Label::PUB};
      s.obs = Observation::none();
      break;
    }
    case K::Bnz: {
      LabeledValue v = c.read(ins.base);
      s.obs = Observation::bnz(v);
      uint64_t target = v.value != 0 ? p.wrap(I + 1 + p.wrap_signed(ins.disp)) : p.wrap(I + 1);
      s.config.pc = LabeledValue{target, Label::PUB};
      s.config.declassify(ins.base);
      break;
    }
    case K::Call: {
      LabeledValue t = c.read(ins.base);
      s.obs = Observation::call(t);
      bool ok = p.instr_mapped(t.value) && p.at(t.value).kind == K::Endbr;
      if (!ok) {  // CFI violation: halt
        s.halted = true;
        s.config = c;
        break;
      }
      s.config.call_stack.push_back(p.wrap(I + 1));
      s.config.pc = LabeledValue{t.value, Label::PUB};
      s.config.declassify(ins.base);
      break;
    }
    case K::Ret: {
      s.obs = Observation::none();
      if (c.call_stack.empty()) {
        s.halted = true;
        break;
      }
      uint64_t target = s.config.call_stack.back();
      s.config.call_stack.pop_back();
      s.config.pc = LabeledValue{target, Label::PUB};
      break;
    }
    case K::Endbr: {
      detail::advance_pc(p, s.config);
      s.obs = Observation::none();
      break;
    }
    case K::Lfence: {
      s.obs = Observation::none();
      if (c.transient) {
        s.halted = true;
        break;
      }
      for (const auto& [a, v] : c.spec_stores) s.config.dmem[a] = v;
      s.config.spec_stores.clear();
      detail::advance_pc(p, s.config);
      break;
    }
    case K::Ld: {
      LabeledValue al = detail::effective_address(p, c, ins);
      s.obs = Observation::ld(al);
      if (!p.data_mapped(al.value)) {  // fault: halt
        s.halted = true;
        break;
      }
      // read from the most recent same-address store, else data memory
      LabeledValue v{};
      s.load_src = LoadSource{LoadSource::Kind::dmem, 0};
      bool found = false;
      for (size_t i = c.spec_stores.size(); i-- > 0;) {
        if (c.spec_stores[i].first == al.value) {
          v = c.spec_stores[i].second;
          s.load_src = LoadSource{LoadSource::Kind::store_entry, i};
          found = true;
          break;
        }
      }
      if (!found) v = c.dmem.at(al.value);
      s.config.write(ins.dst, v);
      detail::advance_pc(p, s.config);
      s.config.declassify(ins.base);
      break;
    }
    case K::St: {
      LabeledValue al = detail::effective_address(p, c, ins);
      s.obs = Observation::st(al);
      if (!p.data_mapped(al.value)) {  // fault: halt
        s.halted = true;
        break;
      }
      s.config.spec_stores.emplace_back(al.value, c.read(ins.aux));
      detail::advance_pc(p, s.config);
      s.config.declassify(ins.base);
      break;
    }
    case K::Op: {
      std::vector<LabeledValue> vs;
      for (const auto& o : ins.inputs)
        vs.push_back(o.is_imm ? LabeledValue{p.wrap_signed(o.imm), Label::PUB}
                              : c.read(o.reg));
      s.config.write(ins.dst, detail::op_apply(p, ins.op, vs));
      detail::advance_pc(p, s.config);
      s.obs = Observation::none();
      break;
    }
    case K::Div: {
      LabeledValue a = c.read(ins.base), b = c.read(ins.aux);
      s.obs = Observation::div(a, b);
      uint64_t q = b.value == 0 ? 0 : a.value / b.value;
      // operands are declassified before use, so the quotient is public
      s.config.write(ins.dst, LabeledValue{p.wrap(q), Label::PUB});
      detail::advance_pc(p, s.config);
      s.config.declassify(ins.base);
      s.config.declassify(ins.aux);
      break;
    }
  }
  return s;
}

// delta_t: the (possibly empty) set of transient successors, deduplicated by
// (configuration, observation) with stable source preference: data memory
// first, then store entries in list order.
inline std::vector<Successor> step_transient(const Configuration& c, const Program& p,
                                             const HardwareMode& mode) {
  using K = Instruction::Kind;
  std::vector<Successor> out;
  uint64_t I = c.pc.value;
  if (!p.instr_mapped(I)) return out;
  const Instruction& ins = p.at(I);
  auto push = [&](Successor s) {
    s.transient_rule = true;
    s.config.transient = true;
    for (const auto& have : out)
      if (have.config == s.config && have.obs == s.obs) return;
    out.push_back(std::move(s));
  };
  auto sls_fall = [&](Observation obs) {
    Successor s;
    s.config = c;
    detail::advance_pc(p, s.config);
    s.obs = obs;
    s.cause = Successor::Cause::sls_fall;
    push(std::move(s));
  };
  switch (ins.kind) {
    case K::Bnz: {
      LabeledValue v = c.read(ins.base);
      // mispredicted direction: the opposite of the sequential one
      uint64_t target = v.value != 0 ? p.wrap(I + 1) : p.wrap(I + 1 + p.wrap_signed(ins.disp));
      Successor s;
      s.config = c;
      s.config.pc = LabeledValue{target, Label::PUB};
      s.config.declassify(ins.base);
      s.obs = Observation::bnz(v);
      s.cause = Successor::Cause::pht;
      push(std::move(s));
      break;
    }
    case K::Call: {
      LabeledValue t = c.read(ins.base);
      for (uint64_t e : p.endbr_addrs()) {
        if (e == t.value) continue;  // the sequential target is excluded
        Successor s;
        s.config = c;
        s.config.call_stack.push_back(p.wrap(I + 1));
        s.config.pc = LabeledValue{e, Label::PUB};
        s.config.declassify(ins.base);
        s.obs = Observation::call(t);
        s.cause = Successor::Cause::btb;
        push(std::move(s));
      }
      if (mode.sls) sls_fall(Observation::call(t));
      break;
    }
    case K::Ret: {
      if (!c.call_stack.empty()) {
        uint64_t seq_target = c.call_stack.back();
        for (uint64_t site : p.callsite_addrs()) {
          if (site == seq_target) continue;
          Successor s;
          s.config = c;
          s.config.call_stack.pop_back();
          s.config.pc = LabeledValue{site, Label::PUB};
          s.obs = Observation::none();
          s.cause = Successor::Cause::rsb;
          push(std::move(s));
        }
      }
      if (mode.sls) sls_fall(Observation::none());
      break;
    }
    case K::Jmp: {
      if (mode.sls) sls_fall(Observation::none());
      break;
    }
    case K::Ld: {
      LabeledValue al = detail::effective_address(p, c, ins);
      Observation obs = Observation::ld(al);
      if (!p.data_mapped(al.value)) {
        // faulting load: forwards zero
        Successor s;
        s.config = c;
        s.config.write(ins.dst, LabeledValue{0, Label::PUB});
        detail::advance_pc(p, s.config);
        s.config.declassify(ins.base);
        s.obs = obs;
        s.cause = Successor::Cause::fault_zero;
        s.load_src = LoadSource{LoadSource::Kind::dmem, 0};
        push(std::move(s));
        break;
      }
      auto emit = [&](LabeledValue v, LoadSource src, Successor::Cause cause) {
        Successor s;
        s.config = c;
        s.config.write(ins.dst, v);
        detail::advance_pc(p, s.config);
        s.config.declassify(ins.base);
        s.obs = obs;
        s.load_src = src;
        s.cause = cause;
        push(std::move(s));
      };
      if (mode.psf) {
        // PSF: data memory or any uncommitted store at any address, except
        // the value the sequential transition would return
        Successor seq = step_sequential(c, p);
        LabeledValue vseq = seq.config.read(ins.dst);
        if (c.dmem.at(al.value) != vseq)
          emit(c.dmem.at(al.value), {LoadSource::Kind::dmem, 0},
               Successor::Cause::psf_forward);
        for (size_t i = 0; i < c.spec_stores.size(); ++i)
          if (c.spec_stores[i].second != vseq)
            emit(c.spec_stores[i].second, {LoadSource::Kind::store_entry, i},
                 Successor::Cause::psf_forward);
      } else if (mode.stl) {
        // STL: data memory or any same-address uncommitted store
        emit(c.dmem.at(al.value), {LoadSource::Kind::dmem, 0},
             Successor::Cause::stl_forward);
        for (size_t i = 0; i < c.spec_stores.size(); ++i)
          if (c.spec_stores[i].first == al.value)
            emit(c.spec_stores[i].second, {LoadSource::Kind::store_entry, i},
                 Successor::Cause::stl_forward);
      }
      break;
    }
    case K::St: {
      LabeledValue al = detail::effective_address(p, c, ins);
      if (!p.data_mapped(al.value)) {
        // faulting store executes as a no-op out of order
        Successor s;
        s.config = c;
        detail::advance_pc(p, s.config);
        s.config.declassify(ins.base);
        s.obs = Observation::st(al);
        s.cause = Successor::Cause::fault_zero;
        push(std::move(s));
      }
      break;
    }
    case K::Endbr:
    case K::Lfence:
    case K::Op:
    case K::Div:
      break;
  }
  return out;
}

// Speculative successor set: the sequential successor plus all transient ones.
inline std::vector<Successor> successors(const Configuration& c, const Program& p,
                                         const HardwareMode& mode) {
  std::vector<Successor> out;
  out.push_back(step_sequential(c, p));
  for (auto& s : step_transient(c, p, mode)) {
    // a transient successor may coincide with the sequential one only if it
    // also carries the transient bit, so no dedup against out[0] is needed
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sct
