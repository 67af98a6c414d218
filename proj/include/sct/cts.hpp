#pragma once

// Static constant-time discipline: procedure partitioning, well-formedness,
// security-typing inference and the typing checks. The inference is a forward
// join-over-paths fixed point; global and stack variable types are raised by
// the stores that reach them, so the result is the least typing consistent
// with the policy.

#include <array>
#include <deque>

#include "sct/explore.hpp"
#include "sct/isa.hpp"

namespace sct {

struct TransmitterSet {
  bool bnz = true;
  bool call = true;
  bool ld = true;
  bool st = true;
  bool div = true;

  // register operands exposed by instruction `ins` when it is a transmitter
  std::vector<Reg> sensitive_operands(const Instruction& ins) const {
    using K = Instruction::Kind;
    switch (ins.kind) {
      case K::Bnz: return bnz ? std::vector<Reg>{ins.base} : std::vector<Reg>{};
      case K::Call: return call ? std::vector<Reg>{ins.base} : std::vector<Reg>{};
      case K::Ld: return ld ? std::vector<Reg>{ins.base} : std::vector<Reg>{};
      case K::St: return st ? std::vector<Reg>{ins.base} : std::vector<Reg>{};
      case K::Div: return div ? std::vector<Reg>{ins.base, ins.aux} : std::vector<Reg>{};
      default: return {};
    }
  }
  bool is_transmitter(const Instruction& ins) const {
    return !sensitive_operands(ins).empty();
  }
};

struct Procedure {
  std::string name;
  size_t index = 0;        // position in the program's procedure list
  uint64_t entry = 0;      // address of the unique ENDBR
  uint64_t first = 0;
  uint64_t count = 0;
  uint64_t frame_size = 0;

  bool contains(uint64_t addr) const { return addr >= first && addr < first + count; }
};

// Intraprocedural successors.
inline std::vector<uint64_t> succs(const Program& p, uint64_t I) {
  using K = Instruction::Kind;
  const Instruction& ins = p.at(I);
  std::vector<uint64_t> out;
  auto add = [&](int64_t t) {
    if (t >= 0 && p.instr_mapped(static_cast<uint64_t>(t)))
      out.push_back(static_cast<uint64_t>(t));
  };
  switch (ins.kind) {
    case K::Ret: break;
    case K::Bnz:
      add(static_cast<int64_t>(I) + 1);
      if (ins.disp != 0) add(static_cast<int64_t>(I) + 1 + ins.disp);
      break;
    case K::Jmp:
      add(static_cast<int64_t>(I) + 1 + ins.disp);
      break;
    default:
      add(static_cast<int64_t>(I) + 1);
      break;
  }
  return out;
}

struct Violation {
  std::string rule;     // WF.1..WF.5, TYP.1..TYP.9, CT
  uint64_t addr = 0;    // instruction address or trace step, by rule
  std::string message;
};

struct CtsReport {
  bool pass = true;
  std::vector<Violation> violations;
  std::vector<std::string> assumptions;
  std::string coverage;  // TYP.1 / CT coverage mode

  void add(const std::string& rule, uint64_t addr, const std::string& msg) {
    pass = false;
    violations.push_back({rule, addr, msg});
  }
  void merge(const CtsReport& o) {
    pass = pass && o.pass;
    violations.insert(violations.end(), o.violations.begin(), o.violations.end());
    for (const auto& a : o.assumptions) assumptions.push_back(a);
    if (coverage.empty()) coverage = o.coverage;
  }
};

// WF.1: the program is exactly its declared procedures, each the
// succs-closure of its unique ENDBR.
inline std::vector<Procedure> partition_procedures(const Program& p, CtsReport& report) {
  std::vector<Procedure> out;
  std::vector<int> owner(p.instrs.size(), -1);
  for (size_t pi = 0; pi < p.procs.size(); ++pi) {
    const auto& d = p.procs[pi];
    for (uint64_t a = d.first; a < d.first + d.count; ++a) owner[a] = static_cast<int>(pi);
  }
  for (uint64_t a = 0; a < p.instrs.size(); ++a)
    if (owner[a] < 0) report.add("WF.1", a, "instruction not inside any procedure");

  for (size_t pi = 0; pi < p.procs.size(); ++pi) {
    const auto& d = p.procs[pi];
    Procedure proc;
    proc.name = d.name;
    proc.index = pi;
    proc.first = d.first;
    proc.count = d.count;
    proc.frame_size = d.frame_size;
    if (d.count == 0) {
      report.add("WF.1", d.first, "procedure '" + d.name + "' is empty");
      out.push_back(proc);
      continue;
    }
    size_t endbrs = 0;
    for (uint64_t a = d.first; a < d.first + d.count; ++a)
      if (p.at(a).kind == Instruction::Kind::Endbr) { ++endbrs; proc.entry = a; }
    if (endbrs != 1) {
      report.add("WF.1", d.first,
                 "procedure '" + d.name + "' has " + std::to_string(endbrs) +
                     " ENDBR instructions (need exactly 1)");
      out.push_back(proc);
      continue;
    }
    if (p.at(d.first).kind != Instruction::Kind::Endbr)
      report.add("WF.1", d.first, "procedure '" + d.name + "' does not start at its ENDBR");
    // closure under intraprocedural succession
    std::set<uint64_t> seen;
    std::deque<uint64_t> work{proc.entry};
    while (!work.empty()) {
      uint64_t a = work.front();
      work.pop_front();
      if (!seen.insert(a).second) continue;
      if (owner[a] != static_cast<int>(pi)) {
        report.add("WF.1", a,
                   "control flow from '" + d.name + "' reaches another procedure's body");
        continue;
      }
      for (uint64_t s : succs(p, a)) work.push_back(s);
    }
    for (uint64_t a = d.first; a < d.first + d.count; ++a)
      if (!seen.count(a) && owner[a] == static_cast<int>(pi))
        report.add("WF.1", a, "instruction unreachable from the procedure entry");
    out.push_back(proc);
  }
  return out;
}

inline std::vector<Procedure> partition_procedures(const Program& p) {
  CtsReport r;
  auto procs = partition_procedures(p, r);
  if (!r.pass) {
    std::string msg = "procedure partition failed:";
    for (const auto& v : r.violations) msg += " [" + v.message + "]";
    throw AnalysisBug(msg);
  }
  return procs;
}

// WF.2, WF.3, WF.5 (WF.1 is the partition; WF.4 is a convention consumed by
// the typing rules and recorded as an assumption).
inline CtsReport check_wf(const Program& p, const std::vector<Procedure>& procs,
                          size_t max_steps = 4096) {
  using K = Instruction::Kind;
  CtsReport r;
  r.assumptions.push_back(
      "WF.4: no callee-saved registers; callers treat all gprs as clobbered");

  // WF.2: every CALL/RET carries a calling-convention entry
  for (uint64_t a = 0; a < p.instrs.size(); ++a) {
    auto k = p.at(a).kind;
    if (k == K::Call || k == K::Ret) {
      if (!p.calling_convention.count(a))
        r.add("WF.2", a, "missing .args declaration for this CALL/RET");
    }
  }

  // WF.3 (static): stack disjoint from globals, stack zero-initialized
  for (const auto& d : p.data) {
    for (size_t i = 0; i < d.init.size(); ++i)
      if (p.stack_region.count(d.addr + i))
        r.add("WF.3", d.addr + i, "global '" + d.name + "' lies in stack memory");
  }
  for (uint64_t a = 0; a < p.instrs.size(); ++a) {
    const auto& ins = p.at(a);
    if (ins.is_ca_global() && p.stack_region.count(p.wrap_signed(ins.disp)))
      r.add("WF.3", a, "CA global access targets the stack");
  }
  for (uint64_t a : p.stack_region) {
    auto it = p.policy.find(a);
    if (it == p.policy.end()) continue;  // unmapped guard cell
    if (it->second != LabeledValue{0, Label::PUB})
      r.add("WF.3", a, "stack address not zero-initialized public");
  }

  // procedure-shape checks (part of the WF.1 procedure definition)
  for (const auto& proc : procs) {
    for (uint64_t a = proc.first; a < proc.first + proc.count; ++a) {
      const auto& ins = p.at(a);
      if (ins.is_ca_stack()) {
        if (ins.disp < 0 || static_cast<uint64_t>(ins.disp) >= proc.frame_size)
          r.add("WF.1", a, "CA stack access offset outside [0, frame)");
      }
      if (ins.kind == K::Op && (ins.op == Opcode::ADD || ins.op == Opcode::SUB) &&
          ins.dst.is_sp() && ins.inputs.size() == 2 && !ins.inputs[0].is_imm &&
          ins.inputs[0].reg.is_sp() && ins.inputs[1].is_imm) {
        if (static_cast<uint64_t>(ins.inputs[1].imm) != proc.frame_size)
          r.add("WF.1", a, "frame adjustment does not match the declared frame size");
      }
    }
  }

  // WF.3 (dynamic) and WF.5 over the sequential trace
  Trace t = sequential_trace(p, max_steps);
  for (size_t i = 0; i < t.steps.size(); ++i) {
    const auto& st = t.steps[i];
    const Configuration& c = st.pre;
    if (c.sp.label != Label::PUB)
      r.add("WF.3", i, "stack pointer carries a secret label at step " + std::to_string(i));
    if (!p.instr_mapped(st.instr_addr)) continue;
    const auto& ins = p.at(st.instr_addr);
    if (ins.is_memory_access()) {
      uint64_t addr = p.wrap(c.read(ins.base).value + p.wrap_signed(ins.disp));
      if (!p.data_mapped(addr) && !p.stack_region.count(addr))
        r.add("WF.5", i,
              "sequential access to unmapped non-stack address " + std::to_string(addr) +
                  " at step " + std::to_string(i));
      if (ins.is_ca_stack()) {
        if (p.stack_region.empty())
          r.add("WF.3", i, "CA stack access without a declared stack");
        else if (!p.stack_region.count(c.sp.value))
          r.add("WF.3", i,
                "SP outside the data stack at step " + std::to_string(i));
      }
    }
  }
  if (!p.stack_region.empty()) {
    for (size_t i = 0; i < t.steps.size(); ++i) {
      if (!p.stack_region.count(t.steps[i].pre.sp.value)) {
        r.add("WF.3", i, "SP outside the data stack at step " + std::to_string(i));
        break;
      }
    }
  }
  return r;
}

// reg -> dense slot for typing vectors
struct RegSlots {
  unsigned gprs;
  explicit RegSlots(const Program& p) : gprs(p.gpr_count) {}
  size_t count() const { return gprs + 3; }
  size_t of(Reg r) const {
    switch (r.kind) {
      case Reg::Kind::gpr: return r.index;
      case Reg::Kind::sp: return gprs;
      case Reg::Kind::pc: return gprs + 1;
      case Reg::Kind::zr: return gprs + 2;
    }
    return gprs + 2;
  }
  Reg reg(size_t slot) const {
    if (slot < gprs) return Reg::gpr(static_cast<unsigned>(slot));
    if (slot == gprs) return Reg::sp();
    if (slot == gprs + 1) return Reg::pc();
    return Reg::zr();
  }
};

struct SecurityTyping {
  std::map<uint64_t, Label> tau_glob;                       // by data address
  std::map<std::pair<size_t, uint64_t>, Label> tau_stk;     // (proc index, offset)
  std::vector<std::vector<Label>> tau_reg;                  // [instr addr][reg slot]

  Label reg_at(const RegSlots& slots, Reg r, uint64_t addr) const {
    if (r.is_zr() || r.is_pc()) return Label::PUB;
    return tau_reg[addr][slots.of(r)];
  }
  Label glob(uint64_t a) const {
    auto it = tau_glob.find(a);
    return it == tau_glob.end() ? Label::PUB : it->second;
  }
  Label stk(size_t proc, uint64_t off) const {
    auto it = tau_stk.find({proc, off});
    return it == tau_stk.end() ? Label::PUB : it->second;
  }
};

struct InferenceResult {
  bool ok = true;
  SecurityTyping typing;
  std::vector<Violation> violations;  // TYP.6 breaches
};

inline InferenceResult infer_security_typing(const Program& p,
                                             const std::vector<Procedure>& procs) {
  using K = Instruction::Kind;
  RegSlots slots(p);
  InferenceResult res;
  SecurityTyping& ty = res.typing;
  ty.tau_reg.assign(p.instrs.size(), std::vector<Label>(slots.count(), Label::PUB));

  // M_G seeded from the policy
  for (uint64_t a = 0; a < p.instrs.size(); ++a) {
    const auto& ins = p.at(a);
    if (ins.is_ca_global()) {
      uint64_t addr = p.wrap_signed(ins.disp);
      auto it = p.policy.find(addr);
      ty.tau_glob[addr] = it == p.policy.end() ? Label::PUB : it->second.label;
    }
  }

  std::vector<int> proc_of(p.instrs.size(), -1);
  for (const auto& proc : procs)
    for (uint64_t a = proc.first; a < proc.first + proc.count; ++a)
      proc_of[a] = static_cast<int>(proc.index);

  const bool secrets = p.any_secret_data();
  auto nca_load_label = [&](const Instruction& ins) {
    return ins.pub_hint ? Label::PUB : (secrets ? Label::SEC : Label::PUB);
  };

  // transfer: typing after executing I, given the typing at I
  auto transfer = [&](uint64_t I, std::vector<Label> t) {
    const Instruction& ins = p.at(I);
    auto declass = [&](Reg r) {
      if (!r.is_zr() && !r.is_pc()) t[slots.of(r)] = Label::PUB;
    };
    switch (ins.kind) {
      case K::Bnz: declass(ins.base); break;
      case K::Call: declass(ins.base); break;
      case K::Ld: {
        Label l;
        if (ins.is_ca_global()) l = ty.glob(p.wrap_signed(ins.disp));
        else if (ins.is_ca_stack())
          l = ty.stk(static_cast<size_t>(proc_of[I]), static_cast<uint64_t>(ins.disp));
        else l = nca_load_label(ins);
        declass(ins.base);
        t[slots.of(ins.dst)] = l;
        break;
      }
      case K::St: declass(ins.base); break;
      case K::Op: {
        Label l = Label::PUB;
        for (const auto& in : ins.inputs)
          if (!in.is_imm) l = join(l, t[slots.of(in.reg)]);
        t[slots.of(ins.dst)] = l;
        break;
      }
      case K::Div:
        declass(ins.base);
        declass(ins.aux);
        t[slots.of(ins.dst)] = Label::PUB;
        break;
      default: break;
    }
    return t;
  };

  bool outer_changed = true;
  while (outer_changed) {
    outer_changed = false;
    // forward fixed point on register typings
    std::deque<uint64_t> work;
    for (uint64_t a = 0; a < p.instrs.size(); ++a) work.push_back(a);
    auto raise_at = [&](uint64_t J, const std::vector<Label>& t) {
      bool changed = false;
      auto& cur = ty.tau_reg[J];
      for (size_t s = 0; s < cur.size(); ++s) {
        Label j = join(cur[s], t[s]);
        if (j != cur[s]) { cur[s] = j; changed = true; }
      }
      return changed;
    };
    while (!work.empty()) {
      uint64_t I = work.front();
      work.pop_front();
      const Instruction& ins = p.at(I);
      std::vector<Label> out = transfer(I, ty.tau_reg[I]);
      if (ins.kind == K::Call) {
        // the callee clobbers everything; control resumes with clean registers
        std::vector<Label> entry(slots.count(), Label::PUB);
        if (I + 1 < p.instrs.size() && proc_of[I + 1] == proc_of[I])
          if (raise_at(I + 1, entry)) work.push_back(I + 1);
        continue;
      }
      for (uint64_t J : succs(p, I))
        if (raise_at(J, out)) work.push_back(J);
    }
    // raise stack and global variable types from the stores that reach them
    for (uint64_t I = 0; I < p.instrs.size(); ++I) {
      const Instruction& ins = p.at(I);
      if (ins.kind != K::St) continue;
      Label src = ins.aux.is_zr() ? Label::PUB
                                  : (ins.aux.is_sp() ? ty.tau_reg[I][slots.of(Reg::sp())]
                                                     : ty.tau_reg[I][slots.of(ins.aux)]);
      if (ins.is_ca_global()) {
        uint64_t a = p.wrap_signed(ins.disp);
        Label j = join(ty.glob(a), src);
        if (j != ty.glob(a)) { ty.tau_glob[a] = j; outer_changed = true; }
      } else if (ins.is_ca_stack() && proc_of[I] >= 0) {
        auto key = std::make_pair(static_cast<size_t>(proc_of[I]),
                                  static_cast<uint64_t>(ins.disp));
        Label cur = ty.stk(key.first, key.second);
        Label j = join(cur, src);
        if (j != cur) { ty.tau_stk[key] = j; outer_changed = true; }
      }
    }
  }

  // TYP.6: SP and PC must stay publicly typed
  for (uint64_t I = 0; I < p.instrs.size(); ++I) {
    if (ty.tau_reg[I][slots.of(Reg::sp())] == Label::SEC) {
      res.ok = false;
      res.violations.push_back({"TYP.6", I, "inference forces SP secret"});
    }
    ty.tau_reg[I][slots.of(Reg::pc())] = Label::PUB;
    ty.tau_reg[I][slots.of(Reg::zr())] = Label::PUB;
  }
  return res;
}

struct CtsLimits {
  size_t max_steps = 4096;
  bool enumerate_inputs = false;
};

inline CtsReport check_typ(const Program& p, const std::vector<Procedure>& procs,
                           const SecurityTyping& ty, const CtsLimits& lim = {},
                           const TransmitterSet& tx = {}) {
  using K = Instruction::Kind;
  RegSlots slots(p);
  CtsReport r;
  r.assumptions.push_back(
      "entry typing: non-argument registers are publicly typed at procedure entry "
      "(register cleaning convention)");
  r.coverage = lim.enumerate_inputs ? "sequential traces over enumerated public inputs"
                                    : "single policy-derived sequential trace";

  std::vector<int> proc_of(p.instrs.size(), -1);
  for (const auto& proc : procs)
    for (uint64_t a = proc.first; a < proc.first + proc.count; ++a)
      proc_of[a] = static_cast<int>(proc.index);

  // TYP.2: transmitter operands publicly typed
  for (uint64_t I = 0; I < p.instrs.size(); ++I) {
    for (Reg s : tx.sensitive_operands(p.at(I))) {
      if (ty.reg_at(slots, s, I) == Label::SEC)
        r.add("TYP.2", I, "transmitter operand " + s.name() + " is secretly typed");
    }
  }
  // TYP.4: CA stores to publicly-typed locations take public sources
  for (uint64_t I = 0; I < p.instrs.size(); ++I) {
    const auto& ins = p.at(I);
    if (ins.kind != K::St || !ins.is_ca()) continue;
    Label loc = ins.is_ca_global()
                    ? ty.glob(p.wrap_signed(ins.disp))
                    : ty.stk(static_cast<size_t>(proc_of[I]), static_cast<uint64_t>(ins.disp));
    if (loc == Label::PUB && ty.reg_at(slots, ins.aux, I) == Label::SEC)
      r.add("TYP.4", I, "secretly-typed source stored to a publicly-typed location");
  }
  // TYP.5: publicly-typed globals hold public initial values
  for (const auto& [a, l] : ty.tau_glob) {
    auto it = p.policy.find(a);
    if (l == Label::PUB && it != p.policy.end() && it->second.label == Label::SEC)
      r.add("TYP.5", a, "publicly-typed global holds a secret initial value");
  }
  // TYP.6: always-public registers
  for (uint64_t I = 0; I < p.instrs.size(); ++I)
    if (ty.tau_reg[I][slots.of(Reg::sp())] == Label::SEC)
      r.add("TYP.6", I, "SP is secretly typed");
  // TYP.9: argument registers publicly typed at each CALL/RET
  for (const auto& [I, args] : p.calling_convention) {
    for (Reg a : args)
      if (ty.reg_at(slots, a, I) == Label::SEC)
        r.add("TYP.9", I, "argument register " + a.name() + " is secretly typed");
  }

  // TYP.1 and CT over the sequential trace(s)
  auto inits = initial_configurations(p, lim.enumerate_inputs);
  for (const auto& init : inits) {
    Trace t = sequential_trace(p, lim.max_steps, &init);
    for (size_t i = 0; i < t.steps.size(); ++i) {
      const auto& st = t.steps[i];
      const Configuration& c = st.pre;
      if (!p.instr_mapped(st.instr_addr)) break;
      uint64_t I = st.instr_addr;
      for (size_t s = 0; s < slots.count(); ++s) {
        Reg reg = slots.reg(s);
        if (reg.is_zr() || reg.is_pc()) continue;
        if (ty.tau_reg[I][s] == Label::PUB && c.read(reg).label == Label::SEC) {
          r.add("TYP.1", i,
                "publicly-typed register " + reg.name() + " holds a secret at step " +
                    std::to_string(i) + " (instr " + std::to_string(I) + ")");
        }
      }
      const auto& ins = p.at(I);
      if (ins.is_ca_stack() && proc_of[I] >= 0) {
        Label loc = ty.stk(static_cast<size_t>(proc_of[I]), static_cast<uint64_t>(ins.disp));
        LabeledValue moved =
            ins.kind == K::St ? c.read(ins.aux) : LabeledValue{0, Label::PUB};
        if (ins.kind == K::Ld) {
          Successor s = step_sequential(c, p);
          if (!s.halted) moved = s.config.read(ins.dst);
        }
        if (loc == Label::PUB && moved.label == Label::SEC)
          r.add("TYP.1", i,
                "secret moved through publicly-typed stack slot at step " +
                    std::to_string(i));
      }
      // publicly-typed globals never hold secrets in the committed view
      for (const auto& [a, l] : ty.tau_glob) {
        if (l != Label::PUB) continue;
        LabeledValue v{};
        bool have = false;
        if (auto it = c.dmem.find(a); it != c.dmem.end()) { v = it->second; have = true; }
        for (const auto& [sa, sv] : c.spec_stores)
          if (sa == a) { v = sv; have = true; }
        if (have && v.label == Label::SEC)
          r.add("TYP.1", i,
                "publicly-typed global " + std::to_string(a) + " holds a secret at step " +
                    std::to_string(i));
      }
      // CT: no sequential observation is labeled secret (implied by
      // TYP.1 + TYP.2, asserted independently)
      if (st.obs.is_secret())
        r.add("CT", i, "sequential observation " + st.obs.str() + " is labeled secret");
    }
  }
  return r;
}

struct CtsResult {
  CtsReport report;
  std::vector<Procedure> procedures;
  SecurityTyping typing;
  bool typing_valid = false;
};

inline CtsResult check_cts(const Program& p, const CtsLimits& lim = {},
                           const TransmitterSet& tx = {}) {
  CtsResult res;
  res.procedures = partition_procedures(p, res.report);
  if (!res.report.pass) return res;
  res.report.merge(check_wf(p, res.procedures, lim.max_steps));
  auto inf = infer_security_typing(p, res.procedures);
  if (!inf.ok) {
    for (const auto& v : inf.violations) res.report.add(v.rule, v.addr, v.message);
    return res;
  }
  res.typing = inf.typing;
  res.typing_valid = true;
  res.report.merge(check_typ(p, res.procedures, res.typing, lim, tx));
  return res;
}

}  // namespace sct
