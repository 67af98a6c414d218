#pragma once

// Core ISA definitions: security labels, registers, instructions, programs.
// Programs are immutable value types; all analyses and transforms build new
// ones rather than mutating in place.

#include <cstdint>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace sct {

enum class Label : uint8_t { PUB = 0, SEC = 1 };

inline Label join(Label a, Label b) {
  return (a == Label::SEC || b == Label::SEC) ? Label::SEC : Label::PUB;
}

inline const char* label_name(Label l) { return l == Label::PUB ? "PUB" : "SEC"; }

struct LabeledValue {
  uint64_t value = 0;
  Label label = Label::PUB;
  friend auto operator<=>(const LabeledValue&, const LabeledValue&) = default;
};

struct Reg {
  enum class Kind : uint8_t { gpr = 0, sp = 1, pc = 2, zr = 3 };
  Kind kind = Kind::zr;
  uint8_t index = 0;  // gpr index, meaningless otherwise

  static Reg gpr(unsigned i) { return Reg{Kind::gpr, static_cast<uint8_t>(i)}; }
  static Reg sp() { return Reg{Kind::sp, 0}; }
  static Reg pc() { return Reg{Kind::pc, 0}; }
  static Reg zr() { return Reg{Kind::zr, 0}; }

  bool is_gpr() const { return kind == Kind::gpr; }
  bool is_sp() const { return kind == Kind::sp; }
  bool is_pc() const { return kind == Kind::pc; }
  bool is_zr() const { return kind == Kind::zr; }

  std::string name() const {
    switch (kind) {
      case Kind::gpr: return "r" + std::to_string(index);
      case Kind::sp: return "sp";
      case Kind::pc: return "pc";
      case Kind::zr: return "zr";
    }
    return "?";
  }

  friend auto operator<=>(const Reg&, const Reg&) = default;
};

enum class Opcode : uint8_t { MOV, ADD, SUB, XOR, AND, OR, MUL, MAX, MIN, CONST };

inline const char* opcode_name(Opcode o) {
  switch (o) {
    case Opcode::MOV: return "MOV";
    case Opcode::ADD: return "ADD";
    case Opcode::SUB: return "SUB";
    case Opcode::XOR: return "XOR";
    case Opcode::AND: return "AND";
    case Opcode::OR: return "OR";
    case Opcode::MUL: return "MUL";
    case Opcode::MAX: return "MAX";
    case Opcode::MIN: return "MIN";
    case Opcode::CONST: return "CONST";
  }
  return "?";
}

inline unsigned opcode_arity(Opcode o) {
  switch (o) {
    case Opcode::MOV: return 1;
    case Opcode::CONST: return 1;  // one immediate, zero registers
    default: return 2;
  }
}

// OP inputs are registers or immediates. Immediates carry label PUB and may
// be written symbolically (a code label or data name) in the text format.
struct Operand {
  bool is_imm = false;
  Reg reg{};
  int64_t imm = 0;
  std::optional<std::string> sym;  // textual name the immediate resolved from

  static Operand of_reg(Reg r) { return Operand{false, r, 0, {}}; }
  static Operand of_imm(int64_t v, std::optional<std::string> s = {}) {
    return Operand{true, Reg{}, v, std::move(s)};
  }
  bool same_content(const Operand& o) const {
    if (is_imm != o.is_imm) return false;
    return is_imm ? imm == o.imm : reg == o.reg;
  }
};

struct Instruction {
  enum class Kind : uint8_t { Jmp, Bnz, Call, Ret, Endbr, Lfence, Ld, St, Op, Div };

  Kind kind = Kind::Endbr;
  // Field usage by kind:
  //   Jmp:    disp
  //   Bnz:    base (condition), disp
  //   Call:   base (target register)
  //   Ld:     base (address base), disp, dst
  //   St:     base (address base), disp, aux (value source)
  //   Op:     op, dst, inputs
  //   Div:    base (numerator), aux (denominator), dst
  Reg base{};
  Reg aux{};
  Reg dst{};
  Opcode op = Opcode::MOV;
  std::vector<Operand> inputs;
  int64_t disp = 0;
  std::optional<std::string> sym;  // symbolic form of disp (data name / code label)
  bool pub_hint = false;  // LD: declared to read only public data sequentially
  bool synthetic = false;  // inserted by a mitigation pass

  static Instruction jmp(int64_t d, std::optional<std::string> s = {}) {
    Instruction i; i.kind = Kind::Jmp; i.disp = d; i.sym = std::move(s); return i;
  }
  static Instruction bnz(Reg r, int64_t d, std::optional<std::string> s = {}) {
    Instruction i; i.kind = Kind::Bnz; i.base = r; i.disp = d; i.sym = std::move(s); return i;
  }
  static Instruction call(Reg r) {
    Instruction i; i.kind = Kind::Call; i.base = r; return i;
  }
  static Instruction ret() { Instruction i; i.kind = Kind::Ret; return i; }
  static Instruction endbr() { Instruction i; i.kind = Kind::Endbr; return i; }
  static Instruction lfence() { Instruction i; i.kind = Kind::Lfence; return i; }
  static Instruction ld(Reg basereg, int64_t d, Reg dest, std::optional<std::string> s = {}) {
    Instruction i; i.kind = Kind::Ld; i.base = basereg; i.disp = d; i.dst = dest;
    i.sym = std::move(s); return i;
  }
  static Instruction st(Reg basereg, int64_t d, Reg src, std::optional<std::string> s = {}) {
    Instruction i; i.kind = Kind::St; i.base = basereg; i.disp = d; i.aux = src;
    i.sym = std::move(s); return i;
  }
  static Instruction mkop(Opcode o, Reg dest, std::vector<Operand> ins) {
    Instruction i; i.kind = Kind::Op; i.op = o; i.dst = dest; i.inputs = std::move(ins);
    return i;
  }
  static Instruction div(Reg num, Reg den, Reg dest) {
    Instruction i; i.kind = Kind::Div; i.base = num; i.aux = den; i.dst = dest; return i;
  }

  bool is_memory_access() const { return kind == Kind::Ld || kind == Kind::St; }
  // Constant-address accesses use ZR (global) or SP (stack) as the base.
  bool is_ca() const { return is_memory_access() && (base.is_zr() || base.is_sp()); }
  bool is_nca() const { return is_memory_access() && !is_ca(); }
  bool is_ca_global() const { return is_memory_access() && base.is_zr(); }
  bool is_ca_stack() const { return is_memory_access() && base.is_sp(); }

  // Registers whose value this instruction overwrites (PC excluded; every
  // instruction moves PC).
  std::vector<Reg> written_regs() const {
    switch (kind) {
      case Kind::Ld: return {dst};
      case Kind::Op: return {dst};
      case Kind::Div: return {dst};
      default: return {};
    }
  }

  bool same_content(const Instruction& o) const {
    if (kind != o.kind) return false;
    if (base != o.base || aux != o.aux || dst != o.dst) return false;
    if (kind == Kind::Op) {
      if (op != o.op || inputs.size() != o.inputs.size()) return false;
      for (size_t i = 0; i < inputs.size(); ++i)
        if (!inputs[i].same_content(o.inputs[i])) return false;
    }
    if (disp != o.disp) return false;
    if (pub_hint != o.pub_hint) return false;
    return true;
  }
};

inline const char* instr_kind_name(Instruction::Kind k) {
  switch (k) {
    case Instruction::Kind::Jmp: return "JMP";
    case Instruction::Kind::Bnz: return "BNZ";
    case Instruction::Kind::Call: return "CALL";
    case Instruction::Kind::Ret: return "RET";
    case Instruction::Kind::Endbr: return "ENDBR";
    case Instruction::Kind::Lfence: return "LFENCE";
    case Instruction::Kind::Ld: return "LD";
    case Instruction::Kind::St: return "ST";
    case Instruction::Kind::Op: return "OP";
    case Instruction::Kind::Div: return "DIV";
  }
  return "?";
}

// Observations exposed by transmitters. DIV carries both operands.
struct Observation {
  enum class Kind : uint8_t { None, Bnz, Call, Ld, St, Div };
  Kind kind = Kind::None;
  LabeledValue a{};
  LabeledValue b{};

  static Observation none() { return {}; }
  static Observation bnz(LabeledValue v) { return {Kind::Bnz, v, {}}; }
  static Observation call(LabeledValue v) { return {Kind::Call, v, {}}; }
  static Observation ld(LabeledValue v) { return {Kind::Ld, v, {}}; }
  static Observation st(LabeledValue v) { return {Kind::St, v, {}}; }
  static Observation div(LabeledValue x, LabeledValue y) { return {Kind::Div, x, y}; }

  bool is_secret() const {
    if (kind == Kind::None) return false;
    if (kind == Kind::Div) return a.label == Label::SEC || b.label == Label::SEC;
    return a.label == Label::SEC;
  }

  std::string str() const {
    auto lv = [](const LabeledValue& v) {
      return std::to_string(v.value) + (v.label == Label::SEC ? ":SEC" : ":PUB");
    };
    switch (kind) {
      case Kind::None: return "eps";
      case Kind::Bnz: return "bnz " + lv(a);
      case Kind::Call: return "call " + lv(a);
      case Kind::Ld: return "ld " + lv(a);
      case Kind::St: return "st " + lv(a);
      case Kind::Div: return "div " + lv(a) + "," + lv(b);
    }
    return "?";
  }

  friend auto operator<=>(const Observation&, const Observation&) = default;
};

enum class Variant : uint8_t { core, psf, nostl, sls };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::core: return "core";
    case Variant::psf: return "psf";
    case Variant::nostl: return "nostl";
    case Variant::sls: return "sls";
  }
  return "?";
}

inline std::optional<Variant> variant_from_name(const std::string& s) {
  if (s == "core") return Variant::core;
  if (s == "psf") return Variant::psf;
  if (s == "nostl") return Variant::nostl;
  if (s == "sls") return Variant::sls;
  return std::nullopt;
}

struct DataDecl {
  std::string name;
  uint64_t addr = 0;
  Label label = Label::PUB;
  std::vector<uint64_t> init;
};

// A stack region: [base, base+mapped) is mapped and zero-initialized,
// [base+mapped, base+mapped+reserved) belongs to the data stack but is
// deliberately left unmapped (transient underflows fault there).
struct StackRegionDecl {
  std::string name;
  uint64_t base = 0;
  uint64_t mapped = 0;
  uint64_t reserved = 0;
};

struct ProcDecl {
  std::string name;
  uint64_t first = 0;  // first instruction address of the block
  uint64_t count = 0;  // number of instructions
  uint64_t frame_size = 0;
};

struct Program {
  unsigned word_width = 16;
  unsigned gpr_count = 8;
  std::optional<Variant> variant;  // demo hint from the .variant directive

  std::vector<Instruction> instrs;  // dense addresses 0..n-1
  std::vector<ProcDecl> procs;      // contiguous, in address order

  std::vector<DataDecl> data;
  uint64_t stack_base = 0;
  uint64_t stack_size = 0;  // usable words; [base, base+size] is mapped
  bool has_stack = false;
  std::vector<StackRegionDecl> stack_regions;  // added by the FPS pass

  std::set<uint64_t> data_addrs;                 // mapped data addresses
  std::map<uint64_t, LabeledValue> policy;       // initial value + label per mapped address
  std::set<uint64_t> stack_region;               // DS (may include unmapped guard cells)
  std::map<uint64_t, std::set<Reg>> calling_convention;  // CALL/RET addr -> arg regs
  std::map<Reg, uint64_t> reg_init;              // initial register values (PUB)
  std::vector<Reg> input_regs;                   // registers swept by --enumerate-inputs

  std::map<uint64_t, std::string> addr_labels;   // instruction address -> label name

  uint64_t mask() const {
    return word_width >= 64 ? ~uint64_t{0} : ((uint64_t{1} << word_width) - 1);
  }
  uint64_t wrap(uint64_t v) const { return v & mask(); }
  uint64_t wrap_signed(int64_t v) const { return static_cast<uint64_t>(v) & mask(); }

  bool instr_mapped(uint64_t addr) const { return addr < instrs.size(); }
  const Instruction& at(uint64_t addr) const { return instrs[addr]; }
  bool data_mapped(uint64_t addr) const { return data_addrs.count(addr) != 0; }

  std::vector<uint64_t> endbr_addrs() const {
    std::vector<uint64_t> out;
    for (uint64_t a = 0; a < instrs.size(); ++a)
      if (instrs[a].kind == Instruction::Kind::Endbr) out.push_back(a);
    return out;
  }
  // Addresses immediately following a CALL: the transient targets of RET.
  std::vector<uint64_t> callsite_addrs() const {
    std::vector<uint64_t> out;
    for (uint64_t a = 0; a + 1 < instrs.size(); ++a)
      if (instrs[a].kind == Instruction::Kind::Call) out.push_back(a + 1);
    // a CALL as the last instruction still pushes an (unmapped) return address
    if (!instrs.empty() && instrs.back().kind == Instruction::Kind::Call)
      out.push_back(instrs.size());
    return out;
  }

  uint64_t initial_sp() const { return has_stack ? stack_base + stack_size : 0; }

  const ProcDecl* proc_of(uint64_t addr) const {
    for (const auto& p : procs)
      if (addr >= p.first && addr < p.first + p.count) return &p;
    return nullptr;
  }

  bool any_secret_data() const {
    for (const auto& [a, v] : policy)
      if (v.label == Label::SEC) return true;
    return false;
  }
};

// Structural identity: semantic content only. Label names, symbolic spellings
// and synthetic markers do not participate.
inline bool structurally_equal(const Program& a, const Program& b) {
  if (a.word_width != b.word_width || a.gpr_count != b.gpr_count) return false;
  if (a.instrs.size() != b.instrs.size()) return false;
  for (size_t i = 0; i < a.instrs.size(); ++i)
    if (!a.instrs[i].same_content(b.instrs[i])) return false;
  if (a.procs.size() != b.procs.size()) return false;
  for (size_t i = 0; i < a.procs.size(); ++i) {
    const auto& p = a.procs[i];
    const auto& q = b.procs[i];
    if (p.first != q.first || p.count != q.count || p.frame_size != q.frame_size)
      return false;
  }
  if (a.data_addrs != b.data_addrs) return false;
  if (a.policy != b.policy) return false;
  if (a.stack_region != b.stack_region) return false;
  if (a.calling_convention != b.calling_convention) return false;
  if (a.reg_init != b.reg_init) return false;
  if (a.input_regs != b.input_regs) return false;
  if (a.variant != b.variant) return false;
  return true;
}

struct ParseError : std::runtime_error {
  int line;
  ParseError(int ln, const std::string& msg)
      : std::runtime_error("line " + std::to_string(ln) + ": " + msg), line(ln) {}
};

struct AnalysisBug : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace sct
