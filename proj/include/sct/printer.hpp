#pragma once

// Canonical text emission. parse_program(print_program(p)) is structurally
// identical to p: data and stack placements are pinned with explicit
// addresses, and every referenced instruction gets a stable label.

#include <sstream>

#include "sct/isa.hpp"

namespace sct {

namespace detail {

class Printer {
 public:
  explicit Printer(const Program& p) : p_(p) { assign_labels(); }

  std::string run() {
    std::ostringstream out;
    out << ".width " << p_.word_width << "\n";
    out << ".gprs " << p_.gpr_count << "\n";
    if (p_.variant) out << ".variant " << variant_name(*p_.variant) << "\n";
    if (p_.has_stack)
      out << ".stack @ " << p_.stack_base << " size=" << p_.stack_size << "\n";
    for (const auto& r : p_.stack_regions)
      out << ".stackregion " << r.name << " @ " << r.base << " size=" << r.mapped
          << " reserve=" << r.reserved << "\n";
    for (const auto& d : p_.data) {
      out << ".data " << d.name << " @ " << d.addr << " "
          << (d.label == Label::SEC ? "SEC" : "PUB") << " =";
      for (size_t i = 0; i < d.init.size(); ++i) out << (i ? "," : "") << " " << d.init[i];
      out << "\n";
    }
    for (const auto& [r, v] : p_.reg_init) out << ".reg " << r.name() << " = " << v << "\n";
    if (!p_.input_regs.empty()) {
      out << ".input";
      for (size_t i = 0; i < p_.input_regs.size(); ++i)
        out << (i ? "," : "") << " " << p_.input_regs[i].name();
      out << "\n";
    }
    for (const auto& proc : p_.procs) {
      out << "\n.proc " << proc.name << " frame=" << proc.frame_size << "\n";
      for (uint64_t a = proc.first; a < proc.first + proc.count; ++a) {
        auto lit = labels_.find(a);
        if (lit != labels_.end() && lit->second != proc.name)
          out << lit->second << ":\n";
        out << "    " << format_instr(a) << "\n";
      }
      out << ".endproc\n";
      for (uint64_t a = proc.first; a < proc.first + proc.count; ++a) {
        auto cit = p_.calling_convention.find(a);
        if (cit == p_.calling_convention.end()) continue;
        out << ".args " << labels_.at(a) << " =";
        size_t i = 0;
        for (const auto& r : cit->second) out << (i++ ? "," : "") << " " << r.name();
        out << "\n";
      }
    }
    return out.str();
  }

 private:
  const Program& p_;
  std::map<uint64_t, std::string> labels_;

  void assign_labels() {
    labels_ = p_.addr_labels;
    for (const auto& proc : p_.procs) labels_[proc.first] = proc.name;
    std::set<std::string> used;
    for (const auto& [a, n] : labels_) used.insert(n);
    unsigned counter = 0;
    auto ensure = [&](uint64_t addr) {
      if (labels_.count(addr)) return;
      std::string name;
      do { name = ".L" + std::to_string(counter++); } while (used.count(name));
      used.insert(name);
      labels_[addr] = name;
    };
    for (uint64_t a = 0; a < p_.instrs.size(); ++a) {
      const auto& ins = p_.instrs[a];
      if (ins.kind == Instruction::Kind::Jmp || ins.kind == Instruction::Kind::Bnz) {
        int64_t t = static_cast<int64_t>(a) + 1 + ins.disp;
        if (t >= 0 && p_.instr_mapped(static_cast<uint64_t>(t)))
          ensure(static_cast<uint64_t>(t));
      }
    }
    for (const auto& [addr, regs] : p_.calling_convention) ensure(addr);
  }

  std::string target_of(uint64_t a, int64_t disp) const {
    int64_t t = static_cast<int64_t>(a) + 1 + disp;
    if (t >= 0 && p_.instr_mapped(static_cast<uint64_t>(t)))
      return labels_.at(static_cast<uint64_t>(t));
    return std::to_string(disp);  // deliberate jump out of instruction memory
  }

  std::string data_sym(const Instruction& ins) const {
    if (ins.sym) return *ins.sym;
    return std::to_string(ins.disp);
  }

  std::string operand_str(const Operand& o) const {
    if (!o.is_imm) return o.reg.name();
    if (o.sym) return *o.sym;
    return std::to_string(o.imm);
  }

  std::string format_instr(uint64_t a) const {
    const auto& ins = p_.instrs[a];
    using K = Instruction::Kind;
    switch (ins.kind) {
      case K::Jmp: return "JMP " + target_of(a, ins.disp);
      case K::Bnz: return "BNZ " + ins.base.name() + ", " + target_of(a, ins.disp);
      case K::Call: return "CALL " + ins.base.name();
      case K::Ret: return "RET";
      case K::Endbr: return "ENDBR";
      case K::Lfence: return "LFENCE";
      case K::Ld: {
        std::string s = "LD [" + ins.base.name() + " + " + data_sym(ins) + "], " + ins.dst.name();
        if (ins.pub_hint) s += " !pub";
        return s;
      }
      case K::St:
        return "ST [" + ins.base.name() + " + " + data_sym(ins) + "], " + ins.aux.name();
      case K::Div:
        return "DIV " + ins.dst.name() + ", " + ins.base.name() + ", " + ins.aux.name();
      case K::Op: {
        std::string s = std::string(opcode_name(ins.op)) + " " + ins.dst.name();
        for (const auto& o : ins.inputs) s += ", " + operand_str(o);
        return s;
      }
    }
    return "?";
  }
};

}  // namespace detail

inline std::string print_program(const Program& p) { return detail::Printer(p).run(); }

}  // namespace sct
