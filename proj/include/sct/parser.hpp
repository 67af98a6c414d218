#pragma once

// Text format parser. One instruction per line; `;` starts a comment.
//
//   .width 16              word width in bits (default 16)
//   .gprs 8                number of general-purpose registers (default 8)
//   .variant core          intended mitigation variant (demo hint)
//   .stack [@ A] size=N    data stack: maps [base, base+N] zero/PUB, SP0 = base+N
//   .stackregion NAME @ B size=N reserve=K   extra stack region (emitted by passes)
//   .data NAME [@ A] PUB|SEC = v0, v1, ...   initialized global; values may be
//                                            identifiers (address-of)
//   .reg rX = V            initial register value (PUB)
//   .input rX[, rY...]     registers swept by input enumeration
//   .proc NAME frame=K ... .endproc          procedure block; first instr is ENDBR
//   .args LABEL = r1, r2   calling convention for the CALL/RET at LABEL
//
// Instructions: JMP t | BNZ r, t | CALL r | RET | ENDBR | LFENCE |
//   LD [r + d], rd [!pub] | ST [r + d], rs | DIV rd, ra, rb |
//   MOV/ADD/SUB/XOR/AND/OR/MUL/MAX/MIN rd, a[, b] | CONST rd, imm

#include <cctype>
#include <cstdlib>
#include <sstream>

#include "sct/isa.hpp"

namespace sct {

namespace detail {

inline std::string strip_comment(const std::string& line) {
  auto pos = line.find(';');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_tokens(const std::string& s) {
  // splits on whitespace and commas, keeps [, ], +, - as part of tokens where glued
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
    } else if (c == '[' || c == ']' || c == '+') {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
      out.push_back(std::string(1, c));
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool is_integer(const std::string& t) {
  if (t.empty()) return false;
  size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
  if (i == t.size()) return false;
  for (; i < t.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
  return true;
}

inline bool is_identifier(const std::string& t) {
  if (t.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(t[0])) && t[0] != '_' && t[0] != '.')
    return false;
  for (char c : t)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.')
      return false;
  return true;
}

}  // namespace detail

class Parser {
 public:
  Program parse(const std::string& text) {
    prog_ = Program{};
    lines_.clear();
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    // pass 1: structure, labels, data layout
    std::string cur_proc;
    bool in_proc = false;
    uint64_t cur_frame = 0;
    uint64_t proc_first = 0;
    uint64_t addr = 0;
    while (std::getline(in, line)) {
      ++ln;
      std::string body = detail::trim(detail::strip_comment(line));
      if (body.empty()) continue;
      if (body[0] == '.') {
        directive(body, ln, in_proc, cur_proc, cur_frame, proc_first, addr);
        continue;
      }
      // labels: "name:" possibly followed by an instruction
      while (true) {
        auto colon = body.find(':');
        if (colon == std::string::npos) break;
        std::string lbl = detail::trim(body.substr(0, colon));
        if (!detail::is_identifier(lbl)) throw ParseError(ln, "bad label '" + lbl + "'");
        define_symbol(lbl, SymKind::code, addr, ln);
        prog_.addr_labels[addr] = lbl;
        body = detail::trim(body.substr(colon + 1));
        if (body.empty()) break;
      }
      if (body.empty()) continue;
      if (!in_proc) throw ParseError(ln, "instruction outside .proc block");
      lines_.push_back({ln, addr, body});
      ++addr;
    }
    if (in_proc) throw ParseError(ln, "missing .endproc");
    finish_layout();
    // pass 2: instructions
    prog_.instrs.resize(addr);
    for (const auto& L : lines_) prog_.instrs[L.addr] = parse_instr(L.text, L.addr, L.line);
    // pass 3: args declarations
    for (const auto& A : args_decls_) resolve_args(A);
    validate();
    return prog_;
  }

 private:
  enum class SymKind { code, data };
  struct Sym { SymKind kind; uint64_t addr; };
  struct PendingLine { int line; uint64_t addr; std::string text; };
  struct ArgsDecl { int line; std::string label; std::set<Reg> regs; };

  Program prog_;
  std::map<std::string, Sym> symbols_;
  std::vector<PendingLine> lines_;
  std::vector<ArgsDecl> args_decls_;
  std::vector<std::pair<DataDecl, bool>> pending_data_;  // decl, has explicit addr
  struct PendingStack { uint64_t base; uint64_t size; bool explicit_addr; bool present = false; };
  PendingStack pending_stack_;
  std::vector<StackRegionDecl> pending_regions_;

  void define_symbol(const std::string& name, SymKind k, uint64_t addr, int ln) {
    auto it = symbols_.find(name);
    if (it != symbols_.end()) {
      // a ".proc foo" and an explicit "foo:" on its entry coincide
      if (it->second.kind == k && it->second.addr == addr) return;
      throw ParseError(ln, "duplicate label '" + name + "'");
    }
    symbols_[name] = Sym{k, addr};
  }

  void directive(const std::string& body, int ln, bool& in_proc, std::string& cur_proc,
                 uint64_t& cur_frame, uint64_t& proc_first, uint64_t& addr) {
    auto toks = detail::split_tokens(body);
    const std::string& d = toks[0];
    auto need = [&](size_t n) {
      if (toks.size() < n) throw ParseError(ln, d + ": missing operand");
    };
    auto to_u64 = [&](const std::string& t) -> uint64_t {
      if (!detail::is_integer(t)) throw ParseError(ln, d + ": expected integer, got '" + t + "'");
      return static_cast<uint64_t>(std::strtoll(t.c_str(), nullptr, 10));
    };
    if (d == ".width") {
      need(2);
      uint64_t w = to_u64(toks[1]);
      if (w < 2 || w > 32) throw ParseError(ln, ".width must be in [2,32]");
      prog_.word_width = static_cast<unsigned>(w);
    } else if (d == ".gprs") {
      need(2);
      uint64_t n = to_u64(toks[1]);
      if (n < 1 || n > 32) throw ParseError(ln, ".gprs must be in [1,32]");
      prog_.gpr_count = static_cast<unsigned>(n);
    } else if (d == ".variant") {
      need(2);
      auto v = variant_from_name(toks[1]);
      if (!v) throw ParseError(ln, "unknown variant '" + toks[1] + "'");
      prog_.variant = v;
    } else if (d == ".stack") {
      if (pending_stack_.present) throw ParseError(ln, "duplicate .stack");
      size_t i = 1;
      bool expl = false;
      uint64_t base = 0;
      if (i < toks.size() && toks[i] == "@") {
        need(i + 2);
        base = to_u64(toks[i + 1]);
        expl = true;
        i += 2;
      }
      if (i >= toks.size() || toks[i].rfind("size=", 0) != 0)
        throw ParseError(ln, ".stack: expected size=N");
      uint64_t sz = to_u64(toks[i].substr(5));
      pending_stack_ = PendingStack{base, sz, expl, true};
    } else if (d == ".stackregion") {
      need(2);
      StackRegionDecl r;
      r.name = toks[1];
      size_t i = 2;
      if (i + 1 < toks.size() && toks[i] == "@") { r.base = to_u64(toks[i + 1]); i += 2; }
      else throw ParseError(ln, ".stackregion: expected @ ADDR");
      for (; i < toks.size(); ++i) {
        if (toks[i].rfind("size=", 0) == 0) r.mapped = to_u64(toks[i].substr(5));
        else if (toks[i].rfind("reserve=", 0) == 0) r.reserved = to_u64(toks[i].substr(8));
        else throw ParseError(ln, ".stackregion: unexpected '" + toks[i] + "'");
      }
      define_symbol(r.name, SymKind::data, r.base, ln);
      pending_regions_.push_back(r);
    } else if (d == ".data") {
      need(3);
      DataDecl decl;
      decl.name = toks[1];
      size_t i = 2;
      bool expl = false;
      if (toks[i] == "@") {
        need(i + 2);
        decl.addr = to_u64(toks[i + 1]);
        expl = true;
        i += 2;
      }
      need(i + 1);
      if (toks[i] == "PUB") decl.label = Label::PUB;
      else if (toks[i] == "SEC") decl.label = Label::SEC;
      else throw ParseError(ln, ".data: expected PUB or SEC, got '" + toks[i] + "'");
      ++i;
      if (i >= toks.size() || toks[i] != "=") throw ParseError(ln, ".data: expected '='");
      ++i;
      if (i >= toks.size()) throw ParseError(ln, ".data: missing initializer");
      for (; i < toks.size(); ++i) {
        if (detail::is_integer(toks[i])) {
          decl.init.push_back(static_cast<uint64_t>(std::strtoll(toks[i].c_str(), nullptr, 10)));
        } else if (detail::is_identifier(toks[i])) {
          // address-of another symbol, resolved in finish_layout
          decl.init.push_back(0);
          sym_inits_.push_back({pending_data_.size(), decl.init.size() - 1, toks[i], ln});
        } else {
          throw ParseError(ln, ".data: bad initializer '" + toks[i] + "'");
        }
      }
      pending_data_.push_back({decl, expl});
    } else if (d == ".reg") {
      need(4);
      Reg r = parse_reg(toks[1], ln);
      if (toks[2] != "=") throw ParseError(ln, ".reg: expected '='");
      prog_.reg_init[r] = static_cast<uint64_t>(std::strtoll(toks[3].c_str(), nullptr, 10));
    } else if (d == ".input") {
      need(2);
      for (size_t i = 1; i < toks.size(); ++i)
        prog_.input_regs.push_back(parse_reg(toks[i], ln));
    } else if (d == ".proc") {
      if (in_proc) throw ParseError(ln, "nested .proc");
      need(2);
      cur_proc = toks[1];
      cur_frame = 0;
      for (size_t i = 2; i < toks.size(); ++i) {
        if (toks[i].rfind("frame=", 0) == 0) cur_frame = to_u64(toks[i].substr(6));
        else throw ParseError(ln, ".proc: unexpected '" + toks[i] + "'");
      }
      in_proc = true;
      proc_first = addr;
      if (!symbols_.count(cur_proc)) {
        // procedure name doubles as the label of its first instruction
        define_symbol(cur_proc, SymKind::code, addr, ln);
        prog_.addr_labels.emplace(addr, cur_proc);
      }
    } else if (d == ".endproc") {
      if (!in_proc) throw ParseError(ln, ".endproc without .proc");
      prog_.procs.push_back(ProcDecl{cur_proc, proc_first, addr - proc_first, cur_frame});
      in_proc = false;
    } else if (d == ".args") {
      need(3);
      if (toks[2] != "=") throw ParseError(ln, ".args: expected '='");
      ArgsDecl a;
      a.line = ln;
      a.label = toks[1];
      for (size_t i = 3; i < toks.size(); ++i) a.regs.insert(parse_reg(toks[i], ln));
      args_decls_.push_back(a);
    } else {
      throw ParseError(ln, "unknown directive '" + d + "'");
    }
  }

  struct SymInit { size_t decl; size_t slot; std::string name; int line; };
  std::vector<SymInit> sym_inits_;

  void finish_layout() {
    // place data: explicit addresses first, then sequential allocation
    std::set<uint64_t> taken;
    auto claim = [&](uint64_t base, uint64_t len, int ln, const std::string& what) {
      for (uint64_t i = 0; i < len; ++i) {
        if (!taken.insert(base + i).second)
          throw ParseError(ln, what + ": address " + std::to_string(base + i) + " already mapped");
      }
    };
    for (auto& [decl, expl] : pending_data_)
      if (expl) claim(decl.addr, decl.init.size(), 0, decl.name);
    for (const auto& r : pending_regions_)
      for (uint64_t i = 0; i < r.mapped + r.reserved; ++i)
        if (!taken.insert(r.base + i).second)
          throw ParseError(0, r.name + ": address overlap");
    if (pending_stack_.present && pending_stack_.explicit_addr)
      claim(pending_stack_.base, pending_stack_.size + 1, 0, ".stack");

    uint64_t cursor = 0;
    auto alloc = [&](uint64_t len) {
      while (true) {
        bool free = true;
        for (uint64_t i = 0; i < len; ++i)
          if (taken.count(cursor + i)) { free = false; cursor = cursor + i + 1; break; }
        if (free) break;
      }
      uint64_t base = cursor;
      for (uint64_t i = 0; i < len; ++i) taken.insert(base + i);
      cursor = base + len;
      return base;
    };
    for (auto& [decl, expl] : pending_data_)
      if (!expl && !decl.init.empty()) decl.addr = alloc(decl.init.size());
    if (pending_stack_.present && !pending_stack_.explicit_addr)
      pending_stack_.base = alloc(pending_stack_.size + 1);

    for (auto& [decl, expl] : pending_data_) define_symbol(decl.name, SymKind::data, decl.addr, 0);

    // resolve symbolic data initializers
    for (const auto& si : sym_inits_) {
      auto it = symbols_.find(si.name);
      if (it == symbols_.end())
        throw ParseError(si.line, "undefined label '" + si.name + "'");
      pending_data_[si.decl].first.init[si.slot] = it->second.addr;
    }

    // materialize into the program
    uint64_t limit = prog_.mask();
    for (auto& [decl, expl] : pending_data_) {
      (void)expl;
      if (!decl.init.empty() && decl.addr + decl.init.size() - 1 > limit)
        throw ParseError(0, decl.name + ": data address exceeds word width");
      prog_.data.push_back(decl);
      for (size_t i = 0; i < decl.init.size(); ++i) {
        uint64_t a = decl.addr + i;
        prog_.data_addrs.insert(a);
        prog_.policy[a] = LabeledValue{prog_.wrap(decl.init[i]), decl.label};
      }
    }
    if (pending_stack_.present) {
      prog_.has_stack = true;
      prog_.stack_base = pending_stack_.base;
      prog_.stack_size = pending_stack_.size;
      if (pending_stack_.base + pending_stack_.size > limit)
        throw ParseError(0, ".stack exceeds word width");
      for (uint64_t i = 0; i <= pending_stack_.size; ++i) {
        uint64_t a = pending_stack_.base + i;
        prog_.data_addrs.insert(a);
        prog_.policy[a] = LabeledValue{0, Label::PUB};
        prog_.stack_region.insert(a);
      }
    }
    for (const auto& r : pending_regions_) {
      prog_.stack_regions.push_back(r);
      for (uint64_t i = 0; i < r.mapped; ++i) {
        uint64_t a = r.base + i;
        prog_.data_addrs.insert(a);
        prog_.policy[a] = LabeledValue{0, Label::PUB};
        prog_.stack_region.insert(a);
      }
      for (uint64_t i = 0; i < r.reserved; ++i) prog_.stack_region.insert(r.base + r.mapped + i);
    }
  }

  Reg parse_reg(const std::string& t, int ln) {
    if (t == "sp") return Reg::sp();
    if (t == "zr") return Reg::zr();
    if (t == "pc") throw ParseError(ln, "pc is not directly addressable");
    if (t.size() >= 2 && t[0] == 'r' && detail::is_integer(t.substr(1))) {
      long idx = std::strtol(t.c_str() + 1, nullptr, 10);
      if (idx < 0 || static_cast<unsigned>(idx) >= prog_.gpr_count)
        throw ParseError(ln, "register " + t + " out of range (gprs=" +
                                 std::to_string(prog_.gpr_count) + ")");
      return Reg::gpr(static_cast<unsigned>(idx));
    }
    throw ParseError(ln, "expected register, got '" + t + "'");
  }

  // resolve an identifier or integer to (value, optional-symbol)
  std::pair<int64_t, std::optional<std::string>> resolve_value(const std::string& t, int ln) {
    if (detail::is_integer(t)) return {std::strtoll(t.c_str(), nullptr, 10), std::nullopt};
    if (detail::is_identifier(t)) {
      auto it = symbols_.find(t);
      if (it == symbols_.end()) throw ParseError(ln, "undefined label '" + t + "'");
      return {static_cast<int64_t>(it->second.addr), t};
    }
    throw ParseError(ln, "expected value, got '" + t + "'");
  }

  // branch target: identifier resolves to displacement target-(addr+1)
  std::pair<int64_t, std::optional<std::string>> resolve_target(const std::string& t,
                                                                uint64_t addr, int ln) {
    if (detail::is_integer(t)) return {std::strtoll(t.c_str(), nullptr, 10), std::nullopt};
    auto [v, sym] = resolve_value(t, ln);
    auto it = symbols_.find(t);
    if (it->second.kind != SymKind::code)
      throw ParseError(ln, "branch target '" + t + "' is not a code label");
    return {v - static_cast<int64_t>(addr) - 1, sym};
  }

  Instruction parse_instr(const std::string& text, uint64_t addr, int ln) {
    auto toks = detail::split_tokens(text);
    const std::string& m = toks[0];
    auto need = [&](size_t n) {
      if (toks.size() < n) throw ParseError(ln, m + ": missing operand");
    };
    auto exactly = [&](size_t n) {
      if (toks.size() != n) throw ParseError(ln, m + ": wrong operand count");
    };
    if (m == "JMP") {
      exactly(2);
      auto [d, sym] = resolve_target(toks[1], addr, ln);
      return Instruction::jmp(d, sym);
    }
    if (m == "BNZ") {
      exactly(3);
      Reg r = parse_reg(toks[1], ln);
      if (r.is_pc()) throw ParseError(ln, "BNZ: pc not allowed");
      auto [d, sym] = resolve_target(toks[2], addr, ln);
      return Instruction::bnz(r, d, sym);
    }
    if (m == "CALL") {
      exactly(2);
      return Instruction::call(parse_reg(toks[1], ln));
    }
    if (m == "RET") { exactly(1); return Instruction::ret(); }
    if (m == "ENDBR") { exactly(1); return Instruction::endbr(); }
    if (m == "LFENCE") { exactly(1); return Instruction::lfence(); }
    if (m == "LD" || m == "ST") {
      // LD [ r + d ] , rX  with optional !pub on LD
      need(2);
      size_t i = 1;
      auto expect = [&](const std::string& s) {
        if (i >= toks.size() || toks[i] != s)
          throw ParseError(ln, m + ": expected '" + s + "'");
        ++i;
      };
      expect("[");
      need(i + 1);
      Reg basereg = parse_reg(toks[i++], ln);
      int64_t d = 0;
      std::optional<std::string> sym;
      if (i < toks.size() && toks[i] == "+") {
        ++i;
        need(i + 1);
        std::tie(d, sym) = resolve_value(toks[i++], ln);
      }
      expect("]");
      need(i + 1);
      Reg other = parse_reg(toks[i++], ln);
      bool pub = false;
      if (i < toks.size() && toks[i] == "!pub") { pub = true; ++i; }
      if (i != toks.size()) throw ParseError(ln, m + ": trailing tokens");
      if (m == "LD") {
        if (!other.is_gpr() && !other.is_sp())
          throw ParseError(ln, "LD destination must be a gpr or sp");
        auto ins = Instruction::ld(basereg, d, other, sym);
        ins.pub_hint = pub;
        return ins;
      }
      if (pub) throw ParseError(ln, "!pub applies to LD only");
      if (other.is_pc()) throw ParseError(ln, "ST source cannot be pc");
      return Instruction::st(basereg, d, other, sym);
    }
    if (m == "DIV") {
      exactly(4);
      Reg dest = parse_reg(toks[1], ln);
      if (!dest.is_gpr() && !dest.is_sp()) throw ParseError(ln, "DIV destination must be gpr/sp");
      Reg a = parse_reg(toks[2], ln), b = parse_reg(toks[3], ln);
      return Instruction::div(a, b, dest);
    }
    // arithmetic OPs
    static const std::map<std::string, Opcode> ops = {
        {"MOV", Opcode::MOV}, {"ADD", Opcode::ADD}, {"SUB", Opcode::SUB},
        {"XOR", Opcode::XOR}, {"AND", Opcode::AND}, {"OR", Opcode::OR},
        {"MUL", Opcode::MUL}, {"MAX", Opcode::MAX}, {"MIN", Opcode::MIN},
        {"CONST", Opcode::CONST}};
    auto oit = ops.find(m);
    if (oit == ops.end()) throw ParseError(ln, "unknown opcode '" + m + "'");
    Opcode op = oit->second;
    exactly(2 + opcode_arity(op));
    Reg dest = parse_reg(toks[1], ln);
    if (!dest.is_gpr() && !dest.is_sp())
      throw ParseError(ln, m + ": destination must be a gpr or sp");
    std::vector<Operand> ins;
    for (size_t i = 2; i < toks.size(); ++i) {
      const std::string& t = toks[i];
      if (t == "sp" || t == "zr" || (t.size() >= 2 && t[0] == 'r' &&
                                     detail::is_integer(t.substr(1)))) {
        Reg r = parse_reg(t, ln);
        if (op == Opcode::CONST) throw ParseError(ln, "CONST takes an immediate");
        ins.push_back(Operand::of_reg(r));
      } else {
        auto [v, sym] = resolve_value(t, ln);
        ins.push_back(Operand::of_imm(v, sym));
      }
    }
    return Instruction::mkop(op, dest, std::move(ins));
  }

  void resolve_args(const ArgsDecl& a) {
    auto it = symbols_.find(a.label);
    if (it == symbols_.end() || it->second.kind != SymKind::code)
      throw ParseError(a.line, ".args: undefined label '" + a.label + "'");
    uint64_t addr = it->second.addr;
    auto k = prog_.instrs[addr].kind;
    if (k != Instruction::Kind::Call && k != Instruction::Kind::Ret)
      throw ParseError(a.line, ".args: '" + a.label + "' is not a CALL or RET");
    prog_.calling_convention[addr] = a.regs;
  }

  void validate() {
    if (prog_.instrs.empty()) throw ParseError(0, "program has no instructions");
    for (const auto& [r, v] : prog_.reg_init) {
      if (!r.is_gpr() && !r.is_sp()) throw ParseError(0, ".reg applies to gprs/sp only");
    }
  }
};

inline Program parse_program(const std::string& text) { return Parser{}.parse(text); }

}  // namespace sct
