#include <catch2/catch_amalgamated.hpp>

#include "oracle_semantics.hpp"
#include "sct/explore.hpp"
#include "sct/parser.hpp"

using namespace sct;

namespace {

Program prog(const std::string& body) { return parse_program(body); }

Configuration run_steps(const Program& p, size_t n) {
  Configuration c = initial_configuration(p);
  for (size_t i = 0; i < n; ++i) c = step_sequential(c, p).config;
  return c;
}

// serialize an engine trace in the oracle's format
std::string show_trace(const Trace& t) {
  std::string s;
  for (size_t i = 0; i < t.steps.size(); ++i) {
    const auto& st = t.steps[i];
    s += std::to_string(st.instr_addr);
    s += st.transient_rule ? " t " : " s ";
    s += st.obs.str();
    s += " | ";
    s += oracle::show_config(t.post(i));
    s += "\n";
  }
  if (t.truncated) s += "...bound\n";
  return s;
}

std::multiset<std::string> engine_traces(const Program& p, const HardwareMode& hw,
                                         size_t bound) {
  std::multiset<std::string> out;
  ExplorationLimits lim;
  lim.max_steps = bound;
  explore(p, lim, hw, [&](Trace&& t) {
    out.insert(show_trace(t));
    return true;
  });
  return out;
}

void check_oracle_equal(const std::string& text, HardwareMode hw = HardwareMode::core(),
                        size_t bound = 64) {
  Program p = prog(text);
  auto a = engine_traces(p, hw, bound);
  auto b = oracle::enumerate_traces(p, hw, bound);
  if (a != b) {
    for (const auto& t : a)
      if (!b.count(t)) UNSCOPED_INFO("engine-only trace:\n" + t);
    for (const auto& t : b)
      if (!a.count(t)) UNSCOPED_INFO("oracle-only trace:\n" + t);
  }
  CHECK(a == b);
}

}  // namespace

TEST_CASE("zr always reads zero public") {
  Program p = prog(R"(
.proc f frame=0
f: ENDBR
   ADD r1, zr, 3
   MOV r2, zr
fr: RET
.endproc
.args fr =
)");
  Configuration c = run_steps(p, 3);
  CHECK(c.gprs[1] == LabeledValue{3, Label::PUB});
  CHECK(c.gprs[2] == LabeledValue{0, Label::PUB});
}

TEST_CASE("arithmetic wraps modulo the word width") {
  Program p = prog(R"(
.width 8
.proc f frame=0
f: ENDBR
   CONST r1, 255
   ADD r1, r1, 1
fr: RET
.endproc
.args fr =
)");
  Configuration c = run_steps(p, 3);
  CHECK(c.gprs[1].value == 0);
}

TEST_CASE("BNZ with zero condition falls through and exposes the condition") {
  Program p = prog(R"(
.proc f frame=0
f: ENDBR
b: BNZ r1, f
fr: RET
.endproc
.args fr =
)");
  Configuration c = run_steps(p, 1);  // at the BNZ
  Successor s = step_sequential(c, p);
  CHECK(s.config.pc.value == 2);
  CHECK(s.obs == Observation::bnz(LabeledValue{0, Label::PUB}));
  // transient: the mispredicted direction takes the branch
  auto ts = step_transient(c, p, HardwareMode::core());
  REQUIRE(ts.size() == 1);
  CHECK(ts[0].config.pc.value == p.wrap(1 + 1 + p.instrs[1].disp));
  CHECK(ts[0].config.transient);
}

TEST_CASE("store forwards sequentially without committing until LFENCE") {
  Program p = prog(R"(
.data A PUB = 0
.data S SEC = 5
.proc f frame=0
f: ENDBR
   LD [zr + S], r1
   ST [zr + A], r1
   LD [zr + A], r2
   LFENCE
fr: RET
.endproc
.args fr =
)");
  Configuration c = run_steps(p, 3);  // after the store
  CHECK(c.dmem.at(0).value == 0);     // memory untouched
  REQUIRE(c.spec_stores.size() == 1);
  CHECK(c.spec_stores[0].second == LabeledValue{5, Label::SEC});
  c = step_sequential(c, p).config;   // the load forwards from the store set
  CHECK(c.gprs[2] == LabeledValue{5, Label::SEC});
  CHECK(c.dmem.at(0).value == 0);
  c = step_sequential(c, p).config;   // LFENCE drains
  CHECK(c.spec_stores.empty());
  CHECK(c.dmem.at(0) == LabeledValue{5, Label::SEC});
}

TEST_CASE("transient load reads memory or any same-address uncommitted store") {
  Program p = prog(R"(
.data A PUB = 1
.proc f frame=0
f: ENDBR
   CONST r1, 2
   ST [zr + A], r1
   CONST r1, 3
   ST [zr + A], r1
   LD [zr + A], r2
fr: RET
.endproc
.args fr =
)");
  Configuration c = run_steps(p, 5);  // at the load
  auto ts = step_transient(c, p, HardwareMode::core());
  std::multiset<uint64_t> vals;
  for (const auto& s : ts) vals.insert(s.config.gprs[2].value);
  CHECK(vals == std::multiset<uint64_t>{1, 2, 3});
  // sequential reads the most recent store
  CHECK(step_sequential(c, p).config.gprs[2].value == 3);
  // with three distinct sources: 1 sequential + 3 transient records
  CHECK(successors(c, p, HardwareMode::core()).size() == 4);
}

TEST_CASE("transient call targets every other ENDBR and still pushes the return address") {
  Program p = prog(R"(
.proc main frame=0
main: ENDBR
      CONST r1, f1
c:    CALL r1
mr:   RET
.endproc
.args c =
.args mr =
.proc f1 frame=0
f1: ENDBR
r1l: RET
.endproc
.args r1l =
.proc f2 frame=0
f2: ENDBR
r2l: RET
.endproc
.args r2l =
)");
  // ENDBRs at 0, 4, 6; sequential target is 4
  Configuration c = run_steps(p, 2);
  auto ts = step_transient(c, p, HardwareMode::core());
  std::set<uint64_t> targets;
  for (const auto& s : ts) {
    targets.insert(s.config.pc.value);
    REQUIRE(s.config.call_stack.size() == 1);
    CHECK(s.config.call_stack[0] == 3);
  }
  CHECK(targets == std::set<uint64_t>{0, 6});
}

TEST_CASE("halted configurations self-loop") {
  Program p = prog(R"(
.proc f frame=0
f: ENDBR
fr: RET
.endproc
.args fr =
)");
  Configuration c = run_steps(p, 1);  // at RET with empty callstack
  Successor s = step_sequential(c, p);
  CHECK(s.halted);
  CHECK(s.config == c);
  auto recs = successors(c, p, HardwareMode::core());
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].halted);
}

TEST_CASE("transient LFENCE has exactly one successor: the halt self-loop") {
  Program p = prog(R"(
.proc f frame=0
f: ENDBR
   BNZ r1, fence
over: RET
fence: LFENCE
fr: RET
.endproc
.args over =
.args fr =
)");
  Configuration c = run_steps(p, 1);
  auto ts = step_transient(c, p, HardwareMode::core());  // mispredict into the fence
  REQUIRE(ts.size() == 1);
  Configuration tc = ts[0].config;
  REQUIRE(tc.pc.value == 3);
  auto recs = successors(tc, p, HardwareMode::core());
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].halted);
  CHECK(recs[0].config == tc);
}

TEST_CASE("straight-line program yields exactly one maximal trace") {
  Program p = prog(R"(
.proc f frame=0
f: ENDBR
   MOV r1, 1
fr: RET
.endproc
.args fr =
)");
  size_t n = 0;
  explore(p, ExplorationLimits{}, HardwareMode::core(), [&](Trace&&) { ++n; return true; });
  CHECK(n == 1);
}

TEST_CASE("a single BNZ yields exactly two maximal traces") {
  Program p = prog(R"(
.proc f frame=0
f: ENDBR
   BNZ r1, fr
   MOV r1, 1
fr: RET
.endproc
.args fr =
)");
  size_t n = 0;
  explore(p, ExplorationLimits{}, HardwareMode::core(), [&](Trace&&) { ++n; return true; });
  CHECK(n == 2);
}

TEST_CASE("transient bit is sticky and PC is always public") {
  Program p = prog(R"(
.data A PUB = 1
.proc f frame=0
f: ENDBR
   CONST r1, 2
   ST [zr + A], r1
   LD [zr + A], r2
   BNZ r2, fr
   MOV r2, 0
fr: RET
.endproc
.args fr =
)");
  explore(p, ExplorationLimits{}, HardwareMode::core(), [&](Trace&& t) {
    bool transient_seen = false;
    for (size_t i = 0; i < t.steps.size(); ++i) {
      const Configuration& post = t.post(i);
      if (transient_seen) CHECK(post.transient);
      transient_seen = transient_seen || post.transient;
      CHECK(post.pc.label == Label::PUB);
    }
    return true;
  });
}

TEST_CASE("declassification makes repeated exposure of one secret public") {
  Program p = prog(R"(
.data S SEC = 1
.proc f frame=0
f: ENDBR
   LD [zr + S], r1
   BNZ r1, a
a: BNZ r1, b
b: RET
.endproc
.args b =
)");
  Trace t = sequential_trace(p, 32);
  // first BNZ exposes SEC, second exposes the declassified PUB view
  std::vector<Label> bnz_labels;
  for (const auto& s : t.steps)
    if (s.obs.kind == Observation::Kind::Bnz) bnz_labels.push_back(s.obs.a.label);
  REQUIRE(bnz_labels.size() == 2);
  CHECK(bnz_labels[0] == Label::SEC);
  CHECK(bnz_labels[1] == Label::PUB);
}

TEST_CASE("if the store set is empty every mapped load agrees with memory") {
  Program p = prog(R"(
.data A PUB = 9
.proc f frame=0
f: ENDBR
   LD [zr + A], r1
fr: RET
.endproc
.args fr =
)");
  Configuration c = run_steps(p, 1);
  REQUIRE(c.spec_stores.empty());
  auto recs = successors(c, p, HardwareMode::core());
  for (const auto& r : recs) CHECK(r.config.gprs[1].value == 9);
}

TEST_CASE("oracle equivalence: straight-line with stores and fences") {
  check_oracle_equal(R"(
.width 4
.data A PUB = 1
.data S SEC = 3
.proc f frame=0
f: ENDBR
   LD [zr + S], r1
   ST [zr + A], r1
   LFENCE
   LD [zr + A], r2
fr: RET
.endproc
.args fr =
)");
}

TEST_CASE("oracle equivalence: branches and unmapped accesses") {
  check_oracle_equal(R"(
.width 4
.data A PUB = 2
.proc f frame=0
f: ENDBR
   BNZ r1, over
   LD [r1 + 9], r2
   ST [r2 + 11], r1
over: RET
.endproc
.args over =
)");
}

TEST_CASE("oracle equivalence: calls, returns and division") {
  check_oracle_equal(R"(
.width 4
.data A PUB = 2
.proc main frame=0
main: ENDBR
      CONST r1, g
c1:   CALL r1
      DIV r2, r1, r2
mr:   RET
.endproc
.args c1 =
.args mr =
.proc g frame=0
g: ENDBR
gr: RET
.endproc
.args gr =
)",
                     HardwareMode::core(), 40);
}

TEST_CASE("oracle equivalence: stack traffic under psf mode") {
  HardwareMode hw;
  hw.psf = true;
  check_oracle_equal(R"(
.width 4
.stack size=4
.data S SEC = 3
.proc f frame=2
f: ENDBR
   SUB sp, sp, 2
   LD [zr + S], r1
   ST [sp + 0], r1
   ST [sp + 1], zr
   LD [sp + 1], r2
   ADD sp, sp, 2
fr: RET
.endproc
.args fr =
)",
                     hw, 48);
}

TEST_CASE("oracle equivalence: sls fall-through on jump and call") {
  HardwareMode hw;
  hw.sls = true;
  check_oracle_equal(R"(
.width 4
.proc main frame=0
main: ENDBR
      JMP over
      MOV r1, 1
over: CONST r2, g
c1:   CALL r2
mr:   RET
.endproc
.args c1 =
.args mr =
.proc g frame=0
g: ENDBR
gr: RET
.endproc
.args gr =
)",
                     hw, 40);
}
