#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "actguard/parser.hpp"
#include "actguard/sim_agent.hpp"
#include "test_util.hpp"

using namespace actguard;

namespace {

std::vector<nlohmann::json> load_corpus() {
  std::ifstream in(std::string(ACTGUARD_TEST_DATA) + "/fixtures/parser_corpus.jsonl");
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

DialectConfig dialect_config(DialectId id) { return DialectTable::defaults().get(id); }

}  // namespace

TEST(Parser, TarsThoughtAndClick) {
  const auto p = parse("Thought: tap settings\nAction: click(point='(100 200)')", DialectId::UiTarsV1);
  EXPECT_EQ(p.thought, "tap settings");
  EXPECT_EQ(p.action, Action::click(100, 200));
  EXPECT_EQ(p.dialect, DialectId::UiTarsV1);
}

TEST(Parser, BoxedScrollAnchor) {
  const auto p = parse("Action: scroll(point='<|box_start|>(50 60)<|box_end|>', direction='down')", DialectId::UiTarsV15);
  EXPECT_EQ(p.action, Action::scroll(Direction::Down, Point{50, 60}));
}

TEST(Parser, QwenSwipeIsDrag) {
  const auto p = parse(
      "<tool_call>{\"name\": \"mobile_use\", \"arguments\": {\"action\": \"swipe\", \"coordinate\": [100,900], "
      "\"coordinate2\": [100,300]}}</tool_call>",
      DialectId::QwenToolCall);
  EXPECT_EQ(p.action, Action::drag({100, 900}, {100, 300}));
}

TEST(Parser, MultipleActionsWarnAndKeepFirst) {
  const auto p = parse("Action: click(point='(1 2)')\nAction: press_back()", DialectId::UiTarsV1);
  EXPECT_EQ(p.action, Action::click(1, 2));
  ASSERT_EQ(p.warnings.size(), 1u);
}

TEST(Parser, ErrorCarriesOffset) {
  const std::string text = "Action: click(point='(1 2)'";
  try {
    parse(text, DialectId::UiTarsV1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_LE(e.offset(), text.size());
    EXPECT_FALSE(e.reason().empty());
  }
}

TEST(Parser, TryParseReturnsError) {
  const auto r = try_parse("nothing here", DialectId::QwenToolCall);
  ASSERT_TRUE(std::holds_alternative<ParseError>(r));
}

TEST(History, Rendering) {
  ParsedOutput a;
  a.thought = "open the app";
  a.action = Action::click(10, 10);
  EXPECT_EQ(render_history_entry(a, 1), "step 1: open the app");
  ParsedOutput b;
  b.action = Action::scroll(Direction::Up);
  EXPECT_EQ(render_history_entry(b, 2), "step 2: Swipe to up");
  EXPECT_EQ(render_history({}), "");
  EXPECT_EQ(render_history({"step 1: a", "step 2: b"}), "step 1: a\nstep 2: b");
}

TEST(History, ThoughtNewlinesFlattened) {
  ParsedOutput a;
  a.thought = "line one\nline two";
  a.action = Action::press_back();
  EXPECT_EQ(render_history_entry(a, 3), "step 3: line one line two");
}

TEST(ParserCorpus, EveryCaseMatches) {
  const auto corpus = load_corpus();
  ASSERT_GE(corpus.size(), 150u);
  std::set<std::pair<std::string, std::string>> verbs_seen;
  std::size_t errors = 0;
  for (const auto& c : corpus) {
    const auto dialect = dialect_from_string(c["dialect"].get<std::string>());
    ASSERT_TRUE(dialect);
    const ScreenDims dims{c["dims"][0].get<int>(), c["dims"][1].get<int>()};
    const auto text = c["text"].get<std::string>();
    const auto r = try_parse(text, *dialect);
    if (c["expected"].is_null()) {
      EXPECT_TRUE(std::holds_alternative<ParseError>(r)) << "should fail: " << text;
      ++errors;
      continue;
    }
    ASSERT_TRUE(std::holds_alternative<ParsedOutput>(r))
        << text << " -> " << std::get<ParseError>(r).what();
    const Action a = normalize(std::get<ParsedOutput>(r).action, dialect_config(*dialect), dims);
    const auto got = canonical_serialize(a);
    EXPECT_EQ(got, c["expected"].get<std::string>()) << text;
    verbs_seen.insert({c["dialect"].get<std::string>(), got.substr(0, got.find('('))});
  }
  EXPECT_GE(errors, 60u);
  for (const char* d : {"ui-tars-1.0", "ui-tars-1.5"}) {
    for (const char* v : {"click", "long_press", "type", "scroll", "open_app", "drag", "press_home", "press_back",
                          "wait", "finished"}) {
      EXPECT_TRUE(verbs_seen.count({d, v})) << d << " " << v;
    }
  }
  for (const char* v : {"click", "long_press", "drag", "type", "key", "open_app", "system_button", "wait", "terminate"}) {
    EXPECT_TRUE(verbs_seen.count({"qwen-tool-call", v})) << v;
  }
}

TEST(ParserCorpus, RenderedCompletionsRoundTrip) {
  // Everything the simulated agent can emit parses back to the same action.
  const ScreenDims dims{1080, 2400};
  const std::vector<Action> actions = {Action::click(540, 1200), Action::long_press(0, 0), Action::type_text("a 'b' \"c\""),
                                       Action::scroll(Direction::Right, Point{10, 20}), Action::open_app("Clock"),
                                       Action::press_home(), Action::press_back(), Action::wait(), Action::finished("ok"),
                                       Action::drag({100, 2000}, {100, 400})};
  for (auto id : {DialectId::UiTarsV15, DialectId::QwenToolCall}) {
    const auto cfg = dialect_config(id);
    for (const auto& a : actions) {
      if (id == DialectId::QwenToolCall && (a.kind == ActionType::Scroll || a.kind == ActionType::Finished ||
                                            a.kind == ActionType::PressHome || a.kind == ActionType::PressBack)) {
        continue;
      }
      const auto text = render_completion(a, cfg, dims);
      EXPECT_EQ(normalize(parse(text, id).action, cfg, dims), a) << text;
    }
  }
  // A 0..1000 basis loses precision on larger screens; stay within one step.
  const auto v1 = dialect_config(DialectId::UiTarsV1);
  for (const auto& a : actions) {
    const auto text = render_completion(a, v1, dims);
    Action back = normalize(parse(text, DialectId::UiTarsV1).action, v1, dims);
    EXPECT_EQ(back.kind, a.kind) << text;
    if (a.point) {
      EXPECT_LE(std::abs(back.point->x - a.point->x), 2) << text;
      EXPECT_LE(std::abs(back.point->y - a.point->y), 3) << text;
      back.point = a.point;
      back.point2 = a.point2;
    }
    EXPECT_EQ(back, a) << text;
  }
}

TEST(ParserFuzz, TenThousandCasesNeverAbort) {
  const auto corpus = load_corpus();
  std::mt19937_64 rng(20240601);
  const std::string alphabet = "()'\",=<>|_ \n\\[]{}:0123456789abcdefghijklmnopqrstuvwxyz-.";
  std::uniform_int_distribution<std::size_t> pick_case(0, corpus.size() - 1);
  std::uniform_int_distribution<int> op(0, 4);
  std::uniform_int_distribution<std::size_t> pick_char(0, alphabet.size() - 1);
  std::size_t parsed = 0;
  std::size_t rejected = 0;
  for (int i = 0; i < 10'000; ++i) {
    std::string s = corpus[pick_case(rng)]["text"].get<std::string>();
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits; ++e) {
      const std::size_t pos = s.empty() ? 0 : rng() % (s.size() + 1);
      switch (op(rng)) {
        case 0: s.insert(pos, 1, alphabet[pick_char(rng)]); break;
        case 1: if (pos < s.size()) s.erase(pos, 1); break;
        case 2: if (pos < s.size()) s[pos] = alphabet[pick_char(rng)]; break;
        case 3: s = s.substr(0, pos); break;
        default: s.insert(pos, 1, static_cast<char>(rng() & 0xff)); break;
      }
    }
    for (auto id : {DialectId::UiTarsV1, DialectId::UiTarsV15, DialectId::QwenToolCall}) {
      const auto r = try_parse(s, id);
      if (std::holds_alternative<ParsedOutput>(r)) {
        EXPECT_TRUE(is_valid(std::get<ParsedOutput>(r).action));
        ++parsed;
      } else {
        ++rejected;
      }
    }
  }
  EXPECT_EQ(parsed + rejected, 30'000u);
  EXPECT_GT(rejected, 0u);
}
