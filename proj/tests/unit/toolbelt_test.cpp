// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support/test_util.hpp"
#include "uala/toolbelt.hpp"

namespace uala {
namespace {

using testing::expect_error;
using testing::TempDir;

const char* kMilhouse =
    "Milhouse Mussolini Van Houten is a recurring character in the Fox animated television series The Simpsons "
    "voiced by Pamela Hayden and created by Matt Groening. Milhouse is Bart Simpson's best friend. He lives in "
    "Springfield. Milhouse was named after U.S. president Richard Nixon, whose middle name was Milhous. He wears "
    "glasses. His parents are Kirk and Luann.";

std::shared_ptr<WikiBackend> mock_wiki(std::map<std::string, std::string> pages,
                                       std::map<std::string, std::vector<std::string>> suggestions = {}) {
  return std::make_shared<MockWikiBackend>(std::move(pages), std::move(suggestions), 5);
}

TEST(ParseAction, WikipediaGrammar) {
  EXPECT_EQ(parse_action("Search[Colorado orogeny]", ToolGrammar::Wikipedia),
            (ToolAction{ActionKind::Search, "Colorado orogeny"}));
  EXPECT_EQ(parse_action("Action 3: Finish[Richard Nixon]", ToolGrammar::Wikipedia),
            (ToolAction{ActionKind::Finish, "Richard Nixon"}));
  EXPECT_EQ(parse_action("lookup[ eastern sector ]", ToolGrammar::Wikipedia),
            (ToolAction{ActionKind::Lookup, "eastern sector"}));
  EXPECT_EQ(parse_action("Search[High Plains (United States)]", ToolGrammar::Wikipedia).argument,
            "High Plains (United States)");
  EXPECT_EQ(parse_action("Finish[]", ToolGrammar::Wikipedia).argument, "");
  expect_error(ErrorCode::MalformedAction, [] { parse_action("Think[hmm]", ToolGrammar::Wikipedia); });
  expect_error(ErrorCode::MalformedAction, [] { parse_action("Search[x", ToolGrammar::Wikipedia); });
  expect_error(ErrorCode::MalformedAction, [] { parse_action("Search[]", ToolGrammar::Wikipedia); });
  expect_error(ErrorCode::MalformedAction, [] { parse_action("lookup[x]", ToolGrammar::Web); });
}

TEST(ParseAction, WebGrammarAndRender) {
  const auto a = parse_action("Action: search[10 AU to light years]", ToolGrammar::Web);
  EXPECT_EQ(a, (ToolAction{ActionKind::WebSearch, "10 AU to light years"}));
  EXPECT_EQ(render_action(a, ToolGrammar::Web), "search[10 AU to light years]");
  EXPECT_EQ(render_action({ActionKind::Finish, "B"}, ToolGrammar::Web), "finish[B]");
  EXPECT_EQ(render_action({ActionKind::Lookup, "named after"}, ToolGrammar::Wikipedia), "Lookup[named after]");
}

TEST(Sentences, Boundaries) {
  EXPECT_EQ(split_sentences("Dr. Who lives here. He is old! Is he? Yes."),
            (std::vector<std::string>{"Dr. Who lives here.", "He is old!", "Is he?", "Yes."}));
  EXPECT_EQ(split_sentences("Named after U.S. president Nixon. Next one."),
            (std::vector<std::string>{"Named after U.S. president Nixon.", "Next one."}));
  EXPECT_EQ(split_sentences("It rose 3.5 m in 2010.[4] Then fell."),
            (std::vector<std::string>{"It rose 3.5 m in 2010.[4]", "Then fell."}));
  EXPECT_EQ(split_sentences("Line one\nLine two"), (std::vector<std::string>{"Line one", "Line two"}));
}

TEST(WikiSearch, FirstFiveSentencesAndLookupCursor) {
  ToolEnvironment env;
  env.wiki = mock_wiki({{"Milhouse", kMilhouse}});
  ToolSession s(env, ToolGrammar::Wikipedia);
  const auto page = s.wiki_search("Milhouse");
  EXPECT_EQ(page.source, ObservationSource::WikiPage);
  EXPECT_TRUE(page.text.starts_with("Milhouse Mussolini Van Houten is a recurring character"));
  EXPECT_TRUE(page.text.ends_with("He wears glasses."));
  const auto hit = s.wiki_lookup("named after");
  EXPECT_EQ(hit.text, "(Result 1 / 1) Milhouse was named after U.S. president Richard Nixon, whose middle name was "
                      "Milhous.");
  EXPECT_EQ(s.wiki_lookup("named after").text, "No more results.");
  EXPECT_EQ(s.wiki_lookup("Springfield").text, "(Result 1 / 1) He lives in Springfield.");
  EXPECT_EQ(s.calls(), 4u);
  EXPECT_EQ(env.usage.search.load(), 1u);
  EXPECT_EQ(env.usage.lookup.load(), 3u);
}

TEST(WikiSearch, MissGivesRankedSuggestions) {
  ToolEnvironment env;
  env.wiki = mock_wiki({{"Adam Clayton Powell III", "x."},
                       {"Adam Clayton Powell (film)", "x."},
                       {"Adam Powell", "x."},
                       {"Isabel Washington Powell", "x."},
                       {"Seventh Avenue (Manhattan)", "x."},
                       {"Giancarlo Esposito", "x."}});
  ToolSession s(env, ToolGrammar::Wikipedia);
  const auto miss = s.wiki_search("Adam Clayton Powell");
  EXPECT_EQ(miss.source, ObservationSource::WikiSuggestions);
  // Word-set Jaccard: 3/4, 3/4 (tie broken by title), 2/3, 1/5; zero overlap dropped.
  EXPECT_EQ(miss.text,
            "Could not find [Adam Clayton Powell]. Similar: ['Adam Clayton Powell (film)', 'Adam Clayton Powell III', "
            "'Adam Powell', 'Isabel Washington Powell'].");
  EXPECT_TRUE(miss.call_counted);
  EXPECT_EQ(s.calls(), 1u);
}

TEST(WikiSearch, ExplicitSuggestionsAreTruncated) {
  ToolEnvironment env;
  env.wiki = mock_wiki({}, {{"Adam Clayton Powell",
                            {"Adam Clayton Powell III", "Seventh Avenue (Manhattan)",
                             "Adam Clayton Powell Jr. State Office Building", "Isabel Washington Powell", "Adam Powell",
                             "Adam Clayton Powell (film)", "Giancarlo Esposito"}}});
  ToolSession s(env, ToolGrammar::Wikipedia);
  EXPECT_EQ(s.wiki_search("Adam Clayton Powell").text,
            "Could not find [Adam Clayton Powell]. Similar: ['Adam Clayton Powell III', 'Seventh Avenue (Manhattan)', "
            "'Adam Clayton Powell Jr. State Office Building', 'Isabel Washington Powell', 'Adam Powell'].");
}

TEST(WikiLookup, NeedsAPageAndIsNotCounted) {
  ToolEnvironment env;
  env.wiki = mock_wiki({{"Milhouse", kMilhouse}});
  ToolSession s(env, ToolGrammar::Wikipedia);
  expect_error(ErrorCode::NoPageContext, [&] { s.wiki_lookup("x"); });
  expect_error(ErrorCode::MalformedAction, [&] { s.execute({ActionKind::Finish, "y"}); });
  expect_error(ErrorCode::MalformedAction, [&] { s.execute({ActionKind::WebSearch, "y"}); });
  EXPECT_EQ(s.calls(), 0u);
  EXPECT_EQ(env.usage.total(), 0u);
}

TEST(WebSearch, SnippetPriority) {
  ToolEnvironment env;
  env.web = std::make_shared<MockWebBackend>(std::map<std::string, SnippetFields>{
      {"10 AU to light years", {{"answer_box", "0.000158125"}, {"first_result_snippet", "long text"}}},
      {"only snippet", {{"first_result_snippet", "snippet"}, {"answer_box", "  "}}},
  });
  ToolSession s(env, ToolGrammar::Web);
  EXPECT_EQ(s.web_search("10 AU to light years").text, "0.000158125");
  EXPECT_EQ(s.web_search("only snippet").text, "snippet");
  const auto none = s.web_search("nothing");
  EXPECT_EQ(none.source, ObservationSource::EmptySnippet);
  EXPECT_EQ(s.calls(), 3u);
  EXPECT_EQ(env.usage.web_search.load(), 3u);
}

TEST(Tape, RecordThenReplay) {
  TempDir dir("tape");
  auto inner = std::make_shared<MockWikiBackend>(std::map<std::string, std::string>{{"Milhouse", kMilhouse}});
  auto tape = std::make_shared<ToolTape>();
  TapeWikiBackend recorder(tape, inner);
  const auto live = recorder.fetch("Milhouse");
  recorder.fetch("Nobody");
  tape->save(dir.path() / "tape.jsonl");

  TapeWikiBackend replay(ToolTape::load(dir.path() / "tape.jsonl"));
  const auto again = replay.fetch("Milhouse");
  EXPECT_EQ(again.text, live.text);
  EXPECT_FALSE(replay.fetch("Nobody").found);
  expect_error(ErrorCode::FixtureMiss, [&] { replay.fetch("Unseen"); });
}

TEST(Corpus, LoadsFixtureFile) {
  const auto corpus = load_mock_corpus(testing::fixture_dir() / "colorado" / "corpus.json");
  const auto f = corpus.wiki->fetch("high plains (united states)");
  EXPECT_TRUE(f.found);
  EXPECT_EQ(f.title, "High Plains (United States)");
}

TEST(PythonRepr, QuotesLikePython) {
  EXPECT_EQ(python_list_repr({"a", "it's"}), "['a', \"it's\"]");
  EXPECT_EQ(python_list_repr({}), "[]");
}

}  // namespace
}  // namespace uala
