#include <doctest.h>

#include <sstream>
#include <thread>

#include <json.hpp>

#include "cmsa/annotate.hpp"
#include "cmsa/error.hpp"
#include "cmsa/rng.hpp"
#include "test_util.hpp"

using namespace cmsa;
using namespace cmsa::annotate;

namespace {

corpus::Dataset tweets(std::initializer_list<std::string> ids) {
  corpus::Dataset ds;
  for (const auto& id : ids) {
    corpus::Tweet t;
    t.id = id;
    t.text = "متن " + id;
    t.terms = {"فیلم"};
    ds.add(t);
  }
  return ds;
}

AnnotationStore::Now fixed_clock() {
  auto tick = std::make_shared<long long>(0);
  return [tick] {
    return Clock::time_point(std::chrono::milliseconds(1577934245678LL + 1000 * (*tick)++));
  };
}

constexpr auto A1 = Annotator::A1;
constexpr auto A2 = Annotator::A2;
constexpr auto A3 = Annotator::A3;
constexpr auto Neg = Label::Negative;
constexpr auto Neu = Label::Neutral;
constexpr auto Pos = Label::Positive;

}  // namespace

TEST_CASE("annotator and status names") {
  CHECK(parse_annotator("A1") == A1);
  CHECK(parse_annotator("A3") == A3);
  CHECK_THROWS_AS(parse_annotator("A4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_annotator("a1"), std::invalid_argument);
  CHECK(to_string(A2) == "A2");
  CHECK(to_string(Status::AwaitingThird) == "awaiting_third");
  CHECK(to_string(Status::PartiallyLabeled) == "partially_labeled");
}

TEST_CASE("timestamps") {
  const Clock::time_point t(std::chrono::milliseconds(1577934245678LL));
  CHECK(format_timestamp(t) == "2020-01-02T03:04:05.678Z");
  CHECK(parse_timestamp("2020-01-02T03:04:05.678Z") == t);
  CHECK(parse_timestamp("2020-01-02T03:04:05Z") ==
        Clock::time_point(std::chrono::milliseconds(1577934245000LL)));
  CHECK_THROWS(parse_timestamp("yesterday"));
  CHECK_THROWS(parse_timestamp("2020-13-02T03:04:05Z"));
}

TEST_CASE("event record JSON") {
  AnnotationRecord r{"42", A3, Neg, Clock::time_point(std::chrono::milliseconds(1577934245678LL)), 2};
  const auto line = to_json(r);
  CHECK(line ==
        R"({"tweet_id":"42","annotator":"A3","label":"negative","submitted_at":"2020-01-02T03:04:05.678Z","revision":2})");
  CHECK(record_from_json(line, 1) == r);
  try {
    record_from_json(R"({"tweet_id":"1","annotator":"A9","label":"negative","submitted_at":"2020-01-02T03:04:05Z","revision":0})", 7);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(e.line() == 7);
  }
  CHECK_THROWS_AS(record_from_json("{", 1), DataError);
  CHECK_THROWS_AS(record_from_json(R"({"tweet_id":"1","annotator":"A1","label":"great","submitted_at":"2020-01-02T03:04:05Z","revision":0})", 1), DataError);
}

TEST_CASE("derive_status") {
  using L = std::optional<Label>;
  CHECK(derive_status({L{}, L{}, L{}}) == Status::Unlabeled);
  CHECK(derive_status({L{Pos}, L{}, L{}}) == Status::PartiallyLabeled);
  CHECK(derive_status({L{}, L{Neg}, L{}}) == Status::PartiallyLabeled);
  CHECK(derive_status({L{Pos}, L{Pos}, L{}}) == Status::Agreed);
  CHECK(derive_status({L{Pos}, L{Neg}, L{}}) == Status::AwaitingThird);
  CHECK(derive_status({L{Pos}, L{Neg}, L{Neg}}) == Status::Finalized);
  CHECK(derive_status({L{Pos}, L{Neg}, L{Neu}}) == Status::Unresolved);
}

TEST_CASE("workflow examples") {
  AnnotationStore store(tweets({"1", "2", "3"}), std::nullopt, fixed_clock());
  CHECK(store.status("1") == Status::Unlabeled);

  SUBCASE("first label") {
    const auto r = store.submit_label("1", A1, Neg);
    CHECK(r.created);
    CHECK(r.record.revision == 0);
    CHECK(store.status("1") == Status::PartiallyLabeled);
  }
  SUBCASE("unanimous pair") {
    store.submit_label("1", A1, Pos);
    store.submit_label("1", A2, Pos);
    CHECK(store.status("1") == Status::Agreed);
    CHECK(store.export_final()[0].label_final == Pos);
  }
  SUBCASE("third annotator breaks the tie") {
    store.submit_label("1", A1, Pos);
    store.submit_label("1", A2, Neg);
    CHECK(store.status("1") == Status::AwaitingThird);
    store.submit_label("1", A3, Neg);
    CHECK(store.status("1") == Status::Finalized);
    CHECK(store.export_final()[0].label_final == Neg);
  }
  SUBCASE("three distinct labels stay unresolved") {
    store.submit_label("1", A1, Pos);
    store.submit_label("1", A2, Neg);
    store.submit_label("1", A3, Neu);
    CHECK(store.status("1") == Status::Unresolved);
    CHECK_FALSE(store.export_final()[0].label_final);
  }
}

TEST_CASE("submission errors") {
  AnnotationStore store(tweets({"1", "2"}));
  CHECK_THROWS_AS(store.submit_label("9", A1, Pos), NotFoundError);
  CHECK_THROWS_AS(store.submit_label("1", A3, Pos), PolicyError);
  store.submit_label("1", A1, Pos);
  CHECK_THROWS_AS(store.submit_label("1", A3, Pos), PolicyError);
  store.submit_label("1", A2, Pos);
  CHECK_THROWS_AS(store.submit_label("1", A3, Neg), PolicyError);
  CHECK_THROWS_AS(store.submit_label("1", A1, Neg), ConflictError);

  const auto again = store.submit_label("1", A1, Pos);
  CHECK_FALSE(again.created);
  CHECK(again.record.label == Pos);

  CHECK_THROWS_AS(store.revise_label("2", A1, Pos), NotFoundError);
  CHECK_THROWS_AS(store.revise_label("9", A1, Pos), NotFoundError);
}

TEST_CASE("revisions") {
  AnnotationStore store(tweets({"1"}));
  store.submit_label("1", A1, Pos);
  store.submit_label("1", A2, Neg);
  store.submit_label("1", A3, Neg);
  // Making A1 agree with A2 would leave an A3 label on an agreed tweet.
  CHECK_THROWS_AS(store.revise_label("1", A1, Neg), PolicyError);
  const auto r = store.revise_label("1", A3, Pos);
  CHECK(r.revision == 1);
  CHECK(store.export_final()[0].label_final == Pos);
  CHECK(store.revise_label("1", A3, Neu).revision == 2);
  CHECK(store.status("1") == Status::Unresolved);
  CHECK(store.revise_label("1", A1, Neu).revision == 1);
  CHECK(store.status("1") == Status::Finalized);
}

TEST_CASE("task assignment") {
  SUBCASE("empty store") {
    AnnotationStore store{corpus::Dataset{}};
    CHECK_FALSE(store.next_task(A1));
    CHECK_FALSE(store.next_task(A3));
  }
  SUBCASE("already labeled") {
    AnnotationStore store(tweets({"1"}));
    store.submit_label("1", A1, Neu);
    CHECK_FALSE(store.next_task(A1));
    CHECK(store.next_task(A2)->id == "1");
  }
  SUBCASE("lowest numeric id first and idempotent") {
    AnnotationStore store(tweets({"10", "9", "abc", "011"}));
    CHECK(store.next_task(A1)->id == "9");
    CHECK(store.next_task(A1)->id == "9");
    store.submit_label("9", A1, Pos);
    CHECK(store.next_task(A1)->id == "10");
    store.submit_label("10", A1, Pos);
    CHECK(store.next_task(A1)->id == "011");
    store.submit_label("011", A1, Pos);
    CHECK(store.next_task(A1)->id == "abc");
    CHECK(store.next_task(A2)->id == "9");
  }
  SUBCASE("third annotator only sees disagreements") {
    AnnotationStore store(tweets({"1", "2", "3"}));
    store.submit_label("1", A1, Pos);
    store.submit_label("1", A2, Pos);
    store.submit_label("2", A1, Pos);
    store.submit_label("2", A2, Neg);
    const auto t = store.next_task(A3);
    REQUIRE(t);
    CHECK(t->id == "2");
    CHECK(t->label_a1 == Pos);
    CHECK(t->label_a2 == Neg);
    store.submit_label("2", A3, Pos);
    CHECK_FALSE(store.next_task(A3));
  }
}

TEST_CASE("export of a mixed store") {
  AnnotationStore store(tweets({"1", "2", "3"}));
  store.submit_label("1", A1, Pos);
  store.submit_label("1", A2, Pos);
  store.submit_label("2", A1, Neg);
  store.submit_label("2", A2, Neu);
  store.submit_label("3", A1, Neu);
  std::ostringstream out;
  corpus::write_ndjson(out, store.export_final());
  CHECK(out.str() ==
        "{\"id\":\"1\",\"text\":\"متن 1\",\"terms\":[\"فیلم\"],\"label_a1\":\"positive\","
        "\"label_a2\":\"positive\",\"label_a3\":null,\"label_final\":\"positive\"}\n"
        "{\"id\":\"2\",\"text\":\"متن 2\",\"terms\":[\"فیلم\"],\"label_a1\":\"negative\","
        "\"label_a2\":\"neutral\",\"label_a3\":null,\"label_final\":null}\n"
        "{\"id\":\"3\",\"text\":\"متن 3\",\"terms\":[\"فیلم\"],\"label_a1\":\"neutral\","
        "\"label_a2\":null,\"label_a3\":null,\"label_final\":null}\n");
}

TEST_CASE("export then ingest keeps every label") {
  testing::TempDir dir;
  AnnotationStore store(tweets({"1", "2", "3", "4"}));
  store.submit_label("1", A1, Pos);
  store.submit_label("1", A2, Pos);
  store.submit_label("2", A1, Neg);
  store.submit_label("2", A2, Neu);
  store.submit_label("2", A3, Neg);
  store.submit_label("3", A1, Neu);
  const auto exported = store.export_final();
  corpus::export_dataset(dir / "out.ndjson", exported, corpus::Format::Ndjson);
  const auto back = corpus::ingest(dir / "out.ndjson", corpus::Format::Ndjson);
  REQUIRE(back.size() == exported.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == exported[i]);
}

TEST_CASE("event log replay") {
  testing::TempDir dir;
  const auto log = dir / "events.ndjson";
  {
    AnnotationStore store(tweets({"1", "2"}), log, fixed_clock());
    store.submit_label("1", A1, Pos);
    store.submit_label("1", A2, Neg);
    store.submit_label("1", A3, Neg);
    store.revise_label("1", A3, Pos);
    store.submit_label("2", A1, Neu);
    store.submit_label("2", A1, Neu);  // duplicate, not logged
  }
  const auto text = testing::read_text(log);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  CHECK(text.starts_with(R"({"tweet_id":"1","annotator":"A1","label":"positive","submitted_at":"2020-01-02T03:04:05.678Z","revision":0})"));

  AnnotationStore replayed(tweets({"1", "2"}), log);
  CHECK(replayed.status("1") == Status::Finalized);
  CHECK(replayed.export_final()[0].label_final == Pos);
  CHECK(replayed.labels("2")[0] == Neu);
  replayed.submit_label("2", A2, Neu);
  AnnotationStore third(tweets({"1", "2"}), log);
  CHECK(third.status("2") == Status::Agreed);
}

TEST_CASE("replay rejects logs that break the rules") {
  testing::TempDir dir;
  const auto ts = R"("submitted_at":"2020-01-02T03:04:05Z")";
  auto line = [&](const std::string& id, const std::string& a, const std::string& l, int rev) {
    return R"({"tweet_id":")" + id + R"(","annotator":")" + a + R"(","label":")" + l + "\"," + ts +
           ",\"revision\":" + std::to_string(rev) + "}\n";
  };
  auto expect_line = [&](const std::string& body, std::size_t want_line) {
    testing::write_text(dir / "log.ndjson", body);
    try {
      AnnotationStore s(tweets({"1"}), dir / "log.ndjson");
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(e.line() == want_line);
    }
  };
  expect_line(line("7", "A1", "positive", 0), 1);
  expect_line(line("1", "A1", "positive", 0) + line("1", "A3", "positive", 0), 2);
  expect_line(line("1", "A1", "positive", 0) + line("1", "A1", "negative", 0), 2);
  expect_line(line("1", "A1", "positive", 0) + line("1", "A1", "negative", 2) +
                  line("1", "A1", "neutral", 1),
              3);
  expect_line(line("1", "A2", "positive", 1), 1);
  expect_line("\n" + line("1", "A1", "positive", 0) + "not json\n", 3);
}

TEST_CASE("state machine safety under random operations") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    AnnotationStore store(tweets({"1"}));
    for (int step = 0; step < 12; ++step) {
      const auto a = static_cast<Annotator>(rng.below(3));
      const auto l = static_cast<Label>(rng.below(3));
      try {
        if (rng.below(3) == 0) {
          store.revise_label("1", a, l);
        } else {
          store.submit_label("1", a, l);
        }
      } catch (const ConflictError&) {
      } catch (const PolicyError&) {
      } catch (const NotFoundError&) {
      }
      const auto ls = store.labels("1");
      if (ls[2]) {
        REQUIRE(ls[0]);
        REQUIRE(ls[1]);
        CHECK(*ls[0] != *ls[1]);
      }
      const auto s = store.status("1");
      const auto ex = store.export_final()[0];
      CHECK(ex.label_final.has_value() == (s == Status::Agreed || s == Status::Finalized));
    }
  }
}

TEST_CASE("concurrent writers and readers") {
  corpus::Dataset ds;
  for (int i = 0; i < 200; ++i) {
    corpus::Tweet t;
    t.id = std::to_string(i);
    t.text = "x";
    ds.add(t);
  }
  AnnotationStore store(ds);
  std::vector<std::jthread> threads;
  for (auto a : {A1, A2}) {
    threads.emplace_back([&store, a] {
      while (auto t = store.next_task(a)) store.submit_label(t->id, a, Label::Positive);
    });
  }
  threads.emplace_back([&store] {
    for (int i = 0; i < 100; ++i) (void)store.stats();
  });
  threads.clear();
  CHECK(store.stats().per_status.at(Status::Agreed) == 200);
}

TEST_CASE("store statistics") {
  SUBCASE("empty store") {
    AnnotationStore store{corpus::Dataset{}};
    const auto s = store.stats();
    CHECK(s.dataset.n == 0);
    CHECK(s.per_status.size() == 6);
    const auto j = nlohmann::json::parse(stats_to_json(s));
    CHECK(j.at("n") == 0);
    CHECK(j.at("unanimity_rate").is_null());
    CHECK(j.at("adjudication_queue") == 0);
  }
  SUBCASE("mixed store") {
    AnnotationStore store(tweets({"1", "2", "3", "4"}));
    store.submit_label("1", A1, Pos);
    store.submit_label("1", A2, Pos);
    store.submit_label("2", A1, Neg);
    store.submit_label("2", A2, Neu);
    store.submit_label("3", A1, Neg);
    store.submit_label("3", A2, Neg);
    store.submit_label("4", A1, Neu);
    const auto s = store.stats();
    CHECK(s.dataset.n == 4);
    CHECK(s.dataset.n_final == 2);
    CHECK(s.dataset.n_double_annotated == 3);
    REQUIRE(s.dataset.unanimity_rate);
    CHECK(*s.dataset.unanimity_rate == doctest::Approx(2.0 / 3));
    CHECK(s.per_status.at(Status::AwaitingThird) == 1);
    CHECK(s.per_status.at(Status::PartiallyLabeled) == 1);
    const auto j = nlohmann::json::parse(stats_to_json(s));
    CHECK(j.at("per_label_fraction").at("positive") == doctest::Approx(0.5));
    CHECK(j.at("per_label_fraction").at("neutral") == 0.0);
    CHECK(j.at("per_status").at("agreed") == 2);
    CHECK(j.at("adjudication_queue") == 1);
    CHECK(j.at("term_counts").at("فیلم") == 4);
  }
}
