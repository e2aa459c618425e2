#include "coarse/group.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <memory>

#include "coarse/errors.hpp"

using namespace coarse;

namespace {

std::shared_ptr<const MarkedGroup> free_two() {
  return std::make_shared<MarkedGroup>(std::vector<int>{0, 0});
}

std::shared_ptr<const MarkedGroup> z_star_z5() {
  return std::make_shared<MarkedGroup>(std::vector<int>{0, 5});
}

}  // namespace

TEST_CASE("normal form algebra in the free group") {
  auto g = free_two();
  NormalForm x = g->parse("a2.b.a3");
  REQUIRE(g->label(x) == "a2.b.a3");
  REQUIRE(g->word_length(x) == 6);
  REQUIRE(g->relative_length(x) == 3);

  REQUIRE(g->label(g->inverse(x)) == "a-3.b-1.a-2");
  REQUIRE(g->multiply(x, g->inverse(x)).empty());

  REQUIRE(g->label(g->multiply(g->parse("a.b2"), g->parse("b-1"))) == "a.b");
  REQUIRE(g->label(g->multiply(g->parse("a.b2"), g->parse("b-2.a-1"))) == "e");
  REQUIRE(g->label(g->multiply(g->parse("a.b2"), g->parse("b-2.a"))) == "a2");
}

TEST_CASE("cyclic factor exponents are canonical") {
  MarkedGroup g({5});
  REQUIRE(g.canon_exp(0, -1) == 4);
  REQUIRE(g.canon_exp(0, 7) == 2);
  REQUIRE(g.label(g.parse("a-2")) == "a3");
  REQUIRE(g.word_length(g.parse("a3")) == 2);
  REQUIRE(g.word_length(g.parse("a4")) == 1);
  REQUIRE(g.multiply(g.parse("a3"), g.parse("a2")).empty());

  MarkedGroup h({2, 2});
  REQUIRE(h.label(h.generator(1, -1)) == "b");
  REQUIRE(h.word_length(h.parse("a.b.a.b")) == 4);
  REQUIRE(h.relative_length(h.parse("a.b.a.b")) == 4);
}

TEST_CASE("bad group and label input is rejected") {
  REQUIRE_THROWS_AS(MarkedGroup({}), input_error);
  REQUIRE_THROWS_AS(MarkedGroup({1}), input_error);
  REQUIRE_THROWS_AS(MarkedGroup({-3}), input_error);

  auto g = free_two();
  REQUIRE_THROWS_AS(g->parse(""), input_error);
  REQUIRE_THROWS_AS(g->parse("a0"), input_error);
  REQUIRE_THROWS_AS(g->parse("a.a2"), input_error);
  REQUIRE_THROWS_AS(g->parse("q"), input_error);
  REQUIRE_THROWS_AS(g->parse("a1x"), input_error);
  MarkedGroup z5({5});
  REQUIRE_THROWS_AS(z5.parse("a5"), input_error);
}

TEST_CASE("window enumeration is exhaustive and deterministic") {
  auto w3 = make_window(free_two(), 3);
  REQUIRE(w3.n() == 53);
  REQUIRE(w3.labels[0] == "e");
  REQUIRE(w3.id("a.b.a") >= 0);
  REQUIRE(w3.id("a4") == -1);

  auto w6 = make_window(free_two(), 6);
  REQUIRE(w6.n() == 1457);

  auto v5 = make_window(z_star_z5(), 5);
  REQUIRE(v5.n() == 431);

  auto w3b = make_window(free_two(), 3);
  REQUIRE(w3.labels == w3b.labels);

  for (int i = 0; i < w3.n(); ++i) {
    auto inv = w3.group->inverse(w3.elements[static_cast<size_t>(i)]);
    REQUIRE(w3.id(w3.group->label(inv)) >= 0);
  }
}

TEST_CASE("window metrics and the coset-move metric") {
  auto w = make_window(free_two(), 3);
  int e = w.id("e"), a2 = w.id("a2"), b = w.id("b"), ab = w.id("a.b");
  REQUIRE(w.word_metric(a2, b) == 3);
  REQUIRE(w.word_metric(w.id("a"), ab) == 1);
  REQUIRE(w.rel_metric(e, w.id("a3")) == 1);
  REQUIRE(w.rel_metric(w.id("a3"), w.id("b2")) == 2);

  REQUIRE(rel_ball(w, 1).size() == 13);

  auto word = window_space(w, MetricKind::word);
  auto rel = window_space(w, MetricKind::relative);
  for (auto space : {word, rel}) {
    size_t n = static_cast<size_t>(space->n());
    std::vector<double> flat(n * n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        flat[i * n + j] = space->d(static_cast<int>(i), static_cast<int>(j));
    REQUIRE(validate_metric(space->labels(), flat).valid);
  }
  for (int i = 0; i < w.n(); ++i)
    for (int j = 0; j < w.n(); ++j)
      REQUIRE(rel->d(i, j) <= word->d(i, j));
}

TEST_CASE("closed forms agree with breadth-first distances") {
  REQUIRE(verify_word_metric(*free_two(), 6).checked == 1457);
  REQUIRE(verify_relative_metric(*free_two(), 6).checked == 1457);
  REQUIRE(verify_word_metric(*z_star_z5(), 5).checked == 431);
  REQUIRE(verify_relative_metric(*z_star_z5(), 5).checked == 431);

  MarkedGroup z7({7});
  auto w = make_window(std::make_shared<MarkedGroup>(z7), 2);
  REQUIRE(w.n() == 5);
  REQUIRE(w.word_len[static_cast<size_t>(w.id("a5"))] == 2);
}

TEST_CASE("left invariance of both metrics") {
  auto w = make_window(free_two(), 3);
  auto g = w.group;
  NormalForm t = g->parse("a.b");
  for (const char* xs : {"a", "b-1", "a.b.a"}) {
    for (const char* ys : {"e", "a2", "b.a-1"}) {
      NormalForm x = g->parse(xs), y = g->parse(ys);
      NormalForm tx = g->multiply(t, x), ty = g->multiply(t, y);
      NormalForm d1 = g->multiply(g->inverse(x), y);
      NormalForm d2 = g->multiply(g->inverse(tx), ty);
      REQUIRE(g->word_length(d1) == g->word_length(d2));
      REQUIRE(g->relative_length(d1) == g->relative_length(d2));
    }
  }
}
