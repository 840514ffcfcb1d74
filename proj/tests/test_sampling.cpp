#include <doctest.h>

#include <cmath>
#include <random>

#include "cmt/error.hpp"
#include "cmt/model/sampling.hpp"

using namespace cmt;
using namespace cmt::model;

TEST_CASE("temperature scales logits before the softmax") {
  const std::vector<double> z = {0.0, std::log(4.0)};
  const auto p1 = sampling_distribution(z, 1.0, 1.0);
  CHECK(p1[0] == doctest::Approx(0.2));
  CHECK(p1[1] == doctest::Approx(0.8));
  const auto p2 = sampling_distribution(z, 2.0, 1.0);  // exp(ln4 / 2) = 2
  CHECK(p2[0] == doctest::Approx(1.0 / 3));
  CHECK(p2[1] == doctest::Approx(2.0 / 3));
}

TEST_CASE("nucleus keeps the smallest prefix reaching p") {
  const std::vector<double> z = {std::log(0.2), std::log(0.5), std::log(0.3)};
  auto q = sampling_distribution(z, 1.0, 0.7);
  CHECK(q[0] == 0.0);
  CHECK(q[1] == doctest::Approx(0.625));
  CHECK(q[2] == doctest::Approx(0.375));
  q = sampling_distribution(z, 1.0, 0.5);  // 0.5 alone reaches p
  CHECK(q[1] == doctest::Approx(1.0));
  q = sampling_distribution(z, 1.0, 0.81);
  CHECK(q[0] == doctest::Approx(0.2));
}

TEST_CASE("zero temperature is argmax, ties go to the lowest index") {
  const std::vector<double> z = {1.0, 3.0, 3.0, -2.0};
  const auto p = sampling_distribution(z, 0.0, 0.9);
  CHECK(p == std::vector<double>{0, 1, 0, 0});
  std::mt19937_64 rng(0);
  for (int i = 0; i < 20; ++i) CHECK(sample_index(z, 0.0, 0.9, rng) == 1);
}

TEST_CASE("masks exclude entries and degenerate inputs raise") {
  const std::vector<double> z = {5.0, 1.0, 1.0};
  const auto p = sampling_distribution(z, 1.0, 1.0, {false, true, true});
  CHECK(p[0] == 0.0);
  CHECK(p[1] == doctest::Approx(0.5));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(sampling_distribution(z, 1.0, 1.0, {false, false, false}), InvalidArgument);
  CHECK_THROWS_AS(sampling_distribution(std::vector<double>{-inf, NAN}, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(sampling_distribution(std::vector<double>{}, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(sampling_distribution(z, -1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(sampling_distribution(z, 1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(sampling_distribution(z, 1.0, 1.0, {true}), InvalidArgument);
}

TEST_CASE("property: distributions are normalized and respect masks") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0, 3);
  std::uniform_real_distribution<double> ud(0.05, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 40;
    std::vector<double> z(n);
    std::vector<bool> m(n);
    for (int i = 0; i < n; ++i) z[i] = nd(rng), m[i] = (rng() & 3) != 0;
    m[trial % n] = true;
    const auto p = sampling_distribution(z, ud(rng) * 2, ud(rng), m);
    double s = 0;
    for (int i = 0; i < n; ++i) {
      CHECK(p[i] >= 0);
      if (!m[i]) CHECK(p[i] == 0);
      s += p[i];
    }
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("empirical frequencies follow the distribution") {
  const std::vector<double> z = {std::log(0.1), std::log(0.6), std::log(0.3)};
  std::mt19937_64 rng(42);
  std::array<int, 3> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[sample_index(z, 1.0, 1.0, rng)];
  CHECK(counts[0] / double(n) == doctest::Approx(0.1).epsilon(0.05));
  CHECK(counts[1] / double(n) == doctest::Approx(0.6).epsilon(0.02));
  CHECK(counts[2] / double(n) == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("required attributes per type") {
  TokenIndices bar{type_index(TokenType::Rhythm), beat_index(kBarBeat), 0, 0, 0, 0, 0};
  CHECK(attribute_required(Attr::Density, bar));
  CHECK_FALSE(attribute_required(Attr::Strength, bar));
  CHECK_FALSE(attribute_required(Attr::Pitch, bar));
  TokenIndices tick{type_index(TokenType::Rhythm), beat_index(3), 0, 0, 0, 0, 0};
  CHECK(attribute_required(Attr::Strength, tick));
  TokenIndices note{type_index(TokenType::Note), 0, 0, 0, 0, 0, 0};
  CHECK(attribute_required(Attr::Duration, note));
  CHECK_FALSE(attribute_required(Attr::Beat, note));
  TokenIndices eos{type_index(TokenType::Eos), 0, 0, 0, 0, 0, 0};
  for (int a = 1; a < kNumAttrs; ++a) CHECK_FALSE(attribute_required(static_cast<Attr>(a), eos));
}

namespace {

AttributeLogits peaked(const TokenIndices& want) {
  AttributeLogits out;
  for (int a = 0; a < kNumAttrs; ++a) {
    out.logits[a].assign(static_cast<std::size_t>(kVocabSize[a]), 0.0);
    out.logits[a][static_cast<std::size_t>(want[a])] = 50.0;
  }
  return out;
}

}  // namespace

TEST_CASE("two-stage sampling fills only the attributes the type uses") {
  SamplingConfig cfg;
  std::mt19937_64 rng(1);
  // Logits favour None (index 0) everywhere except the type; None must never be drawn.
  const TokenIndices none_pref{type_index(TokenType::Rhythm), 0, 0, 0, 0, 0, 0};
  const auto al = peaked(none_pref);
  std::vector<TokenType> asked;
  for (int i = 0; i < 50; ++i) {
    const auto t = sample(
        al[Attr::Type], [&](TokenType ty) { asked.push_back(ty); return al; }, cfg, rng);
    CHECK(t.type == TokenType::Rhythm);
    REQUIRE(t.beat.has_value());
    CHECK(t.density.has_value());
    CHECK(t.strength.has_value() == (*t.beat != kBarBeat));
    CHECK_FALSE(t.pitch.has_value());
  }
  for (auto ty : asked) CHECK(ty == TokenType::Rhythm);

  const TokenIndices note{type_index(TokenType::Note), 5, 5, 5, instrument_index(Instrument::Bass), pitch_index(40),
                          duration_index(3)};
  const auto nl = peaked(note);
  const auto t = sample(nl[Attr::Type], [&](TokenType) { return nl; }, cfg, rng);
  CHECK(t == CompoundToken::note(Instrument::Bass, 40, 3));
}

TEST_CASE("allowed function constrains every stage") {
  SamplingConfig cfg;
  std::mt19937_64 rng(2);
  const TokenIndices want{type_index(TokenType::Note), 0, 0, 0, instrument_index(Instrument::Piano), pitch_index(60),
                          duration_index(1)};
  const auto al = peaked(want);
  const AllowedFn allowed = [](Attr a, const TokenIndices&) {
    std::vector<bool> m(static_cast<std::size_t>(vocab(a)), true);
    if (a == Attr::Type) m = {false, true, false, false};
    if (a == Attr::Pitch) m[static_cast<std::size_t>(pitch_index(60))] = false;
    return m;
  };
  for (int i = 0; i < 30; ++i) {
    const auto t = sample(al[Attr::Type], [&](TokenType) { return al; }, cfg, rng, allowed);
    CHECK(t.type == TokenType::Rhythm);
  }
  const AllowedFn no_60 = [](Attr a, const TokenIndices&) {
    std::vector<bool> m(static_cast<std::size_t>(vocab(a)), true);
    if (a == Attr::Pitch) m[static_cast<std::size_t>(pitch_index(60))] = false;
    return m;
  };
  for (int i = 0; i < 30; ++i) {
    const auto t = sample(al[Attr::Type], [&](TokenType) { return al; }, cfg, rng, no_60);
    CHECK(t.pitch != 60);
  }
}
