#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mcsbn/ad_encoder.hpp"
#include "mcsbn/gradcheck.hpp"

using namespace mcsbn;

TEST_CASE("encode_ad basics", "[ad_encoder]") {
  Rng rng(5);
  AdEncoderParams<double> zero;
  zero.vocab_size = 8;
  zero.dim = 4;
  zero.embed_dim = 3;
  zero.word_emb = Tensor<double>::mat(8, 3);
  zero.fwd = GruParams<double>(3, 2);
  zero.bwd = GruParams<double>(3, 2);
  std::vector<uint32_t> toks{1, 5, 2};
  auto h = encode_ad(zero, toks);
  REQUIRE(h.size() == 4);
  for (double x : h) CHECK(x == 0.0);

  CHECK_THROWS(encode_ad(zero, std::vector<uint32_t>{}));
  CHECK_THROWS(encode_ad(zero, std::vector<uint32_t>{99}));
}

TEST_CASE("palindrome with tied directions gives equal halves", "[ad_encoder]") {
  Rng rng(9);
  AdEncoderParams<double> p(10, 6, rng, 4);
  p.bwd = p.fwd; // tie the two directions
  std::vector<uint32_t> palindrome{3, 7, 1, 7, 3};
  auto h = encode_ad(p, palindrome);
  for (size_t i = 0; i < 3; ++i) CHECK(h[i] == Catch::Approx(h[i + 3]).margin(1e-12));
}

TEST_CASE("encode_ad equals an explicit two-pass fold", "[ad_encoder]") {
  Rng rng(13);
  AdEncoderParams<double> p(12, 8, rng, 5);
  std::vector<uint32_t> toks{2, 11, 0, 7};
  auto h = encode_ad(p, toks);

  auto fold = [&](const GruParams<double>& gru, const std::vector<uint32_t>& order) {
    std::vector<double> hh(4, 0.0), next(4);
    for (uint32_t t : order) {
      std::vector<double> emb(p.word_emb.row(t), p.word_emb.row(t) + 5);
      gru_step(gru, DenseInput<double>{std::span<const double>(emb)},
               std::span<const double>(hh), std::span<double>(next));
      hh = next;
    }
    return hh;
  };
  auto hf = fold(p.fwd, {2, 11, 0, 7});
  auto hb = fold(p.bwd, {7, 0, 11, 2});
  for (size_t i = 0; i < 4; ++i) {
    CHECK(h[i] == hf[i]);
    CHECK(h[i + 4] == hb[i]);
  }
}

TEST_CASE("encode_ad truncates long token lists", "[ad_encoder]") {
  Rng rng(3);
  AdEncoderParams<double> p(4, 4, rng, 3);
  std::vector<uint32_t> toks(kMaxAdTokens + 20, 1);
  std::vector<uint32_t> head(toks.begin(), toks.begin() + kMaxAdTokens);
  auto full = encode_ad(p, toks);
  auto trunc = encode_ad(p, head);
  CHECK(full == trunc);
}

TEST_CASE("ad_backward matches finite differences", "[ad_encoder]") {
  Rng rng(17);
  AdEncoderParams<double> p(9, 6, rng, 4);
  std::vector<uint32_t> toks{1, 4, 4, 8};
  std::vector<double> w(6);
  for (auto& x : w) x = rng.uniform(-1, 1);

  auto loss = [&] {
    auto h = encode_ad(p, toks);
    double s = 0;
    for (size_t i = 0; i < 6; ++i) s += w[i] * h[i];
    return s;
  };
  AdForwardCache<double> cache;
  encode_ad(p, toks, &cache);
  auto g = AdEncoderGrads<double>::like(p);
  ad_backward(p, cache, std::span<const double>(w), g);

  NamedTensors<double> named;
  p.visit(named);
  std::vector<const Tensor<double>*> analytic{&g.word_emb};
  for (GruGrads<double>* gg : {&g.fwd, &g.bwd})
    for (const Tensor<double>* t :
         {&gg->wz, &gg->wr, &gg->wh, &gg->uz, &gg->ur, &gg->uh, &gg->bz, &gg->br, &gg->bh})
      analytic.push_back(t);
  auto report = grad_check<double>(loss, named, analytic, 1e-5);
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("score forms", "[ad_encoder]") {
  std::vector<double> a{1, 0, 2}, b{0, 5, 0};
  CHECK(score(std::span<const double>(a), std::span<const double>(b)) == 0.0);
  CHECK(score(std::span<const double>(a), std::span<const double>(a)) == 5.0);
  std::vector<double> short_vec{1.0};
  CHECK_THROWS(score(std::span<const double>(a), std::span<const double>(short_vec)));

  // float accumulation vs 64-bit accumulation
  Rng rng(23);
  std::vector<float> uf(128), vf(128);
  for (auto& x : uf) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& x : vf) x = static_cast<float>(rng.uniform(-1, 1));
  double ref = 0;
  for (size_t i = 0; i < 128; ++i) ref += static_cast<double>(uf[i]) * vf[i];
  float got = score(std::span<const float>(uf), std::span<const float>(vf));
  CHECK(std::fabs(got - ref) / std::max(1e-8, std::fabs(ref)) < 1e-5);
}

TEST_CASE("score is bilinear", "[ad_encoder]") {
  Rng rng(29);
  std::vector<double> u1(6), u2(6), v(6);
  for (auto& x : u1) x = rng.uniform(-1, 1);
  for (auto& x : u2) x = rng.uniform(-1, 1);
  for (auto& x : v) x = rng.uniform(-1, 1);
  double a = 2.5;
  std::vector<double> au(6), usum(6);
  for (size_t i = 0; i < 6; ++i) {
    au[i] = a * u1[i];
    usum[i] = u1[i] + u2[i];
  }
  CHECK(score(std::span<const double>(au), std::span<const double>(v)) ==
        Catch::Approx(a * score(std::span<const double>(u1), std::span<const double>(v)))
            .margin(1e-6));
  CHECK(score(std::span<const double>(usum), std::span<const double>(v)) ==
        Catch::Approx(score(std::span<const double>(u1), std::span<const double>(v)) +
                      score(std::span<const double>(u2), std::span<const double>(v)))
            .margin(1e-6));
}

TEST_CASE("ad cache behavior", "[ad_encoder]") {
  Rng rng(31);
  AdEncoderParams<float> p(10, 4, rng, 3);
  std::vector<uint32_t> t1{1, 2}, t2{3, 4};

  SECTION("second call hits the cache") {
    AdCache cache(8, 1);
    size_t calls = 0;
    auto v1 = cached_encode(cache, p, "a", t1, &calls);
    auto v2 = cached_encode(cache, p, "a", t1, &calls);
    CHECK(calls == 1);
    CHECK(v1 == v2);
    CHECK(v1 == encode_ad(p, t1)); // transparency
  }

  SECTION("model version bump invalidates") {
    AdCache cache(8, 1);
    size_t calls = 0;
    cached_encode(cache, p, "a", t1, &calls);
    cache.set_model_version(2);
    cached_encode(cache, p, "a", t1, &calls);
    CHECK(calls == 2);
  }

  SECTION("capacity one alternating ads always re-encodes") {
    AdCache cache(1, 1);
    size_t calls = 0;
    for (int i = 0; i < 4; ++i) {
      cached_encode(cache, p, "a", t1, &calls);
      cached_encode(cache, p, "b", t2, &calls);
    }
    CHECK(calls == 8);
    CHECK(cache.size() == 1);
  }

  SECTION("errors are not cached") {
    AdCache cache(8, 1);
    CHECK_THROWS(cached_encode(cache, p, "bad", std::vector<uint32_t>{}));
    CHECK(cache.size() == 0);
  }
}
