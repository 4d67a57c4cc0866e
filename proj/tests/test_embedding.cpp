#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "mfnet/container.hpp"
#include "mfnet/embedding.hpp"

using namespace mfnet;

namespace {

LatentSpace latent4(int l1 = 4, int mid = 6) {
  LatentSpace ls;
  ls.L = 3;
  ls.dims = {l1, mid, 0};
  ls.law = LatentLaw::Gaussian;
  return ls;
}

}  // namespace

TEST_CASE("latent space validation") {
  LatentSpace ls = latent4();
  CHECK_NOTHROW(ls.validate());
  ls.dims.back() = 1;
  CHECK_THROWS_AS(ls.validate(), ConfigError);
  ls = latent4();
  ls.dims[0] = 0;
  CHECK_THROWS_AS(ls.validate(), ConfigError);
  ls = latent4();
  ls.dims.pop_back();
  CHECK_THROWS_AS(ls.validate(), ShapeError);
}

TEST_CASE("embeddings are pure functions of seed and codes") {
  for (EmbedScheme scheme : {EmbedScheme::Bidiverse, EmbedScheme::PseudoIid}) {
    NeuronalEmbedding a = build_embedding(scheme, 3, 2, latent4(), 99);
    NeuronalEmbedding b = build_embedding(scheme, 3, 2, latent4(), 99);
    NeuronalEmbedding c = build_embedding(scheme, 3, 2, latent4(), 100);
    CounterRng r = CounterRng::from_seed(1);
    VecD cp(4), cc(6);
    for (int i = 0; i < 4; ++i) cp[static_cast<size_t>(i)] = r.normal(static_cast<uint64_t>(i));
    for (int i = 0; i < 6; ++i)
      cc[static_cast<size_t>(i)] = r.normal(static_cast<uint64_t>(10 + i));
    CHECK(a.eval_wi(2, cp, cc) == b.eval_wi(2, cp, cc));
    CHECK(a.eval_wi(2, cp, cc) != c.eval_wi(2, cp, cc));
    VecD o1(2), o2(2);
    a.eval_w1(cp, o1);
    b.eval_w1(cp, o2);
    CHECK(o1 == o2);
  }
}

TEST_CASE("bidiverse first layer acts by an orthonormal map") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::Bidiverse, 3, 3, latent4(5, 4), 7);
  // Rows restricted to the first d coordinates are orthonormal.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int c = 0; c < 3; ++c) dot += emb.first_layer.at(i, c) * emb.first_layer.at(j, c);
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
  // Coordinates beyond the input dimension are ignored.
  CounterRng r = CounterRng::from_seed(2);
  VecD code(5);
  for (int i = 0; i < 5; ++i) code[static_cast<size_t>(i)] = r.normal(static_cast<uint64_t>(i));
  VecD bumped = code;
  bumped[4] += 10.0;
  VecD w_code(3), w_bumped(3);
  emb.eval_w1(code, w_code);
  emb.eval_w1(bumped, w_bumped);
  CHECK(w_code == w_bumped);
  // Norm preservation on the active block.
  double in2 = 0.0, out2 = 0.0;
  for (int i = 0; i < 3; ++i) in2 += code[static_cast<size_t>(i)] * code[static_cast<size_t>(i)];
  for (double v : w_code) out2 += v * v;
  CHECK(out2 == doctest::Approx(in2).epsilon(1e-12));
}

TEST_CASE("zeroed series coefficients give vanishing deep layers") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::Bidiverse, 3, 2, latent4(), 15);
  for (SeriesLayer& sl : emb.series) std::fill(sl.a.begin(), sl.a.end(), 0.0);
  CounterRng r = CounterRng::from_seed(3);
  VecD cp(4), cc(6);
  for (int i = 0; i < 4; ++i) cp[static_cast<size_t>(i)] = r.normal(static_cast<uint64_t>(i));
  for (int i = 0; i < 6; ++i)
    cc[static_cast<size_t>(i)] = r.normal(static_cast<uint64_t>(20 + i));
  CHECK(emb.eval_wi(2, cp, cc) == 0.0);
  CHECK(emb.eval_wi(3, cc, VecD{}) == 0.0);
}

TEST_CASE("pseudo-iid weights look standard gaussian in the fourth moment") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::PseudoIid, 3, 2, latent4(), 31);
  MomentProxyReport rep = moment_proxy(emb, 2, 100000, 5);
  double m4 = std::pow(rep.norm_moment[3], 4.0);
  CHECK(m4 >= 2.6);
  CHECK(m4 <= 3.4);
  CHECK(std::isfinite(rep.proxy));
  CHECK(rep.proxy > 0.0);
}

TEST_CASE("code draws: shape, determinism, and first moments") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::Bidiverse, 3, 2, latent4(), 43);
  std::vector<int> widths{7, 5, 1};
  LatentCodes codes = sample_codes(emb, widths, 17);
  REQUIRE(codes.depth() == 3);
  CHECK(codes.width(1) == 7);
  CHECK(codes.width(2) == 5);
  CHECK(codes.width(3) == 1);
  CHECK(codes.codes[0].cols == 4);
  CHECK(codes.codes[1].cols == 6);
  CHECK(codes.codes[2].cols == 0);

  LatentCodes again = sample_codes(emb, widths, 17);
  for (size_t l = 0; l < 2; ++l) CHECK(max_abs_diff(codes.codes[l], again.codes[l]) == 0.0);

  std::vector<int> ones{1, 1, 1};
  LatentCodes single = sample_codes(emb, ones, 17);
  CHECK(single.codes[0].rows == 1);

  // Sample mean of many gaussian codes concentrates near zero.
  std::vector<int> big{10000, 1, 1};
  LatentCodes many = sample_codes(emb, big, 19);
  for (int c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (int j = 0; j < 10000; ++j) mean += many.codes[0].at(j, c);
    mean /= 10000.0;
    CHECK(std::fabs(mean) < 0.05);
  }
}

TEST_CASE("coupled instantiation shares every weight entry") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::Bidiverse, 3, 2, latent4(), 57);
  std::vector<int> widths{6, 4, 1};
  LatentCodes codes = sample_codes(emb, widths, 3);
  ActivationStack acts = ActivationStack::make(3, ActKind::Tanh, ActKind::Identity);
  CoupledPair pair = instantiate_coupled(emb, codes, acts);

  CHECK(pair.finite.arch.widths == widths);
  CHECK(pair.particles.counts == widths);
  for (size_t l = 0; l < 3; ++l)
    CHECK(max_abs_diff(pair.finite.w.mats[l], pair.particles.w.mats[l]) == 0.0);

  // Batched instantiation agrees with pointwise evaluation, bitwise.
  for (int j = 0; j < 6; ++j)
    for (int k = 0; k < 4; ++k)
      CHECK(pair.finite.w.layer(2).at(j, k) ==
            emb.eval_wi(2, codes.code(1, j), codes.code(2, k)));
  for (int j = 0; j < 6; ++j) {
    VecD row(2);
    emb.eval_w1(codes.code(1, j), row);
    CHECK(pair.finite.w.layer(1).at(j, 0) == row[0]);
    CHECK(pair.finite.w.layer(1).at(j, 1) == row[1]);
  }
}

TEST_CASE("width-one instantiation equals direct evaluations") {
  for (EmbedScheme scheme : {EmbedScheme::Bidiverse, EmbedScheme::PseudoIid}) {
    NeuronalEmbedding emb = build_embedding(scheme, 3, 2, latent4(), 61);
    std::vector<int> ones{1, 1, 1};
    LatentCodes codes = sample_codes(emb, ones, 5);
    CoupledPair pair =
        instantiate_coupled(emb, codes, ActivationStack::make(3, ActKind::Tanh, ActKind::Identity));
    VecD w1(2);
    emb.eval_w1(codes.code(1, 0), w1);
    CHECK(pair.finite.w.layer(1).at(0, 0) == w1[0]);
    CHECK(pair.finite.w.layer(2).at(0, 0) ==
          emb.eval_wi(2, codes.code(1, 0), codes.code(2, 0)));
    CHECK(pair.finite.w.layer(3).at(0, 0) ==
          emb.eval_wi(3, codes.code(2, 0), codes.code(3, 0)));
  }
}

TEST_CASE("code prefixes give weight-prefix instantiations") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::Bidiverse, 3, 2, latent4(), 71);
  std::vector<int> big{12, 8, 1};
  std::vector<int> small{5, 3, 1};
  LatentCodes codes = sample_codes(emb, big, 23);
  LatentCodes prefix = restrict_codes(codes, small);
  ActivationStack acts = ActivationStack::make(3, ActKind::Tanh, ActKind::Identity);
  CoupledPair full = instantiate_coupled(emb, codes, acts);
  CoupledPair part = instantiate_coupled(emb, prefix, acts);
  WeightMatrices sliced = restrict_weights(full.finite.w, full.finite.arch.view(), small);
  for (size_t l = 0; l < 3; ++l) CHECK(max_abs_diff(part.finite.w.mats[l], sliced.mats[l]) == 0.0);
}

TEST_CASE("codes survive a serialization round trip") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::Bidiverse, 3, 2, latent4(), 83);
  std::vector<int> widths{4, 3, 1};
  LatentCodes codes = sample_codes(emb, widths, 29);
  TextContainer c;
  for (int ell = 1; ell <= 3; ++ell)
    c.add_record("codes_layer_" + std::to_string(ell), codes.codes[static_cast<size_t>(ell) - 1]);
  std::ostringstream os;
  c.write(os);
  std::istringstream is(os.str());
  TextContainer back = TextContainer::read(is);
  LatentCodes parsed;
  for (int ell = 1; ell <= 3; ++ell)
    parsed.codes.push_back(back.record("codes_layer_" + std::to_string(ell)));

  ActivationStack acts = ActivationStack::make(3, ActKind::Tanh, ActKind::Identity);
  CoupledPair a = instantiate_coupled(emb, codes, acts);
  CoupledPair b = instantiate_coupled(emb, parsed, acts);
  for (size_t l = 0; l < 3; ++l) CHECK(max_abs_diff(a.finite.w.mats[l], b.finite.w.mats[l]) == 0.0);
}

TEST_CASE("moment proxies are finite and seed-stable") {
  for (EmbedScheme scheme : {EmbedScheme::Bidiverse, EmbedScheme::PseudoIid}) {
    NeuronalEmbedding emb = build_embedding(scheme, 3, 2, latent4(), 91);
    VecD proxies;
    for (uint64_t s = 1; s <= 5; ++s) proxies.push_back(moment_proxy(emb, 2, 20000, s).proxy);
    double lo = proxies[0], hi = proxies[0], mean = 0.0;
    for (double p : proxies) {
      lo = std::min(lo, p);
      hi = std::max(hi, p);
      mean += p;
      CHECK(std::isfinite(p));
    }
    mean /= 5.0;
    CHECK(lo >= 0.8 * mean);
    CHECK(hi <= 1.2 * mean);
  }
}

TEST_CASE("gram proxies are non-degenerate in both directions") {
  for (EmbedScheme scheme : {EmbedScheme::Bidiverse, EmbedScheme::PseudoIid}) {
    NeuronalEmbedding emb = build_embedding(scheme, 3, 2, latent4(), 97);
    for (GramSide side : {GramSide::Forward, GramSide::Backward}) {
      GramProxyReport rep = gram_proxy(emb, 2, side, 24, 400, 7);
      CHECK(rep.max_eig > 0.0);
      CHECK(rep.min_eig > 0.0);
      CHECK(rep.min_eig / rep.max_eig >= 1e-6);
    }
  }
}

TEST_CASE("backward gram section at the output layer is rejected") {
  NeuronalEmbedding emb = build_embedding(EmbedScheme::Bidiverse, 3, 2, latent4(), 101);
  CHECK_THROWS_AS(gram_proxy(emb, 3, GramSide::Backward, 8, 64, 1), ShapeError);
  CHECK_NOTHROW(gram_proxy(emb, 3, GramSide::Forward, 8, 64, 1));
}

TEST_CASE("bidiverse needs room for the input block") {
  LatentSpace narrow;
  narrow.L = 3;
  narrow.dims = {2, 4, 0};
  narrow.law = LatentLaw::Gaussian;
  CHECK_THROWS_AS(build_embedding(EmbedScheme::Bidiverse, 3, 3, narrow, 1), ConfigError);
  CHECK_NOTHROW(build_embedding(EmbedScheme::PseudoIid, 3, 3, narrow, 1));
}
