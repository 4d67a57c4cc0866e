#include "mfnet/embedding.hpp"

#include <cmath>

#include "mfnet/reduce.hpp"

namespace mfnet {

void LatentSpace::validate() const {
  if (L < 2) throw ConfigError("LatentSpace: depth must be >= 2");
  if (static_cast<int>(dims.size()) != L) throw ShapeError("LatentSpace: dims size != L");
  for (int ell = 1; ell < L; ++ell)
    if (dim(ell) < 1) throw ConfigError("LatentSpace: hidden code dims must be >= 1");
  if (dims.back() != 0) throw ConfigError("LatentSpace: output layer code dim must be 0");
}

namespace {

double law_draw(LatentLaw law, const CounterRng& rng, uint64_t ctr) {
  switch (law) {
    case LatentLaw::Gaussian: return rng.normal(ctr);
    case LatentLaw::UniformCube: return 2.0 * rng.u01(ctr) - 1.0;
  }
  throw DomainError("latent law: unknown kind");
}

uint64_t quantize_coord(double c) {
  double scaled = c * 1048576.0;  // 2^20
  if (!(std::fabs(scaled) < 9.0e15)) throw DomainError("pseudo-iid embedding: code out of range");
  return static_cast<uint64_t>(static_cast<int64_t>(std::llround(scaled)));
}

uint64_t absorb_codes(uint64_t h, std::span<const double> c) {
  for (double v : c) h = hash_combine(h, quantize_coord(v));
  return h;
}

double unit_from_hash(const CounterRng& key, uint64_t h) {
  return (key.bits(h) >> 11) * 0x1p-53 + 0x1p-54;
}

}  // namespace

void NeuronalEmbedding::eval_w1(std::span<const double> c1, std::span<double> out) const {
  if (static_cast<int>(c1.size()) != latent.dim(1))
    throw ShapeError("eval_w1: code dimension mismatch");
  if (static_cast<int>(out.size()) != d) throw ShapeError("eval_w1: output size != d");
  if (scheme == EmbedScheme::Bidiverse) {
    for (int r = 0; r < d; ++r)
      out[static_cast<size_t>(r)] =
          gamma[0] * pairwise_dot(first_layer.row(r), c1.data(), static_cast<size_t>(d));
  } else {
    uint64_t h = hash_combine(1, 0);
    h = absorb_codes(h, c1);
    for (int r = 0; r < d; ++r)
      out[static_cast<size_t>(r)] =
          gamma[0] * inverse_normal_cdf(unit_from_hash(key, hash_combine(h, static_cast<uint64_t>(r))));
  }
}

double NeuronalEmbedding::eval_wi(int ell, std::span<const double> c_prev,
                                  std::span<const double> c) const {
  if (ell < 2 || ell > latent.L) throw ShapeError("eval_wi: layer out of range");
  if (static_cast<int>(c_prev.size()) != latent.dim(ell - 1) ||
      static_cast<int>(c.size()) != latent.dim(ell))
    throw ShapeError("eval_wi: code dimension mismatch");
  if (scheme == EmbedScheme::Bidiverse) {
    const SeriesLayer& sl = series[static_cast<size_t>(ell) - 2];
    const int R = static_cast<int>(sl.a.size());
    double acc = 0.0;
    for (int r = 0; r < R; ++r) {
      double du = pairwise_dot(sl.u.row(r), c_prev.data(), c_prev.size());
      double dv = pairwise_dot(sl.v.row(r), c.data(), c.size());
      acc += sl.a[static_cast<size_t>(r)] * std::tanh((du + dv) + sl.b[static_cast<size_t>(r)]);
    }
    return sl.scale * acc;
  }
  uint64_t h = hash_combine(static_cast<uint64_t>(ell), 1);
  h = absorb_codes(h, c_prev);
  h = hash_combine(h, 0x5eedull);
  h = absorb_codes(h, c);
  return gamma[static_cast<size_t>(ell) - 1] * inverse_normal_cdf(unit_from_hash(key, h));
}

NeuronalEmbedding build_embedding(EmbedScheme scheme, int L, int d, LatentSpace latent,
                                  uint64_t seed, const EmbedOptions& opts) {
  latent.validate();
  if (latent.L != L) throw ShapeError("build_embedding: latent depth != L");
  if (d < 1) throw ConfigError("build_embedding: input dim must be >= 1");

  NeuronalEmbedding emb;
  emb.latent = std::move(latent);
  emb.scheme = scheme;
  emb.seed = seed;
  emb.d = d;
  emb.key = CounterRng::from_seed(seed);
  if (opts.gamma.empty()) {
    emb.gamma.assign(static_cast<size_t>(L), 1.0);
  } else {
    if (static_cast<int>(opts.gamma.size()) != L)
      throw ConfigError("build_embedding: gamma must have one entry per layer");
    emb.gamma = opts.gamma;
  }

  if (scheme == EmbedScheme::PseudoIid) return emb;

  const int m1 = emb.latent.dim(1);
  if (m1 < d)
    throw ConfigError("build_embedding: bidiverse scheme needs layer-1 code dim >= input dim");

  // First layer: w_1(c) = gamma_1 * Q c[0:d] with Q orthonormal, hence full
  // rank.  Gram-Schmidt on hashed Gaussian draws; a degenerate draw (never
  // seen in practice) is a configuration error, not a silent fallback.
  CounterRng arng = emb.key.child(0xA11Cull);
  emb.first_layer = Matrix(d, m1);
  std::vector<VecD> q(static_cast<size_t>(d), VecD(static_cast<size_t>(d)));
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      q[static_cast<size_t>(r)][static_cast<size_t>(c)] =
          arng.normal(static_cast<uint64_t>(r * d + c));
  for (int r = 0; r < d; ++r) {
    VecD& row = q[static_cast<size_t>(r)];
    for (int p = 0; p < r; ++p) {
      const VecD& prev = q[static_cast<size_t>(p)];
      double proj = pairwise_dot(row.data(), prev.data(), row.size());
      for (size_t c = 0; c < row.size(); ++c) row[c] -= proj * prev[c];
    }
    double nrm = std::sqrt(pairwise_dot(row.data(), row.data(), row.size()));
    if (nrm < 1e-8)
      throw ConfigError("build_embedding: degenerate first-layer draw for this seed");
    for (size_t c = 0; c < row.size(); ++c) row[c] /= nrm;
    for (int c = 0; c < d; ++c)
      emb.first_layer.at(r, c) = q[static_cast<size_t>(r)][static_cast<size_t>(c)];
  }

  const int R = opts.series_terms;
  if (R < 1) throw ConfigError("build_embedding: series_terms must be >= 1");
  emb.series.resize(static_cast<size_t>(L) - 1);
  for (int ell = 2; ell <= L; ++ell) {
    SeriesLayer& sl = emb.series[static_cast<size_t>(ell) - 2];
    const int mp = emb.latent.dim(ell - 1);
    const int mc = emb.latent.dim(ell);
    CounterRng srng = emb.key.child(static_cast<uint64_t>(ell));
    sl.a.resize(static_cast<size_t>(R));
    sl.b.resize(static_cast<size_t>(R));
    sl.u = Matrix(R, mp);
    sl.v = Matrix(R, mc);
    CounterRng ar = srng.child(1), br = srng.child(2), ur = srng.child(3), vr = srng.child(4);
    const double us = 1.0 / std::sqrt(static_cast<double>(mp));
    const double vs = mc > 0 ? 1.0 / std::sqrt(static_cast<double>(mc)) : 0.0;
    for (int r = 0; r < R; ++r) {
      sl.a[static_cast<size_t>(r)] = ar.normal(static_cast<uint64_t>(r));
      sl.b[static_cast<size_t>(r)] = br.normal(static_cast<uint64_t>(r));
      for (int c = 0; c < mp; ++c)
        sl.u.at(r, c) = us * ur.normal(static_cast<uint64_t>(r * mp + c));
      for (int c = 0; c < mc; ++c)
        sl.v.at(r, c) = vs * vr.normal(static_cast<uint64_t>(r * mc + c));
    }
    // Random tanh features sharing one code draw are correlated, so the
    // realized second moment of the section drifts O(1) across seeds no
    // matter how many terms the series has.  Pin it instead: a fixed
    // quadrature over the code law measures the raw scale and gamma_ell
    // becomes the section's exact L2 magnitude.
    const int Q = 4096;
    CounterRng npr = srng.child(5), ncr = srng.child(6);
    VecD cp(static_cast<size_t>(mp)), cc(static_cast<size_t>(mc));
    VecD sq(static_cast<size_t>(Q));
    for (int i = 0; i < Q; ++i) {
      for (int c = 0; c < mp; ++c)
        cp[static_cast<size_t>(c)] =
            law_draw(emb.latent.law, npr, static_cast<uint64_t>(i) * mp + c);
      for (int c = 0; c < mc; ++c)
        cc[static_cast<size_t>(c)] =
            law_draw(emb.latent.law, ncr, static_cast<uint64_t>(i) * mc + c);
      double acc = 0.0;
      for (int r = 0; r < R; ++r) {
        double du = pairwise_dot(sl.u.row(r), cp.data(), cp.size());
        double dv = pairwise_dot(sl.v.row(r), cc.data(), cc.size());
        acc += sl.a[static_cast<size_t>(r)] * std::tanh((du + dv) + sl.b[static_cast<size_t>(r)]);
      }
      sq[static_cast<size_t>(i)] = acc * acc;
    }
    double s2 = pairwise_sum(sq) / static_cast<double>(Q);
    if (!(s2 > 0.0))
      throw ConfigError("build_embedding: degenerate series draw for this seed");
    sl.scale = emb.gamma[static_cast<size_t>(ell) - 1] / std::sqrt(s2);
  }
  return emb;
}

LatentCodes sample_codes(const NeuronalEmbedding& emb, std::span<const int> widths,
                         uint64_t seed) {
  const int L = emb.latent.L;
  if (static_cast<int>(widths.size()) != L) throw ShapeError("sample_codes: widths size != L");
  if (widths[static_cast<size_t>(L) - 1] != 1)
    throw ConfigError("sample_codes: output layer width must be 1");
  LatentCodes codes;
  codes.codes.resize(static_cast<size_t>(L));
  CounterRng root = CounterRng::from_seed(seed).child(0xC0DEull);
  for (int ell = 1; ell <= L; ++ell) {
    const int n = widths[static_cast<size_t>(ell) - 1];
    const int m = emb.latent.dim(ell);
    if (n < 1) throw ConfigError("sample_codes: widths must be >= 1");
    Matrix& mat = codes.codes[static_cast<size_t>(ell) - 1];
    mat = Matrix(n, m);
    CounterRng lr = root.child(static_cast<uint64_t>(ell));
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < m; ++c)
        mat.at(j, c) = law_draw(emb.latent.law, lr,
                                static_cast<uint64_t>(j) * static_cast<uint64_t>(m) +
                                    static_cast<uint64_t>(c));
  }
  return codes;
}

LatentCodes restrict_codes(const LatentCodes& codes, std::span<const int> widths) {
  if (static_cast<int>(widths.size()) != codes.depth())
    throw ShapeError("restrict_codes: widths size mismatch");
  LatentCodes out;
  out.codes.resize(codes.codes.size());
  for (int ell = 1; ell <= codes.depth(); ++ell) {
    const Matrix& src = codes.codes[static_cast<size_t>(ell) - 1];
    const int n = widths[static_cast<size_t>(ell) - 1];
    if (n < 1 || n > src.rows)
      throw ShapeError("restrict_codes: target widths must be within the source");
    Matrix& dst = out.codes[static_cast<size_t>(ell) - 1];
    dst = Matrix(n, src.cols);
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < src.cols; ++c) dst.at(j, c) = src.at(j, c);
  }
  return out;
}

namespace {

/// Batched layer fill, hoisting the per-code dot products.  Produces the
/// same bits as entrywise eval_wi: the hoisted sums are the identical
/// pairwise dots, and the entry expression keeps the (du + dv) + b
/// association.
void fill_layer_bidiverse(const NeuronalEmbedding& emb, int ell, const LatentCodes& codes,
                          Matrix& out) {
  const SeriesLayer& sl = emb.series[static_cast<size_t>(ell) - 2];
  const int R = static_cast<int>(sl.a.size());
  const Matrix& cp = codes.codes[static_cast<size_t>(ell) - 2];
  const Matrix& cc = codes.codes[static_cast<size_t>(ell) - 1];
  Matrix du(cp.rows, R), dv(cc.rows, R);
  for (int j = 0; j < cp.rows; ++j)
    for (int r = 0; r < R; ++r)
      du.at(j, r) = pairwise_dot(sl.u.row(r), cp.row(j), static_cast<size_t>(cp.cols));
  for (int j = 0; j < cc.rows; ++j)
    for (int r = 0; r < R; ++r)
      dv.at(j, r) = pairwise_dot(sl.v.row(r), cc.row(j), static_cast<size_t>(cc.cols));
  for (int jp = 0; jp < cp.rows; ++jp) {
    const double* dup = du.row(jp);
    for (int jc = 0; jc < cc.rows; ++jc) {
      const double* dvp = dv.row(jc);
      double acc = 0.0;
      for (int r = 0; r < R; ++r)
        acc += sl.a[static_cast<size_t>(r)] *
               std::tanh((dup[r] + dvp[r]) + sl.b[static_cast<size_t>(r)]);
      out.at(jp, jc) = sl.scale * acc;
    }
  }
}

}  // namespace

CoupledPair instantiate_coupled(const NeuronalEmbedding& emb, const LatentCodes& codes,
                                const ActivationStack& acts) {
  const int L = emb.latent.L;
  if (codes.depth() != L) throw ShapeError("instantiate_coupled: code depth != L");
  if (acts.depth() != L) throw ShapeError("instantiate_coupled: activation depth != L");
  for (int ell = 1; ell <= L; ++ell)
    if (codes.codes[static_cast<size_t>(ell) - 1].cols != emb.latent.dim(ell))
      throw ShapeError("instantiate_coupled: code dims do not match the embedding");

  std::vector<int> widths(static_cast<size_t>(L));
  for (int ell = 1; ell <= L; ++ell) widths[static_cast<size_t>(ell) - 1] = codes.width(ell);

  NetworkArch arch{L, emb.d, widths};
  arch.validate();
  FiniteWeights net = FiniteWeights::zeros(arch, acts);

  Matrix& w1 = net.w.layer(1);
  for (int j = 0; j < w1.rows; ++j)
    emb.eval_w1(codes.code(1, j), std::span<double>(w1.row(j), static_cast<size_t>(w1.cols)));

  for (int ell = 2; ell <= L; ++ell) {
    Matrix& w = net.w.layer(ell);
    if (emb.scheme == EmbedScheme::Bidiverse) {
      fill_layer_bidiverse(emb, ell, codes, w);
    } else {
      for (int jp = 0; jp < w.rows; ++jp)
        for (int jc = 0; jc < w.cols; ++jc)
          w.at(jp, jc) = emb.eval_wi(ell, codes.code(ell - 1, jp), codes.code(ell, jc));
    }
  }

  CoupledPair pair;
  pair.particles.counts = widths;
  pair.particles.d = emb.d;
  pair.particles.acts = acts;
  pair.particles.w = net.w;
  pair.particles.t = 0.0;
  pair.finite = std::move(net);
  pair.codes = codes;
  return pair;
}

MomentProxyReport moment_proxy(const NeuronalEmbedding& emb, int ell, int n_draws,
                               uint64_t seed) {
  if (ell < 1 || ell > emb.latent.L) throw ShapeError("moment_proxy: layer out of range");
  if (n_draws < 1) throw ConfigError("moment_proxy: need draws");
  CounterRng rng = CounterRng::from_seed(seed).child(0x3C0ull).child(static_cast<uint64_t>(ell));

  const int mp = ell >= 2 ? emb.latent.dim(ell - 1) : 0;
  const int mc = emb.latent.dim(ell);
  VecD cp(static_cast<size_t>(mp)), cc(static_cast<size_t>(mc));
  VecD w1(static_cast<size_t>(emb.d));

  std::vector<VecD> pow_sums(8, VecD(static_cast<size_t>(n_draws)));
  CounterRng pr = rng.child(1), qr = rng.child(2);
  for (int i = 0; i < n_draws; ++i) {
    double mag;
    if (ell == 1) {
      for (int c = 0; c < mc; ++c)
        cc[static_cast<size_t>(c)] =
            law_draw(emb.latent.law, qr, static_cast<uint64_t>(i) * mc + c);
      emb.eval_w1(cc, w1);
      mag = std::sqrt(pairwise_dot(w1.data(), w1.data(), w1.size()));
    } else {
      for (int c = 0; c < mp; ++c)
        cp[static_cast<size_t>(c)] =
            law_draw(emb.latent.law, pr, static_cast<uint64_t>(i) * mp + c);
      for (int c = 0; c < mc; ++c)
        cc[static_cast<size_t>(c)] =
            law_draw(emb.latent.law, qr, static_cast<uint64_t>(i) * mc + c);
      mag = std::fabs(emb.eval_wi(ell, cp, cc));
    }
    double p = 1.0;
    for (int k = 0; k < 8; ++k) {
      p *= mag;
      pow_sums[static_cast<size_t>(k)][static_cast<size_t>(i)] = p;
    }
  }

  MomentProxyReport rep;
  rep.norm_moment.resize(8);
  for (int k = 1; k <= 8; ++k) {
    double mean = pairwise_sum(pow_sums[static_cast<size_t>(k) - 1]) / n_draws;
    double root = std::pow(mean, 1.0 / k);
    rep.norm_moment[static_cast<size_t>(k) - 1] = root;
    rep.proxy = std::max(rep.proxy, root / std::sqrt(static_cast<double>(k)));
  }
  return rep;
}

namespace {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
VecD jacobi_eigenvalues(Matrix m) {
  const int n = m.rows;
  if (m.cols != n) throw ShapeError("jacobi: matrix must be square");
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m.at(p, q) * m.at(p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = m.at(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double app = m.at(p, p), aqq = m.at(q, q);
        double theta = 0.5 * (aqq - app) / apq;
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = m.at(k, p), akq = m.at(k, q);
          m.at(k, p) = c * akp - s * akq;
          m.at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = m.at(p, k), aqk = m.at(q, k);
          m.at(p, k) = c * apk - s * aqk;
          m.at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  VecD eig(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = m.at(i, i);
  return eig;
}

}  // namespace

GramProxyReport gram_proxy(const NeuronalEmbedding& emb, int ell, GramSide side, int n_funcs,
                           int n_quad, uint64_t seed) {
  if (ell < 2 || ell > emb.latent.L) throw ShapeError("gram_proxy: layer must be >= 2");
  if (side == GramSide::Backward && emb.latent.dim(ell) == 0)
    throw ShapeError("gram_proxy: no backward sections at the output layer");
  if (n_funcs < 2 || n_quad < n_funcs) throw ConfigError("gram_proxy: bad sizes");

  CounterRng rng = CounterRng::from_seed(seed).child(0x6AAull).child(static_cast<uint64_t>(ell));
  const int ms = side == GramSide::Forward ? emb.latent.dim(ell) : emb.latent.dim(ell - 1);
  const int mq = side == GramSide::Forward ? emb.latent.dim(ell - 1) : emb.latent.dim(ell);

  Matrix sections(n_funcs, ms);
  CounterRng sr = rng.child(1);
  for (int j = 0; j < n_funcs; ++j)
    for (int c = 0; c < ms; ++c)
      sections.at(j, c) = law_draw(emb.latent.law, sr, static_cast<uint64_t>(j) * ms + c);

  Matrix quad(n_quad, mq);
  CounterRng qr2 = rng.child(2);
  for (int k = 0; k < n_quad; ++k)
    for (int c = 0; c < mq; ++c)
      quad.at(k, c) = law_draw(emb.latent.law, qr2, static_cast<uint64_t>(k) * mq + c);

  // vals(k, j) = w(quad_k, section_j) or w(section_j, quad_k).
  Matrix vals(n_quad, n_funcs);
  for (int k = 0; k < n_quad; ++k) {
    std::span<const double> qk{quad.row(k), static_cast<size_t>(mq)};
    for (int j = 0; j < n_funcs; ++j) {
      std::span<const double> sj{sections.row(j), static_cast<size_t>(ms)};
      vals.at(k, j) = side == GramSide::Forward ? emb.eval_wi(ell, qk, sj)
                                                : emb.eval_wi(ell, sj, qk);
    }
  }

  Matrix gram(n_funcs, n_funcs);
  VecD col_a(static_cast<size_t>(n_quad)), col_b(static_cast<size_t>(n_quad));
  for (int a = 0; a < n_funcs; ++a) {
    for (int k = 0; k < n_quad; ++k) col_a[static_cast<size_t>(k)] = vals.at(k, a);
    for (int b = a; b < n_funcs; ++b) {
      for (int k = 0; k < n_quad; ++k) col_b[static_cast<size_t>(k)] = vals.at(k, b);
      double g = pairwise_dot(col_a.data(), col_b.data(), col_a.size()) / n_quad;
      gram.at(a, b) = g;
      gram.at(b, a) = g;
    }
  }

  VecD eig = jacobi_eigenvalues(gram);
  GramProxyReport rep;
  rep.min_eig = eig[0];
  rep.max_eig = eig[0];
  for (double e : eig) {
    rep.min_eig = std::min(rep.min_eig, e);
    rep.max_eig = std::max(rep.max_eig, e);
  }
  return rep;
}

}  // namespace mfnet
