#pragma once

#include <vector>

#include "mfnet/finite_net.hpp"
#include "mfnet/mf_system.hpp"
#include "mfnet/rng.hpp"

namespace mfnet {

enum class LatentLaw { Gaussian, UniformCube };

/// Latent code spaces attached to the layers: codes of layer ell live in
/// R^{dims[ell-1]} under `law`.  The output layer always uses the trivial
/// singleton space (dimension 0).
struct LatentSpace {
  int L = 0;
  std::vector<int> dims;  // per layer; dims[L-1] == 0
  LatentLaw law = LatentLaw::Gaussian;

  void validate() const;
  int dim(int ell) const { return dims.at(static_cast<size_t>(ell) - 1); }
};

enum class EmbedScheme { Bidiverse, PseudoIid };

/// Random-feature expansion of one initial weight function
/// w(c', c) = scale * sum_r a_r tanh(<u_r,c'> + <v_r,c> + b_r).
struct SeriesLayer {
  VecD a;
  Matrix u;  // R x dim(ell-1)
  Matrix v;  // R x dim(ell)
  VecD b;
  double scale = 1.0;
};

/// Deterministic initial-weight functions over the latent spaces.  The
/// bidiverse scheme uses a full-rank linear first layer and smooth
/// random-feature expansions above it, giving function families that are
/// linearly independent in both code arguments.  The pseudo-iid scheme
/// hashes quantised code tuples to white-noise-like weights.
struct NeuronalEmbedding {
  LatentSpace latent;
  EmbedScheme scheme = EmbedScheme::Bidiverse;
  uint64_t seed = 0;
  int d = 0;
  VecD gamma;  // per-layer output scales

  // bidiverse parameters
  Matrix first_layer;               // d x dim(1), full rank on the first d coords
  std::vector<SeriesLayer> series;  // layers 2..L

  // pseudo-iid key
  CounterRng key;

  /// w_1(c_1) in R^d.
  void eval_w1(std::span<const double> c1, std::span<double> out) const;
  /// w_ell(c_prev, c) for ell >= 2.
  double eval_wi(int ell, std::span<const double> c_prev, std::span<const double> c) const;
};

struct EmbedOptions {
  int series_terms = 32;
  VecD gamma;  // empty -> all ones
};

NeuronalEmbedding build_embedding(EmbedScheme scheme, int L, int d, LatentSpace latent,
                                  uint64_t seed, const EmbedOptions& opts = {});

/// Code draws: codes[ell-1] is widths[ell-1] x dim(ell), rows i.i.d. from
/// the latent law.  The output layer gets the single empty code.
struct LatentCodes {
  std::vector<Matrix> codes;

  int width(int ell) const { return codes.at(static_cast<size_t>(ell) - 1).rows; }
  int depth() const { return static_cast<int>(codes.size()); }
  std::span<const double> code(int ell, int j) const {
    const Matrix& m = codes.at(static_cast<size_t>(ell) - 1);
    return {m.row(j), static_cast<size_t>(m.cols)};
  }
};

LatentCodes sample_codes(const NeuronalEmbedding& emb, std::span<const int> widths,
                         uint64_t seed);

/// First `widths[ell]` codes of each layer; prefixes of an i.i.d. draw are
/// themselves i.i.d. draws, which couples systems of different sizes.
LatentCodes restrict_codes(const LatentCodes& codes, std::span<const int> widths);

/// A finite network and a particle system instantiated from the same
/// embedding on the same codes; their weight stacks are identical, entry
/// for entry, at time 0.
struct CoupledPair {
  FiniteWeights finite;
  ParticleSystem particles;
  LatentCodes codes;
};

CoupledPair instantiate_coupled(const NeuronalEmbedding& emb, const LatentCodes& codes,
                                const ActivationStack& acts);

/// Scale-free growth proxy of |w| moments: max over k <= 8 of
/// (mean |w|^k)^{1/k} / sqrt(k) across random code draws.
struct MomentProxyReport {
  VecD norm_moment;  // k = 1..8, (mean |w|^k)^{1/k}
  double proxy = 0.0;
};

MomentProxyReport moment_proxy(const NeuronalEmbedding& emb, int ell, int n_draws,
                               uint64_t seed);

enum class GramSide { Forward, Backward };

/// Spectrum summary of the Gram matrix of `n_funcs` random sections of the
/// layer-ell weight function (forward: sections in the left argument,
/// backward: in the right), integrated over `n_quad` quadrature draws.
struct GramProxyReport {
  double min_eig = 0.0;
  double max_eig = 0.0;
};

GramProxyReport gram_proxy(const NeuronalEmbedding& emb, int ell, GramSide side, int n_funcs,
                           int n_quad, uint64_t seed);

}  // namespace mfnet
