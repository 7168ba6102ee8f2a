#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "pofbm/cost.hpp"
#include "pofbm/errors.hpp"

namespace pofbm::fgn {

struct HurstParam {
    double h;
    explicit HurstParam(double h_) : h(h_) {
        if (!(h > 0.0 && h < 1.0)) throw Error("HurstParam: h must be in (0,1)");
    }
};

struct LevelIndex {
    int l;
    explicit LevelIndex(int l_) : l(l_) {
        if (l < 0) throw Error("LevelIndex: l must be nonnegative");
    }
    double delta() const { return std::ldexp(1.0, -l); }
};

// Autocovariance of unit-variance fGN on the integer grid,
// gamma(k) = 0.5 (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}).
double autocov(double h, std::size_t lag);

// Circulant spectrum for a grid of m unit-lag increments. eigenvalues has
// length 2m and is the forward DFT of (g0,...,g_{m-1},g_m,g_{m-1},...,g1).
// Negative values with magnitude <= tol_eig * max are clipped to zero,
// anything more negative raises NegativeSpectrum. pack_scale caches the
// per-bin factors of the sampling map.
struct SpectralEmbedding {
    double h = 0.5;
    std::size_t m = 0;
    std::vector<double> eigenvalues;
    std::vector<double> pack_scale;
    std::size_t clipped = 0;  // eigenvalues clipped to zero
};

SpectralEmbedding build_embedding(double h, std::size_t m, double tol_eig = 1e-12);

struct NoiseBlock {
    std::size_t t = 0;                 // unit-time index, 1-based
    std::vector<double> z;             // 2 * delta^{-1} standard normals
};

struct IncrementPath {
    int level = 0;
    std::size_t span = 0;              // unit intervals covered
    std::vector<double> values;        // span * 2^level fBM increments
};

// Block sampling map. The normal-to-increment packing is fixed as follows
// (n2 = 2m, lambda = eigenvalues, z the block's normals):
//   bin 0:      v[0] = sqrt(lambda[0]/n2) * z[0]
//   bin m:      v[m] = sqrt(lambda[m]/n2) * z[2m-1]
//   bin k=1..m-1:  v[k] = sqrt(lambda[k]/(2 n2)) * (z[2k-1] + i z[2k]),
//                  v[n2-k] = conj(v[k])
// increments = Re(forward FFT of v)[0:m], scaled by delta^H.
// At h == 0.5 exactly the spectral map is bypassed and the block emits
// sqrt(delta) * z[0:m], which makes pseudo and full paths identical.
void sample_block_unit(const SpectralEmbedding& emb, const double* z, double* out,
                       std::vector<std::complex<double>>& scratch, CostLedger* ledger = nullptr);

IncrementPath sample_block(const SpectralEmbedding& emb, const NoiseBlock& block, int level,
                           CostLedger* ledger = nullptr);

// Concatenation of independent per-block maps; not a discrete fBM skeleton
// across blocks.
IncrementPath pseudo_path(const SpectralEmbedding& emb, const std::vector<NoiseBlock>& blocks,
                          int level, CostLedger* ledger = nullptr);

// True-path map over [0,T]. Built as the circulant square root of the
// length-2n fGN embedding (n = T * 2^level) applied to the whitened pseudo
// blocks plus their orthogonal complements:
//   zeta_t  = L1^{-1} (A_l z_t)      (block marginal whitening)
//   zetab_t = Qbar z_t               (complement, rows orthonormal to L1^{-1}A_l)
//   B       = Re(ifft(sqrt(lambda) . fft([zeta_1..zeta_T, zetab_1..zetab_T])))[0:n]
// This yields the exact joint fGN law on the full grid while staying
// pathwise close to the blockwise map, which keeps the downstream
// importance weights stable. T == 1 delegates to the block map.
struct FullPathMap {
    double h = 0.5;
    int level = 0;
    std::size_t block_m = 0;           // 2^level increments per unit interval
    std::size_t span = 0;              // T
    std::size_t n = 0;                 // span * block_m
    SpectralEmbedding block_emb;
    std::vector<double> sqrt_lambda;   // length 2n, clipped full-grid spectrum
    std::vector<double> chol_block;    // m x m lower triangle of chol(Sigma1), row-major
    std::vector<double> q_complement;  // m x 2m, rows complete L1^{-1}A_l to an orthogonal map
};

FullPathMap build_full_path_map(double h, int level, std::size_t span, double tol_eig = 1e-12);

IncrementPath full_path(const FullPathMap& map, const std::vector<NoiseBlock>& blocks,
                        CostLedger* ledger = nullptr);

// Pairwise sums: level l increments -> level l-1 increments over the same span.
IncrementPath coarsen(const IncrementPath& fine);

}  // namespace pofbm::fgn
