#include "pofbm/fgn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "pofbm/fft.hpp"

namespace pofbm::fgn {

namespace {

void check_hurst(double h) {
    if (!(h > 0.0 && h < 1.0)) throw Error("hurst parameter must be in (0,1)");
}

std::vector<double> clipped_spectrum(std::vector<std::complex<double>>& row, double tol_eig,
                                     std::size_t m_label, std::size_t* clipped = nullptr) {
    fft(row, false);
    double max_eig = 0.0;
    for (const auto& v : row) max_eig = std::max(max_eig, v.real());
    const double tol = tol_eig * max_eig;
    std::vector<double> eig(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) {
        double lam = row[k].real();
        if (lam < 0.0) {
            if (lam < -tol)
                throw NegativeSpectrum("embedding for m=" + std::to_string(m_label) +
                                       " has eigenvalue " + std::to_string(lam));
            lam = 0.0;
            if (clipped) ++*clipped;
        }
        eig[k] = lam;
    }
    return eig;
}

std::vector<std::complex<double>> circulant_row(double h, std::size_t n) {
    std::vector<std::complex<double>> row(2 * n);
    for (std::size_t k = 0; k <= n; ++k) row[k] = autocov(h, k);
    for (std::size_t k = 1; k < n; ++k) row[2 * n - k] = row[k];
    return row;
}

}  // namespace

double autocov(double h, std::size_t lag) {
    check_hurst(h);
    if (lag == 0) return 1.0;
    const double k = static_cast<double>(lag);
    const double e = 2.0 * h;
    return 0.5 * (std::pow(k + 1.0, e) - 2.0 * std::pow(k, e) + std::pow(k - 1.0, e));
}

SpectralEmbedding build_embedding(double h, std::size_t m, double tol_eig) {
    check_hurst(h);
    if (m == 0) throw Error("build_embedding: m must be positive");
    SpectralEmbedding emb;
    emb.h = h;
    emb.m = m;
    auto row = circulant_row(h, m);
    emb.eigenvalues = clipped_spectrum(row, tol_eig, m, &emb.clipped);

    const double n2 = static_cast<double>(2 * m);
    emb.pack_scale.resize(2 * m, 0.0);
    emb.pack_scale[0] = std::sqrt(emb.eigenvalues[0] / n2);
    emb.pack_scale[m] = std::sqrt(emb.eigenvalues[m] / n2);
    for (std::size_t k = 1; k < m; ++k)
        emb.pack_scale[k] = std::sqrt(emb.eigenvalues[k] / (2.0 * n2));
    return emb;
}

void sample_block_unit(const SpectralEmbedding& emb, const double* z, double* out,
                       std::vector<std::complex<double>>& scratch, CostLedger* ledger) {
    const std::size_t m = emb.m;
    if (emb.h == 0.5) {
        std::copy(z, z + m, out);
        return;
    }
    const std::size_t n2 = 2 * m;
    scratch.assign(n2, {0.0, 0.0});
    scratch[0] = emb.pack_scale[0] * z[0];
    if (m >= 1) scratch[m] = emb.pack_scale[m] * z[n2 - 1];
    for (std::size_t k = 1; k < m; ++k) {
        const std::complex<double> v(emb.pack_scale[k] * z[2 * k - 1],
                                     emb.pack_scale[k] * z[2 * k]);
        scratch[k] = v;
        scratch[n2 - k] = std::conj(v);
    }
    fft(scratch, false, ledger);
    for (std::size_t j = 0; j < m; ++j) out[j] = scratch[j].real();
}

IncrementPath sample_block(const SpectralEmbedding& emb, const NoiseBlock& block, int level,
                           CostLedger* ledger) {
    if (block.z.size() != 2 * emb.m)
        throw DimensionMismatch("sample_block: block has " + std::to_string(block.z.size()) +
                                " normals, embedding expects " + std::to_string(2 * emb.m));
    IncrementPath path;
    path.level = level;
    path.span = 1;
    path.values.resize(emb.m);
    std::vector<std::complex<double>> scratch;
    sample_block_unit(emb, block.z.data(), path.values.data(), scratch, ledger);
    const double scale = std::pow(LevelIndex(level).delta(), emb.h);
    for (auto& v : path.values) v *= scale;
    return path;
}

IncrementPath pseudo_path(const SpectralEmbedding& emb, const std::vector<NoiseBlock>& blocks,
                          int level, CostLedger* ledger) {
    const std::size_t m = emb.m;
    IncrementPath path;
    path.level = level;
    path.span = blocks.size();
    path.values.resize(m * blocks.size());
    std::vector<std::complex<double>> scratch;
    const double scale = std::pow(LevelIndex(level).delta(), emb.h);
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        if (blocks[t].z.size() != 2 * m)
            throw DimensionMismatch("pseudo_path: block " + std::to_string(t) + " has " +
                                    std::to_string(blocks[t].z.size()) + " normals");
        sample_block_unit(emb, blocks[t].z.data(), path.values.data() + t * m, scratch, ledger);
    }
    for (auto& v : path.values) v *= scale;
    return path;
}

FullPathMap build_full_path_map(double h, int level, std::size_t span, double tol_eig) {
    check_hurst(h);
    if (span == 0) throw Error("build_full_path_map: span must be positive");
    FullPathMap map;
    map.h = h;
    map.level = level;
    map.block_m = static_cast<std::size_t>(1) << level;
    map.span = span;
    map.n = map.block_m * span;
    map.block_emb = build_embedding(h, map.block_m, tol_eig);
    if (h == 0.5 || span == 1) return map;  // delegating paths need no coupling data

    auto row = circulant_row(h, map.n);
    auto lambda = clipped_spectrum(row, tol_eig, map.n);
    map.sqrt_lambda.resize(lambda.size());
    for (std::size_t k = 0; k < lambda.size(); ++k) map.sqrt_lambda[k] = std::sqrt(lambda[k]);

    // Dense block map A (m x 2m, unit-lag) by pushing basis vectors through
    // the sampler.
    const std::size_t m = map.block_m;
    Eigen::MatrixXd a_block(m, 2 * m);
    std::vector<std::complex<double>> scratch;
    std::vector<double> e(2 * m, 0.0), col(m);
    for (std::size_t j = 0; j < 2 * m; ++j) {
        e[j] = 1.0;
        sample_block_unit(map.block_emb, e.data(), col.data(), scratch);
        e[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) a_block(i, j) = col[i];
    }

    Eigen::MatrixXd sigma1(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            sigma1(i, j) = autocov(h, i >= j ? i - j : j - i);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma1);
    if (llt.info() != Eigen::Success)
        throw NegativeSpectrum("block covariance is not positive definite");
    Eigen::MatrixXd l1 = llt.matrixL();

    // Q has orthonormal rows; complete it to an orthogonal 2m x 2m map.
    Eigen::MatrixXd q = l1.triangularView<Eigen::Lower>().solve(a_block);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q.transpose());
    Eigen::MatrixXd full_q = qr.householderQ();
    Eigen::MatrixXd qbar = full_q.rightCols(m).transpose();

    map.chol_block.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j <= i; ++j) map.chol_block[i * m + j] = l1(i, j);
    map.q_complement.assign(m * 2 * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < 2 * m; ++j) map.q_complement[i * 2 * m + j] = qbar(i, j);
    return map;
}

IncrementPath full_path(const FullPathMap& map, const std::vector<NoiseBlock>& blocks,
                        CostLedger* ledger) {
    const std::size_t m = map.block_m;
    const std::size_t span = map.span;
    if (blocks.size() != span)
        throw DimensionMismatch("full_path: expected " + std::to_string(span) + " blocks, got " +
                                std::to_string(blocks.size()));
    for (const auto& b : blocks)
        if (b.z.size() != 2 * m)
            throw DimensionMismatch("full_path: block has wrong length");

    if (map.h == 0.5 || span == 1) return pseudo_path(map.block_emb, blocks, map.level, ledger);

    const std::size_t n = map.n;
    std::vector<std::complex<double>> ext(2 * n, {0.0, 0.0});
    std::vector<std::complex<double>> scratch;
    std::vector<double> p(m), zeta(m);
    for (std::size_t t = 0; t < span; ++t) {
        const double* z = blocks[t].z.data();
        sample_block_unit(map.block_emb, z, p.data(), scratch, ledger);
        // forward substitution: L1 zeta = p
        for (std::size_t i = 0; i < m; ++i) {
            double s = p[i];
            const double* lrow = map.chol_block.data() + i * m;
            for (std::size_t j = 0; j < i; ++j) s -= lrow[j] * zeta[j];
            zeta[i] = s / lrow[i];
        }
        for (std::size_t i = 0; i < m; ++i) ext[t * m + i] = zeta[i];
        // complement half of the circulant noise
        for (std::size_t i = 0; i < m; ++i) {
            const double* qrow = map.q_complement.data() + i * 2 * m;
            double s = 0.0;
            for (std::size_t j = 0; j < 2 * m; ++j) s += qrow[j] * z[j];
            ext[n + t * m + i] = s;
        }
        if (ledger) ledger->add_dense(0.5 * m * m + 2.0 * m * m);
    }

    fft(ext, false, ledger);
    for (std::size_t k = 0; k < 2 * n; ++k) ext[k] *= map.sqrt_lambda[k];
    fft(ext, true, ledger);

    IncrementPath path;
    path.level = map.level;
    path.span = span;
    path.values.resize(n);
    const double scale = std::pow(LevelIndex(map.level).delta(), map.h);
    for (std::size_t i = 0; i < n; ++i) path.values[i] = scale * ext[i].real();
    return path;
}

IncrementPath coarsen(const IncrementPath& fine) {
    if (fine.values.size() % 2 != 0)
        throw OddLength("coarsen: path length " + std::to_string(fine.values.size()));
    if (fine.level < 1) throw Error("coarsen: level must be >= 1");
    IncrementPath coarse;
    coarse.level = fine.level - 1;
    coarse.span = fine.span;
    coarse.values.resize(fine.values.size() / 2);
    for (std::size_t k = 0; k < coarse.values.size(); ++k)
        coarse.values[k] = fine.values[2 * k] + fine.values[2 * k + 1];
    return coarse;
}

}  // namespace pofbm::fgn
