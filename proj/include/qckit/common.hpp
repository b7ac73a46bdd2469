#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <atomic>
#include <bit>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qckit {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

// Global validation tolerances.
inline constexpr double kNormTol = 1e-10;
inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdFloor = -1e-9;
inline constexpr double kEntropyCutoff = 1e-14;

// Largest qubit count handled by the dense backend.
inline constexpr int kMaxDenseQubits = 14;

/// Input rejected by a validation rule. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed (non-convergence, degenerate input). Exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::size_t dim_of(int n) { return std::size_t{1} << n; }

/// Qubit q of an n-qubit register lives in bit (n - 1 - q), so qubit 0 is the
/// most significant bit and chain prefixes are contiguous index blocks.
inline int bit_of(int n, int q) { return n - 1 - q; }

inline int popcount(std::uint64_t x) { return std::popcount(x); }

/// Deterministic child seed for stream `index` of a master seed. Results depend
/// only on (master, index), never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x71c3u};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Runs body(i) for i in [0, count). Each index writes only to its own slot, so
/// the result is independent of thread count. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Eigenvalues at or below this (relative to max(1, largest)) count as zero rank.
inline constexpr double kRankCutoff = 1e-13;

/// A with m = A A^dag, columns sqrt(lambda) v over the eigenvalues above the rank cutoff.
inline CMatrix psd_factor(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    const RVector& vals = es.eigenvalues();
    const double cut = kRankCutoff * std::max(1.0, vals.size() ? vals.maxCoeff() : 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < vals.size(); ++i)
        if (vals[i] > cut) keep.push_back(i);
    CMatrix a(m.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
        a.col(static_cast<Eigen::Index>(c)) = std::sqrt(vals[keep[c]]) * es.eigenvectors().col(keep[c]);
    return a;
}

/// Rotates the global phase so the largest-magnitude amplitude is real positive.
/// Ties within 1e-12 go to the lowest index.
inline void fix_global_phase(CVector& v) {
    if (v.size() == 0) return;
    const double peak = v.cwiseAbs().maxCoeff();
    if (peak == 0.0) return;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= peak - 1e-12) {
            v *= std::conj(v[i]) / std::abs(v[i]);
            v[i] = Complex{v[i].real(), 0.0};
            return;
        }
    }
}

}  // namespace qckit
