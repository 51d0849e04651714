#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace homognet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index  = Eigen::Index;

// ---- errors ----------------------------------------------------------------

/// Input or factor shape does not match the family dims.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid argument value (negative width, infeasible witness, bad option).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite value hit mid-computation; carries the sample index when known.
struct NumericError : std::runtime_error {
    long sample = -1;
    explicit NumericError(const std::string& msg, long sample_index = -1)
        : std::runtime_error(sample_index >= 0
                                 ? msg + " (sample " + std::to_string(sample_index) + ")"
                                 : msg),
          sample(sample_index) {}
};

/// A closed-form precondition failed; the message names the violated inequality.
struct ConstraintError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Attention factor with ||z||_2 > 1: the indicator part of theta is +inf.
struct InfeasibleRegularizerError : std::domain_error {
    using std::domain_error::domain_error;
};

// ---- seeding ----------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent stream seed for (master, cell); cells never share state.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell) {
    return splitmix64(splitmix64(master) ^ splitmix64(cell * 0x9e3779b97f4a7c15ull + 1));
}

/// Column-major i.i.d. N(0,1) fill with a fixed draw order.
inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& gen) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) out(i, j) = nd(gen);
    return out;
}

inline Vector gaussian_vector(Index n, std::mt19937_64& gen) {
    Vector out(n);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Index i = 0; i < n; ++i) out(i) = nd(gen);
    return out;
}

// ---- small dense helpers -----------------------------------------------------

inline double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

inline double nuclear_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(a).singularValues().sum();
}

}  // namespace homognet
