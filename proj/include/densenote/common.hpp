#pragma once

// Shared plumbing: error types, deterministic RNG, small vector kernels and
// a fixed-stripe parallel helper whose results do not depend on thread count.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace densenote {

// ---------------------------------------------------------------------------
// Errors. One exception type per contract violation named in the interfaces.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct EmptyQuery : Error { using Error::Error; };
struct PromptOverflow : Error { using Error::Error; };
struct TokenRangeError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct MrlDimError : Error { using Error::Error; };
struct BatchShapeError : Error { using Error::Error; };
struct DegenerateEmbedding : Error { using Error::Error; };
struct NumericsError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct DegenerateTarget : Error { using Error::Error; };
struct DegenerateLabels : Error { using Error::Error; };
struct MissingRanking : Error { using Error::Error; };
struct EmptyIndex : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// RNG. mt19937_64 is bit-exact everywhere; the distributions below are our
// own so that sampled streams are identical across standard libraries.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t x);

// Stable sub-stream derivation: fold a tag into a seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Uniform in [0, 1).
    double uniform();
    // Standard normal via Box-Muller (cached spare).
    double normal();
    // Uniform integer in [0, n), rejection sampled.
    std::uint64_t below(std::uint64_t n);
    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // Weighted index in [0, w.size()), weights >= 0, not all zero.
    std::size_t weighted(const std::vector<double>& w);

    Rng fork(std::uint64_t tag) const { return Rng(derive_seed(seed_, tag)); }

    std::uint64_t raw();

private:
    std::uint64_t seed_;
    std::uint64_t state_[312];  // mt19937_64 kept behind raw() to avoid <random> in the header
    int mti_;
    bool has_spare_ = false;
    double spare_ = 0.0;

    void reseed(std::uint64_t seed);
    void twist();
};

// ---------------------------------------------------------------------------
// Vector kernels (f64, contiguous).
// ---------------------------------------------------------------------------

double dot(const double* a, const double* b, std::size_t n);
double norm2(const double* a, std::size_t n);           // squared L2
inline double norm(const double* a, std::size_t n) { return std::sqrt(norm2(a, n)); }

// Cosine of the first m components. Throws DegenerateEmbedding on a zero prefix.
double cosine_prefix(const double* a, const double* b, std::size_t m);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// C[m x n] = A[m x k] * B[n x k]^T   (rows of B are the "output" directions)
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t n, std::size_t k);
// C[m x n] += A[m x k] * B[k x n]
void matmul_nn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t n, std::size_t k);
// C[k x n] += A[m x k]^T * B[m x n]
void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t n, std::size_t k);

// ---------------------------------------------------------------------------
// Deterministic parallelism. Work is cut into a fixed number of stripes so
// that any reduction done per-stripe and folded in stripe order yields the
// same bits regardless of how many threads execute the stripes.
// ---------------------------------------------------------------------------

inline constexpr int kGradStripes = 16;

int max_threads();                 // 0 < value; honors DENSENOTE_THREADS
void set_max_threads(int n);       // n <= 0 restores the default

// Runs fn(i) for i in [0, n) across up to max_threads() workers. fn must only
// write to slots owned by index i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Runs fn(stripe, begin, end) for `stripes` contiguous ranges covering [0, n).
void parallel_stripes(std::size_t n, int stripes,
                      const std::function<void(int, std::size_t, std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Misc.
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);
bool file_exists(const std::string& path);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const void* data, std::size_t n);

}  // namespace densenote
