#include "densenote/common.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <sys/stat.h>
#include <thread>

namespace densenote {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// ---------------------------------------------------------------------------
// MT19937-64 (Matsumoto & Nishimura reference constants).
// ---------------------------------------------------------------------------

namespace {
constexpr int kNN = 312;
constexpr int kMM = 156;
constexpr std::uint64_t kMatrixA = 0xB5026F5AA96619E9ULL;
constexpr std::uint64_t kUpperMask = 0xFFFFFFFF80000000ULL;
constexpr std::uint64_t kLowerMask = 0x7FFFFFFFULL;
}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) { reseed(seed); }

void Rng::reseed(std::uint64_t seed) {
    state_[0] = seed;
    for (int i = 1; i < kNN; ++i) {
        state_[i] = 6364136223846793005ULL * (state_[i - 1] ^ (state_[i - 1] >> 62)) +
                    static_cast<std::uint64_t>(i);
    }
    mti_ = kNN;
    has_spare_ = false;
}

void Rng::twist() {
    for (int i = 0; i < kNN; ++i) {
        const std::uint64_t x =
            (state_[i] & kUpperMask) | (state_[(i + 1) % kNN] & kLowerMask);
        std::uint64_t y = state_[(i + kMM) % kNN] ^ (x >> 1);
        if (x & 1ULL) y ^= kMatrixA;
        state_[i] = y;
    }
    mti_ = 0;
}

std::uint64_t Rng::raw() {
    if (mti_ >= kNN) twist();
    std::uint64_t y = state_[mti_++];
    y ^= (y >> 29) & 0x5555555555555555ULL;
    y ^= (y << 17) & 0x71D67FFFEDA60000ULL;
    y ^= (y << 37) & 0xFFF7EEE000000000ULL;
    y ^= (y >> 43);
    return y;
}

double Rng::uniform() {
    return static_cast<double>(raw() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u = 1.0 - uniform();  // avoid log(0)
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw DomainError("Rng::below: n must be > 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = raw();
    while (r >= limit) r = raw();
    return r % n;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw DomainError("Rng::uniform_int: empty range");
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
}

std::size_t Rng::weighted(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) throw DomainError("Rng::weighted: weights sum to zero");
    const double r = uniform() * total;
    double c = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        c += w[i];
        if (r < c) return i;
    }
    return w.size() - 1;
}

// ---------------------------------------------------------------------------
// Vector kernels.
// ---------------------------------------------------------------------------

double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

double norm2(const double* a, std::size_t n) { return dot(a, a, n); }

double cosine_prefix(const double* a, const double* b, std::size_t m) {
    const double na = norm2(a, m);
    const double nb = norm2(b, m);
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw DegenerateEmbedding("cosine on zero-norm prefix of length " +
                                  std::to_string(m));
    }
    return dot(a, b, m) / std::sqrt(na * nb);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = dot(ai, b + j * k, k);
    }
}

void matmul_nn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            double* cp = c + p * n;
            for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Parallel helpers.
// ---------------------------------------------------------------------------

namespace {
std::atomic<int> g_max_threads{0};

int default_threads() {
    if (const char* env = std::getenv("DENSENOTE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return std::min(v, 64);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hc, 1u, 16u));
}
}  // namespace

int max_threads() {
    int v = g_max_threads.load(std::memory_order_relaxed);
    if (v <= 0) {
        v = default_threads();
        g_max_threads.store(v, std::memory_order_relaxed);
    }
    return v;
}

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int nt = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

void parallel_stripes(std::size_t n, int stripes,
                      const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (stripes <= 0) throw ConfigError("parallel_stripes: stripes must be > 0");
    const std::size_t s = static_cast<std::size_t>(stripes);
    parallel_for(s, [&](std::size_t idx) {
        const std::size_t begin = n * idx / s;
        const std::size_t end = n * (idx + 1) / s;
        if (begin < end) fn(static_cast<int>(idx), begin, end);
    });
}

// ---------------------------------------------------------------------------
// Files and hashing.
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for read: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + path);
}

bool file_exists(const std::string& path) {
    struct stat st{};
    return ::stat(path.c_str(), &st) == 0;
}

std::string sha256_bytes(const void* data, std::size_t n) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error("EVP_MD_CTX_new failed");
    if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, n) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("SHA-256 computation failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::string& path) {
    const std::string bytes = read_file(path);
    return sha256_bytes(bytes.data(), bytes.size());
}

}  // namespace densenote
