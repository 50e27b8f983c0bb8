#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace embfair {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Vectors are stored as rows=1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
    double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// Runs f(i) for i in [0, n). jobs <= 1 selects the serial reference path;
// jobs > 1 runs the same loop under OpenMP. Callers that need bit-stable
// output must write results into per-index slots and reduce serially.
template <class F>
void parallel_for(int n, int jobs, F&& f) {
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
    for (int i = 0; i < n; ++i) f(i);
#else
    for (int i = 0; i < n; ++i) f(i);
#endif
}

inline int hardware_jobs() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::string to_hex(std::span<const unsigned char> bytes);

// Writes via a temporary file in the target directory, then renames.
void atomic_write_file(const std::string& path, const std::string& contents);

// SHA-256 digests; canonical hash for fingerprints, manifests and file digests.
std::string sha256_hex(std::span<const unsigned char> data);
std::string sha256_hex_str(const std::string& data);
std::string sha256_file_hex(const std::string& path);

class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;
    void update(const void* data, size_t n);
    void update_u64(uint64_t v);
    void update_f64(double v);
    void update_str(const std::string& s);
    std::vector<unsigned char> finish();

private:
    void* ctx_ = nullptr;
};

}  // namespace embfair
