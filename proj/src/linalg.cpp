#include "mbdf/linalg.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>

namespace mbdf {

namespace {

constexpr std::size_t kMaxCountedDim = 64;
std::array<std::atomic<std::uint64_t>, kMaxCountedDim + 1> g_fact_counts{};

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
    : rows_(rows), cols_(cols), d_(std::move(data)) {
    require(d_.size() == rows * cols, "CMatrix: data size does not match shape");
    if (!finite()) throw std::invalid_argument("CMatrix: non-finite entry");
}

CMatrix CMatrix::identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

CMatrix CMatrix::adjoint() const {
    CMatrix m(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) m(j, i) = std::conj((*this)(i, j));
    return m;
}

CVector CMatrix::col(std::size_t j) const {
    CVector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
}

bool CMatrix::finite() const {
    for (const cplx& z : d_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

CMatrix operator+(const CMatrix& a, const CMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix add: shape mismatch");
    CMatrix m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j) + b(i, j);
    return m;
}

CMatrix operator-(const CMatrix& a, const CMatrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "matrix sub: shape mismatch");
    CMatrix m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = a(i, j) - b(i, j);
    return m;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    require(a.cols() == b.rows(), "matrix mul: shape mismatch");
    CMatrix m(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx(0.0, 0.0)) continue;
            const cplx* brow = b.row(k);
            cplx* mrow = m.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) mrow[j] += aik * brow[j];
        }
    }
    return m;
}

CMatrix operator*(cplx s, const CMatrix& a) {
    CMatrix m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = s * a(i, j);
    return m;
}

CVector matvec(const CMatrix& a, const CVector& x) {
    require(a.cols() == x.size(), "matvec: shape mismatch");
    CVector y(a.rows(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const cplx* row = a.row(i);
        cplx acc(0.0, 0.0);
        for (std::size_t j = 0; j < x.size(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

CVector adjvec(const CMatrix& a, const CVector& x) {
    require(a.rows() == x.size(), "adjvec: shape mismatch");
    CVector y(a.cols(), cplx(0.0, 0.0));
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const cplx* row = a.row(i);
        const cplx xi = x[i];
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += std::conj(row[j]) * xi;
    }
    return y;
}

cplx cdot(const CVector& a, const CVector& b) {
    require(a.size() == b.size(), "cdot: size mismatch");
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

double sqnorm(const CVector& a) {
    double acc = 0.0;
    for (const cplx& z : a) acc += std::norm(z);
    return acc;
}

double fro_norm(const CMatrix& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) acc += std::norm(a(i, j));
    return std::sqrt(acc);
}

CVector operator+(const CVector& a, const CVector& b) {
    require(a.size() == b.size(), "vector add: size mismatch");
    CVector v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] + b[i];
    return v;
}

CVector operator-(const CVector& a, const CVector& b) {
    require(a.size() == b.size(), "vector sub: size mismatch");
    CVector v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] - b[i];
    return v;
}

CVector operator*(cplx s, const CVector& a) {
    CVector v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = s * a[i];
    return v;
}

CholFactor factorize_hpd(const CMatrix& a) {
    require(a.rows() == a.cols() && a.rows() > 0, "factorize_hpd: matrix must be square");
    if (!a.finite()) throw std::invalid_argument("factorize_hpd: non-finite entry");
    const std::size_t n = a.rows();

    double herm_dev = 0.0;
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        trace += a(i, i).real();
        for (std::size_t j = i; j < n; ++j) {
            const double dev = std::abs(a(i, j) - std::conj(a(j, i)));
            if (dev > herm_dev) herm_dev = dev;
        }
    }
    require(herm_dev <= 1e-10, "factorize_hpd: matrix is not Hermitian");

    const double pivot_floor = 1e-12 * (trace > 0.0 ? trace / static_cast<double>(n) : 0.0);

    CholFactor f;
    f.l_ = CMatrix(n, n);
    CMatrix& l = f.l_;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (!(d > pivot_floor) || !(d > 0.0))
            throw SingularMatrixError("factorize_hpd: pivot below tolerance (matrix singular or indefinite)");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }
    if (n <= kMaxCountedDim) g_fact_counts[n].fetch_add(1, std::memory_order_relaxed);
    return f;
}

CVector CholFactor::solve(const CVector& b) const {
    const std::size_t n = l_.rows();
    require(b.size() == n, "CholFactor::solve: size mismatch");
    CVector y(b);
    for (std::size_t i = 0; i < n; ++i) {
        cplx s = y[i];
        for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
        y[i] = s / l_(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        cplx s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(l_(k, ii)) * y[k];
        y[ii] = s / l_(ii, ii);
    }
    return y;
}

CMatrix CholFactor::solve(const CMatrix& b) const {
    require(b.rows() == l_.rows(), "CholFactor::solve: shape mismatch");
    CMatrix x(b.rows(), b.cols());
    CVector column(b.rows());
    for (std::size_t j = 0; j < b.cols(); ++j) {
        for (std::size_t i = 0; i < b.rows(); ++i) column[i] = b(i, j);
        CVector sol = solve(column);
        for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
    }
    return x;
}

CVector hermitian_solve(const CMatrix& a, const CVector& b) {
    return factorize_hpd(a).solve(b);
}

CMatrix hermitian_solve(const CMatrix& a, const CMatrix& b) {
    return factorize_hpd(a).solve(b);
}

CVector lu_solve(CMatrix a, CVector b) {
    require(a.rows() == a.cols() && a.rows() == b.size(), "lu_solve: shape mismatch");
    const std::size_t n = a.rows();
    double amax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) amax = std::max(amax, std::abs(a(i, j)));
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(a(i, k));
            if (v > best) { best = v; piv = i; }
        }
        if (!(best > 1e-12 * std::max(amax, 1e-300)))
            throw SingularMatrixError("lu_solve: pivot below tolerance");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const cplx m = a(i, k) / a(k, k);
            a(i, k) = m;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= m * a(k, j);
            b[i] -= m * b[k];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        cplx s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * b[j];
        b[ii] = s / a(ii, ii);
    }
    return b;
}

CMatrix projection_from_shape(const CMatrix& s) {
    require(s.cols() > 0, "projection_from_shape: empty shape");
    if (!s.finite()) throw std::invalid_argument("projection_from_shape: non-finite entry");
    const std::size_t n = s.cols();

    // Orthonormal basis of the row space of S (vectors live in C^n).
    std::vector<CVector> basis;
    for (std::size_t i = 0; i < s.rows(); ++i) {
        CVector v(n);
        for (std::size_t j = 0; j < n; ++j) v[j] = std::conj(s(i, j));
        const double orig = std::sqrt(sqnorm(v));
        for (int pass = 0; pass < 2; ++pass)
            for (const CVector& q : basis) {
                const cplx c = cdot(q, v);
                for (std::size_t j = 0; j < n; ++j) v[j] -= c * q[j];
            }
        const double rem = std::sqrt(sqnorm(v));
        if (rem <= 1e-10 * std::max(orig, 1.0)) continue;
        for (std::size_t j = 0; j < n; ++j) v[j] /= rem;
        basis.push_back(std::move(v));
    }

    CMatrix pi = CMatrix::identity(n);
    for (const CVector& q : basis)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) pi(i, j) -= q[i] * std::conj(q[j]);
    return pi;
}

std::uint64_t factorization_count(std::size_t n) {
    if (n > kMaxCountedDim) return 0;
    return g_fact_counts[n].load(std::memory_order_relaxed);
}

void reset_factorization_counts() {
    for (auto& c : g_fact_counts) c.store(0, std::memory_order_relaxed);
}

}  // namespace mbdf
