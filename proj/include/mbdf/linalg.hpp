#pragma once
// Dense complex linear algebra sized for small detection problems
// (matrices up to a few dozen rows; everything is O(n^3) direct methods).

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mbdf {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// Row-major dense complex matrix. Construction from data rejects non-finite
// entries; element access is unchecked for speed.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), d_(rows * cols, cplx(0.0, 0.0)) {}
    CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data);

    static CMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cplx& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }
    cplx* row(std::size_t i) { return d_.data() + i * cols_; }
    const cplx* row(std::size_t i) const { return d_.data() + i * cols_; }

    CMatrix adjoint() const;
    CVector col(std::size_t j) const;
    bool finite() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<cplx> d_;
};

CMatrix operator+(const CMatrix& a, const CMatrix& b);
CMatrix operator-(const CMatrix& a, const CMatrix& b);
CMatrix operator*(const CMatrix& a, const CMatrix& b);
CMatrix operator*(cplx s, const CMatrix& a);

CVector matvec(const CMatrix& a, const CVector& x);   // A x
CVector adjvec(const CMatrix& a, const CVector& x);   // A^H x

cplx cdot(const CVector& a, const CVector& b);        // a^H b
double sqnorm(const CVector& a);
double fro_norm(const CMatrix& a);

CVector operator+(const CVector& a, const CVector& b);
CVector operator-(const CVector& a, const CVector& b);
CVector operator*(cplx s, const CVector& a);

// Cholesky factor of a Hermitian positive definite matrix (A = L L^H),
// reusable across many right-hand sides.
class CholFactor {
public:
    CVector solve(const CVector& b) const;
    CMatrix solve(const CMatrix& b) const;
    std::size_t dim() const { return l_.rows(); }

private:
    friend CholFactor factorize_hpd(const CMatrix& a);
    CMatrix l_;
};

// Throws std::invalid_argument if A deviates from Hermitian by more than
// 1e-10 elementwise, SingularMatrixError if a pivot falls below
// 1e-12 * trace(A)/n.
CholFactor factorize_hpd(const CMatrix& a);

CVector hermitian_solve(const CMatrix& a, const CVector& b);
CMatrix hermitian_solve(const CMatrix& a, const CMatrix& b);

// General small dense solve (partial-pivot LU); used for systems that are
// not guaranteed Hermitian positive definite.
CVector lu_solve(CMatrix a, CVector b);

// Pi = I - S^H (S^H S)^+ S. The middle factor with the Moore-Penrose
// pseudo-inverse is the orthogonal projector onto the row space of S, so Pi
// is built by Gram-Schmidt on the rows of S; rank decisions use a 1e-10
// relative drop tolerance, which keeps S = 0 (Pi = I) and rank-deficient
// selections exact.
CMatrix projection_from_shape(const CMatrix& s);

// Count of Cholesky factorizations performed per matrix dimension since the
// last reset; lets tests assert how often the expensive step actually runs.
std::uint64_t factorization_count(std::size_t n);
void reset_factorization_counts();

}  // namespace mbdf
