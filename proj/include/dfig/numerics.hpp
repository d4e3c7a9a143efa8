#pragma once

// Small dense linear algebra and integration kernel.
//
// Everything here works on fixed-size, stack-allocated value types. Matrices are
// row-major. The eigenvalue solver is the classic balance / Householder-Hessenberg /
// Francis double-shift QR pipeline, sized for the 4x4 closed-loop matrices used by
// the controller synthesis.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dfig/errors.hpp"

namespace dfig {

template <std::size_t N>
using Vec = std::array<double, N>;

using Vec2 = Vec<2>;
using Vec4 = Vec<4>;

template <std::size_t R, std::size_t C>
struct Matrix {
    static constexpr std::size_t rows = R;
    static constexpr std::size_t cols = C;

    std::array<double, R * C> data{};

    constexpr double& operator()(std::size_t i, std::size_t j) { return data[i * C + j]; }
    constexpr double operator()(std::size_t i, std::size_t j) const { return data[i * C + j]; }

    static constexpr Matrix zero() { return Matrix{}; }

    static constexpr Matrix identity()
        requires(R == C)
    {
        Matrix m{};
        for (std::size_t i = 0; i < R; ++i) m(i, i) = 1.0;
        return m;
    }

    static constexpr Matrix diagonal(const Vec<R>& d)
        requires(R == C)
    {
        Matrix m{};
        for (std::size_t i = 0; i < R; ++i) m(i, i) = d[i];
        return m;
    }

    static constexpr Matrix from_rows(const double (&v)[R][C]) {
        Matrix m{};
        for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = 0; j < C; ++j) m(i, j) = v[i][j];
        return m;
    }

    [[nodiscard]] constexpr Vec<C> row(std::size_t i) const {
        Vec<C> r{};
        for (std::size_t j = 0; j < C; ++j) r[j] = (*this)(i, j);
        return r;
    }

    [[nodiscard]] constexpr Vec<R> col(std::size_t j) const {
        Vec<R> c{};
        for (std::size_t i = 0; i < R; ++i) c[i] = (*this)(i, j);
        return c;
    }

    friend constexpr bool operator==(const Matrix&, const Matrix&) = default;
};

using Mat2 = Matrix<2, 2>;
using Mat4 = Matrix<4, 4>;
using Gain = Matrix<2, 4>;       // state-feedback gain K, u = -K x
using InputMap = Matrix<4, 2>;   // B

// ---------------------------------------------------------------------------
// Elementwise / algebraic operators
// ---------------------------------------------------------------------------

template <std::size_t R, std::size_t C>
constexpr Matrix<R, C> operator+(Matrix<R, C> a, const Matrix<R, C>& b) {
    for (std::size_t k = 0; k < R * C; ++k) a.data[k] += b.data[k];
    return a;
}

template <std::size_t R, std::size_t C>
constexpr Matrix<R, C> operator-(Matrix<R, C> a, const Matrix<R, C>& b) {
    for (std::size_t k = 0; k < R * C; ++k) a.data[k] -= b.data[k];
    return a;
}

template <std::size_t R, std::size_t C>
constexpr Matrix<R, C> operator*(double s, Matrix<R, C> a) {
    for (auto& v : a.data) v *= s;
    return a;
}

template <std::size_t R, std::size_t K, std::size_t C>
constexpr Matrix<R, C> operator*(const Matrix<R, K>& a, const Matrix<K, C>& b) {
    Matrix<R, C> out{};
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < C; ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

template <std::size_t R, std::size_t C>
constexpr Vec<R> operator*(const Matrix<R, C>& a, const Vec<C>& x) {
    Vec<R> y{};
    for (std::size_t i = 0; i < R; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < C; ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

template <std::size_t R, std::size_t C>
constexpr Matrix<C, R> transpose(const Matrix<R, C>& a) {
    Matrix<C, R> t{};
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) t(j, i) = a(i, j);
    return t;
}

template <std::size_t N>
constexpr double trace(const Matrix<N, N>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a(i, i);
    return s;
}

template <std::size_t N>
constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t N>
constexpr Vec<N> add(Vec<N> a, const Vec<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
    return a;
}

template <std::size_t N>
constexpr Vec<N> sub(Vec<N> a, const Vec<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
    return a;
}

template <std::size_t N>
constexpr Vec<N> scale(Vec<N> a, double s) {
    for (auto& v : a) v *= s;
    return a;
}

template <std::size_t N>
double norm(const Vec<N>& a) {
    return std::sqrt(dot(a, a));
}

template <std::size_t N>
double norm_inf(const Vec<N>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

template <std::size_t N>
bool all_finite(const Vec<N>& a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

template <std::size_t R, std::size_t C>
bool all_finite(const Matrix<R, C>& a) {
    return std::all_of(a.data.begin(), a.data.end(), [](double v) { return std::isfinite(v); });
}

template <std::size_t R, std::size_t C>
double max_abs(const Matrix<R, C>& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

/// Largest absolute row sum (infinity norm).
template <std::size_t R, std::size_t C>
double max_row_norm(const Matrix<R, C>& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < C; ++j) s += std::abs(a(i, j));
        m = std::max(m, s);
    }
    return m;
}

template <std::size_t N>
std::string to_string(const Vec<N>& v) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (std::size_t i = 0; i < N; ++i) os << (i ? ", " : "") << v[i];
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// LU factorization, determinant, solve, inverse
// ---------------------------------------------------------------------------

template <std::size_t N>
struct LuFactors {
    Matrix<N, N> lu;
    std::array<std::size_t, N> perm{};
    double det = 1.0;
};

/// Doolittle LU with partial pivoting. Never fails; a zero pivot shows up as det == 0.
template <std::size_t N>
LuFactors<N> lu_factor(const Matrix<N, N>& a) {
    LuFactors<N> f{a, {}, 1.0};
    for (std::size_t i = 0; i < N; ++i) f.perm[i] = i;
    for (std::size_t k = 0; k < N; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < N; ++i)
            if (std::abs(f.lu(i, k)) > std::abs(f.lu(p, k))) p = i;
        if (p != k) {
            for (std::size_t j = 0; j < N; ++j) std::swap(f.lu(k, j), f.lu(p, j));
            std::swap(f.perm[k], f.perm[p]);
            f.det = -f.det;
        }
        const double piv = f.lu(k, k);
        f.det *= piv;
        if (piv == 0.0) continue;
        for (std::size_t i = k + 1; i < N; ++i) {
            const double m = f.lu(i, k) / piv;
            f.lu(i, k) = m;
            for (std::size_t j = k + 1; j < N; ++j) f.lu(i, j) -= m * f.lu(k, j);
        }
    }
    return f;
}

template <std::size_t N>
double determinant(const Matrix<N, N>& a) {
    return lu_factor(a).det;
}

/// Default relative singularity threshold on the Hadamard ratio |det| / prod(row norms).
inline constexpr double kSingularityThreshold = 1e-12;

// Product of Euclidean row norms; bounds |det| from above and is invariant to row scaling.
template <std::size_t N>
double hadamard_bound(const Matrix<N, N>& a) {
    double p = 1.0;
    for (std::size_t i = 0; i < N; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j) s += a(i, j) * a(i, j);
        p *= std::sqrt(s);
    }
    return p;
}

template <std::size_t N>
bool is_near_singular(const Matrix<N, N>& a, double rel = kSingularityThreshold) {
    return !(std::abs(determinant(a)) > rel * hadamard_bound(a));
}

template <std::size_t N>
Vec<N> lu_solve(const LuFactors<N>& f, const Vec<N>& b) {
    Vec<N> y{};
    for (std::size_t i = 0; i < N; ++i) {
        double s = b[f.perm[i]];
        for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * y[j];
        y[i] = s;
    }
    for (std::size_t ii = N; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < N; ++j) s -= f.lu(ii, j) * y[j];
        y[ii] = s / f.lu(ii, ii);
    }
    return y;
}

template <std::size_t N>
Vec<N> solve(const Matrix<N, N>& a, const Vec<N>& b, double rel = kSingularityThreshold) {
    if (is_near_singular(a, rel)) throw NumericalError("solve: matrix is numerically singular");
    return lu_solve(lu_factor(a), b);
}

/// Inverse by LU with partial pivoting. Throws NumericalError when
/// |det(a)| <= rel * prod(row norms).
template <std::size_t N>
Matrix<N, N> inverse(const Matrix<N, N>& a, double rel = kSingularityThreshold) {
    const auto f = lu_factor(a);
    if (!(std::abs(f.det) > rel * hadamard_bound(a))) throw NumericalError("inverse: matrix is numerically singular");
    Matrix<N, N> inv{};
    for (std::size_t j = 0; j < N; ++j) {
        Vec<N> e{};
        e[j] = 1.0;
        const auto c = lu_solve(f, e);
        for (std::size_t i = 0; i < N; ++i) inv(i, j) = c[i];
    }
    return inv;
}

inline Mat2 inverse2(const Mat2& a) {
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double scale = max_row_norm(a) * max_row_norm(a);
    if (!(std::abs(det) > kSingularityThreshold * scale)) throw NumericalError("inverse2: singular 2x2 matrix");
    return Mat2::from_rows({{a(1, 1) / det, -a(0, 1) / det}, {-a(1, 0) / det, a(0, 0) / det}});
}

/// Numerical rank by Gaussian elimination with complete pivoting.
template <std::size_t R, std::size_t C>
std::size_t matrix_rank(Matrix<R, C> a, double rel_tol = 1e-10) {
    const double tol = rel_tol * std::max(max_abs(a), std::numeric_limits<double>::min());
    std::size_t rank = 0;
    std::array<bool, R> row_used{};
    std::array<bool, C> col_used{};
    for (std::size_t step = 0; step < std::min(R, C); ++step) {
        double best = 0.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < R; ++i) {
            if (row_used[i]) continue;
            for (std::size_t j = 0; j < C; ++j) {
                if (col_used[j]) continue;
                if (std::abs(a(i, j)) > best) {
                    best = std::abs(a(i, j));
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best <= tol) break;
        ++rank;
        row_used[bi] = true;
        col_used[bj] = true;
        for (std::size_t i = 0; i < R; ++i) {
            if (row_used[i]) continue;
            const double m = a(i, bj) / a(bi, bj);
            for (std::size_t j = 0; j < C; ++j) a(i, j) -= m * a(bi, j);
        }
    }
    return rank;
}

// ---------------------------------------------------------------------------
// Eigenvalues of small real matrices
// ---------------------------------------------------------------------------

template <std::size_t N>
using Spectrum = std::array<std::complex<double>, N>;

using ComplexSpectrum = Spectrum<4>;

template <std::size_t N>
struct EigenResult {
    Spectrum<N> values{};
    bool converged = false;
    int iterations = 0;
};

namespace detail {

// Parlett-Reinsch balancing by powers of two; similarity transform, exact in floating point.
template <std::size_t N>
void balance(Matrix<N, N>& a) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < N; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < N; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < N; ++j) a(j, i) *= f;
            }
        }
    }
}

// Householder reduction to upper Hessenberg form.
template <std::size_t N>
void hessenberg(Matrix<N, N>& a) {
    if constexpr (N < 3) return;
    for (std::size_t k = 0; k + 2 < N; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k + 1; i < N; ++i) alpha += a(i, k) * a(i, k);
        alpha = std::sqrt(alpha);
        if (alpha == 0.0) continue;
        if (a(k + 1, k) > 0.0) alpha = -alpha;
        Vec<N> v{};
        v[k + 1] = a(k + 1, k) - alpha;
        for (std::size_t i = k + 2; i < N; ++i) v[i] = a(i, k);
        const double vv = dot(v, v);
        if (vv == 0.0) continue;
        // a <- (I - 2vv^T/vv) a (I - 2vv^T/vv)
        for (std::size_t j = 0; j < N; ++j) {
            double s = 0.0;
            for (std::size_t i = k + 1; i < N; ++i) s += v[i] * a(i, j);
            s *= 2.0 / vv;
            for (std::size_t i = k + 1; i < N; ++i) a(i, j) -= s * v[i];
        }
        for (std::size_t i = 0; i < N; ++i) {
            double s = 0.0;
            for (std::size_t j = k + 1; j < N; ++j) s += a(i, j) * v[j];
            s *= 2.0 / vv;
            for (std::size_t j = k + 1; j < N; ++j) a(i, j) -= s * v[j];
        }
        for (std::size_t i = k + 2; i < N; ++i) a(i, k) = 0.0;
    }
}

inline double sign_of(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

}  // namespace detail

/// Eigenvalues of a real square matrix: balancing, Householder-Hessenberg reduction and
/// Francis double-shift QR with exceptional shifts. The total QR sweep count is capped at
/// 100*N; exceeding it returns `converged == false`.
template <std::size_t N>
EigenResult<N> eigenvalues(const Matrix<N, N>& m) {
    EigenResult<N> out;
    if (!all_finite(m)) return out;
    Matrix<N, N> h = m;
    detail::balance(h);
    detail::hessenberg(h);

    // 1-based view keeps the QR sweep readable against the textbook formulation.
    auto a = [&h](int i, int j) -> double& { return h(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)); };
    const int n = static_cast<int>(N);
    const int cap = 100 * n;
    constexpr double eps = std::numeric_limits<double>::epsilon();

    double anorm = 0.0;
    for (int i = 1; i <= n; ++i)
        for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a(i, j));

    std::array<double, N + 1> wr{}, wi{};
    int nn = n;
    double t = 0.0;
    int total = 0;
    while (nn >= 1) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 2; --l) {
                double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) <= eps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            if (l < 1) l = 1;
            double x = a(nn, nn);
            if (l == nn) {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                --nn;
            } else {
                double y = a(nn - 1, nn - 1);
                double w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    const double p = 0.5 * (y - x);
                    const double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + detail::sign_of(z, p);
                        wr[nn - 1] = wr[nn] = x + z;
                        if (z != 0.0) wr[nn] = x - w / z;
                        wi[nn - 1] = wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = wr[nn] = x + p;
                        wi[nn - 1] = -(wi[nn] = z);
                    }
                    nn -= 2;
                } else {
                    if (total >= cap) {
                        out.iterations = total;
                        return out;
                    }
                    if (its == 10 || its == 20) {
                        t += x;
                        for (int i = 1; i <= nn; ++i) a(i, i) -= x;
                        const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    ++total;
                    int mm = nn - 2;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (; mm >= l; --mm) {
                        z = a(mm, mm);
                        r = x - z;
                        double s = y - z;
                        p = (r * s - w) / a(mm + 1, mm) + a(mm, mm + 1);
                        q = a(mm + 1, mm + 1) - z - r - s;
                        r = a(mm + 2, mm + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (mm == l) break;
                        const double u = std::abs(a(mm, mm - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(a(mm - 1, mm - 1)) + std::abs(z) + std::abs(a(mm + 1, mm + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = mm + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != mm + 2) a(i, i - 3) = 0.0;
                    }
                    for (int k = mm; k <= nn - 1; ++k) {
                        if (k != mm) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = 0.0;
                            if (k != nn - 1) r = a(k + 2, k - 1);
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = detail::sign_of(std::sqrt(p * p + q * q + r * r), p);
                        if (s != 0.0) {
                            if (k == mm) {
                                if (l != mm) a(k, k - 1) = -a(k, k - 1);
                            } else {
                                a(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = a(k, j) + q * a(k + 1, j);
                                if (k != nn - 1) {
                                    p += r * a(k + 2, j);
                                    a(k + 2, j) -= p * z;
                                }
                                a(k + 1, j) -= p * y;
                                a(k, j) -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * a(i, k) + y * a(i, k + 1);
                                if (k != nn - 1) {
                                    p += z * a(i, k + 2);
                                    a(i, k + 2) -= p * r;
                                }
                                a(i, k + 1) -= p * q;
                                a(i, k) -= p;
                            }
                        }
                    }
                }
            }
        } while (nn >= 1 && l < nn - 1);
    }
    for (std::size_t i = 0; i < N; ++i) out.values[i] = {wr[i + 1], wi[i + 1]};
    out.converged = true;
    out.iterations = total;
    return out;
}

inline EigenResult<4> eig4(const Mat4& m) { return eigenvalues(m); }

/// Largest distance between paired eigenvalues under greedy minimal-distance matching.
/// Eigenvalue order is not canonical, so spectra compare as multisets.
template <std::size_t N>
double spectrum_distance(const Spectrum<N>& a, const Spectrum<N>& b) {
    std::array<bool, N> used_a{}, used_b{};
    double worst = 0.0;
    for (std::size_t step = 0; step < N; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < N; ++i) {
            if (used_a[i]) continue;
            for (std::size_t j = 0; j < N; ++j) {
                if (used_b[j]) continue;
                const double d = std::abs(a[i] - b[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        used_a[bi] = used_b[bj] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

/// True when every non-real member has its conjugate in the set (tolerance relative to magnitude).
template <std::size_t N>
bool is_conjugate_closed(const Spectrum<N>& s, double tol = 1e-9) {
    std::array<bool, N> used{};
    for (std::size_t i = 0; i < N; ++i) {
        if (used[i]) continue;
        const double scale = std::max(1.0, std::abs(s[i]));
        if (std::abs(s[i].imag()) <= tol * scale) {
            used[i] = true;
            continue;
        }
        bool found = false;
        for (std::size_t j = i + 1; j < N && !found; ++j) {
            if (!used[j] && std::abs(s[j] - std::conj(s[i])) <= tol * scale) {
                used[i] = used[j] = true;
                found = true;
            }
        }
        if (!found) return false;
    }
    return true;
}

/// Monic characteristic polynomial coefficients [1, c1, ..., cN] of a matrix (Faddeev-LeVerrier).
template <std::size_t N>
Vec<N + 1> characteristic_polynomial(const Matrix<N, N>& a) {
    Vec<N + 1> c{};
    c[0] = 1.0;
    Matrix<N, N> m{};  // M_0 = 0
    for (std::size_t k = 1; k <= N; ++k) {
        m = a * m;
        for (std::size_t i = 0; i < N; ++i) m(i, i) += c[k - 1];
        c[k] = -trace(a * m) / static_cast<double>(k);
    }
    return c;
}

/// Monic polynomial with the given roots; imaginary residue is dropped (roots must be conjugate-closed).
template <std::size_t N>
Vec<N + 1> polynomial_from_roots(const Spectrum<N>& roots) {
    std::array<std::complex<double>, N + 1> p{};
    p[0] = 1.0;
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t i = k + 1; i > 0; --i) p[i] -= roots[k] * p[i - 1];
    }
    Vec<N + 1> out{};
    for (std::size_t i = 0; i <= N; ++i) out[i] = p[i].real();
    return out;
}

// ---------------------------------------------------------------------------
// Symmetric 2x2 eigendecomposition
// ---------------------------------------------------------------------------

struct SymEigen2 {
    Mat2 m;  // orthogonal, columns are eigenvectors
    Mat2 d;  // diag(lambda1, lambda2), lambda1 >= lambda2
};

/// Closed-form eigendecomposition of [[q1, q2], [q2, q3]] with M^T Q M = D.
///
/// The eigenvector columns follow (q2, l1 - q1) and (l2 - q3, q2). The differences
/// l1 - q1 and l2 - q3 are evaluated in the cancellation-free form for whichever sign
/// q1 - q3 has. For |q2| below 1e-14 * max(|q1|, |q3|) the matrix is treated as
/// diagonal and M is the identity or the swap that orders D descending.
inline SymEigen2 eig_sym2(double q1, double q2, double q3) {
    const double scale = std::max(std::abs(q1), std::abs(q3));
    if (std::abs(q2) < 1e-14 * scale || (q2 == 0.0 && scale == 0.0)) {
        if (q1 >= q3) return {Mat2::identity(), Mat2::diagonal({q1, q3})};
        return {Mat2::from_rows({{0.0, 1.0}, {1.0, 0.0}}), Mat2::diagonal({q3, q1})};
    }
    const double delta = q1 - q3;
    const double disc = std::hypot(delta, 2.0 * q2);
    const double mean = 0.5 * (q1 + q3);
    const double l1 = mean + 0.5 * disc;
    const double l2 = mean - 0.5 * disc;
    double l1_minus_q1, l2_minus_q3;
    if (delta >= 0.0) {
        l1_minus_q1 = 2.0 * q2 * q2 / (disc + delta);
        l2_minus_q3 = -l1_minus_q1;
    } else {
        l1_minus_q1 = 0.5 * (disc - delta);
        l2_minus_q3 = 0.5 * (delta - disc);
    }
    const double n1 = std::hypot(q2, l1_minus_q1);
    const double n2 = std::hypot(l2_minus_q3, q2);
    Mat2 m = Mat2::from_rows({{q2 / n1, l2_minus_q3 / n2}, {l1_minus_q1 / n1, q2 / n2}});
    return {m, Mat2::diagonal({l1, l2})};
}

// ---------------------------------------------------------------------------
// Pole placement
// ---------------------------------------------------------------------------

struct PlacementOptions {
    double tolerance = 1e-6;          // max eigenvalue distance accepted on exit
    int max_iterations = 100;         // Newton iterations
    double controllability_tol = 1e-10;
};

namespace detail {

// Split a conjugate-closed 4-spectrum into two real monic quadratics s^2 + c1 s + c0.
inline std::array<Vec2, 2> quadratic_factors(const ComplexSpectrum& desired) {
    std::vector<std::complex<double>> complex_roots, real_roots;
    for (const auto& z : desired) {
        if (std::abs(z.imag()) > 1e-12 * std::max(1.0, std::abs(z))) {
            if (z.imag() > 0.0) complex_roots.push_back(z);
        } else {
            real_roots.emplace_back(z.real(), 0.0);
        }
    }
    std::sort(real_roots.begin(), real_roots.end(), [](auto x, auto y) { return x.real() < y.real(); });
    std::vector<Vec2> quads;
    for (const auto& z : complex_roots) quads.push_back({-2.0 * z.real(), std::norm(z)});
    for (std::size_t i = 0; i + 1 < real_roots.size(); i += 2) {
        const double r1 = real_roots[i].real(), r2 = real_roots[i + 1].real();
        quads.push_back({-(r1 + r2), r1 * r2});
    }
    if (quads.size() != 2) throw NumericalError("place_poles: desired spectrum is not conjugate-closed");
    return {quads[0], quads[1]};
}

inline bool is_lower_identity_input(const InputMap& b) {
    return b == InputMap::from_rows({{0, 0}, {0, 0}, {1, 0}, {0, 1}});
}

template <std::size_t R, std::size_t C>
Matrix<R, C> block(const Mat4& a, std::size_t r0, std::size_t c0) {
    Matrix<R, C> out{};
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) out(i, j) = a(r0 + i, c0 + j);
    return out;
}

// Exact placement for B = [0; I] with invertible upper-right block A12. In the coordinates
// (x_top, A11 x_top + A12 x_bot) the closed loop becomes [[0, I], [-F0, -F1]]; diagonal
// F0, F1 carry the two quadratic factors of the desired characteristic polynomial.
inline Gain block_companion_gain(const Mat4& a, const ComplexSpectrum& desired) {
    const auto a11 = block<2, 2>(a, 0, 0);
    const auto a12 = block<2, 2>(a, 0, 2);
    const auto a21 = block<2, 2>(a, 2, 0);
    const auto a22 = block<2, 2>(a, 2, 2);
    const auto quads = quadratic_factors(desired);
    const Mat2 f1 = Mat2::diagonal({quads[0][0], quads[1][0]});
    const Mat2 f0 = Mat2::diagonal({quads[0][1], quads[1][1]});
    const Mat2 a12_inv = inverse2(a12);
    const Mat2 ka = a21 + a12_inv * (a11 * a11 + f0 + f1 * a11);
    const Mat2 kb = a22 + a12_inv * (a11 * a12 + f1 * a12);
    Gain k{};
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            k(i, j) = ka(i, j);
            k(i, j + 2) = kb(i, j);
        }
    return k;
}

}  // namespace detail

/// Controllability matrix [b, ab, a^2 b, a^3 b].
inline Matrix<4, 8> controllability_matrix(const Mat4& a, const InputMap& b) {
    Matrix<4, 8> c{};
    InputMap blk = b;
    for (std::size_t p = 0; p < 4; ++p) {
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 2; ++j) c(i, 2 * p + j) = blk(i, j);
        blk = a * blk;
    }
    return c;
}

/// State-feedback gain K such that eig(a - b K) equals `desired` (as a multiset).
///
/// Solves the four characteristic-polynomial coefficient equations in the eight gain
/// entries by damped minimum-norm Newton steps. When b = [0; I] and the upper-right block
/// of `a` is invertible, the iteration starts from an exact block-companion solution;
/// otherwise it starts from K = 0. Uncontrollable pairs succeed only if the fixed modes
/// are part of the requested spectrum.
inline Gain place_poles(const Mat4& a, const InputMap& b, const ComplexSpectrum& desired,
                        const PlacementOptions& opt = {}) {
    if (!all_finite(a) || !all_finite(b)) throw NumericalError("place_poles: non-finite input");
    if (!is_conjugate_closed(desired)) throw NumericalError("place_poles: desired spectrum is not conjugate-closed");

    const auto target = polynomial_from_roots(desired);
    const bool controllable = matrix_rank(controllability_matrix(a, b), opt.controllability_tol) == 4;

    Gain k{};
    if (detail::is_lower_identity_input(b) && !is_near_singular(detail::block<2, 2>(a, 0, 2), 1e-14)) {
        k = detail::block_companion_gain(a, desired);
    }

    auto residual = [&](const Gain& g) {
        const auto c = characteristic_polynomial(a - b * g);
        Vec4 r{};
        for (std::size_t i = 0; i < 4; ++i) r[i] = (c[i + 1] - target[i + 1]) / std::max(1.0, std::abs(target[i + 1]));
        return r;
    };

    Vec4 r = residual(k);
    for (int it = 0; it < opt.max_iterations && norm(r) > 1e-14; ++it) {
        // Jacobian of the scaled coefficients w.r.t. the 8 gain entries. Coefficients are
        // at most quadratic in K for a two-column b, so central differences are exact up to rounding.
        Matrix<4, 8> jac{};
        for (std::size_t e = 0; e < 8; ++e) {
            const double h = 1e-6 * std::max(1.0, std::abs(k.data[e]));
            Gain kp = k, km = k;
            kp.data[e] += h;
            km.data[e] -= h;
            const auto rp = residual(kp), rm = residual(km);
            for (std::size_t i = 0; i < 4; ++i) jac(i, e) = (rp[i] - rm[i]) / (2.0 * h);
        }
        // Minimum-norm step dK = -J^T (J J^T + mu I)^{-1} r.
        Mat4 jjt = jac * transpose(jac);
        const double mu = 1e-14 * std::max(1.0, max_abs(jjt));
        for (std::size_t i = 0; i < 4; ++i) jjt(i, i) += mu;
        Vec4 y{};
        try {
            y = solve(jjt, r, 0.0);
        } catch (const NumericalError&) {
            break;
        }
        const auto step = transpose(jac) * y;
        double lambda = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls) {
            Gain trial = k;
            for (std::size_t e = 0; e < 8; ++e) trial.data[e] -= lambda * step[e];
            const auto rt = residual(trial);
            if (norm(rt) < norm(r)) {
                k = trial;
                r = rt;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) break;
    }

    const auto eig = eigenvalues(a - b * k);
    if (eig.converged && spectrum_distance(eig.values, desired) <= opt.tolerance) return k;
    if (!controllable) throw NumericalError("place_poles: (a, b) is not controllable and the requested spectrum is unreachable");
    throw NumericalError("place_poles: requested spectrum not reached within the iteration cap");
}

// ---------------------------------------------------------------------------
// Scalar minimization
// ---------------------------------------------------------------------------

/// Golden-section minimizer of a unimodal function on [a, b]; returns the abscissa.
inline double golden_section_min(const std::function<double(double)>& f, double a, double b, double tol = 1e-10) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Fixed-step integration
// ---------------------------------------------------------------------------

/// One classical fourth-order Runge-Kutta step of x' = f(t, x). Throws SimulationAbort when
/// the result is not finite.
template <std::size_t N, class F>
Vec<N> rk4_step(F&& f, const Vec<N>& x, double t, double h) {
    const Vec<N> k1 = f(t, x);
    const Vec<N> k2 = f(t + 0.5 * h, add(x, scale(k1, 0.5 * h)));
    const Vec<N> k3 = f(t + 0.5 * h, add(x, scale(k2, 0.5 * h)));
    const Vec<N> k4 = f(t + h, add(x, scale(k3, h)));
    Vec<N> out = x;
    for (std::size_t i = 0; i < N; ++i) out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!all_finite(out)) {
        throw SimulationAbort(t, "rk4_step: non-finite state at t=" + std::to_string(t) + " from x=" + to_string(x));
    }
    return out;
}

}  // namespace dfig
