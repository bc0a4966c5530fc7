#pragma once

// Exact 2x2 complex kernels for the linear Langevin system
//
//     d b/dt = A b + xi(t),   <xi(t) xi(t')^dag> = D delta(t - t')
//
// over one step: the propagator F = exp(A dt), the increment covariance
//     S(dt) = int_0^dt exp(A u) D exp(A^dag u) du
// and the stationary covariance solving A S + S A^dag + D = 0.
//
// exp uses the traceless split (robust at defective points); the
// integrals use the eigendecomposition in closed form, falling back to
// Gauss-Legendre quadrature near exceptional points where the
// eigenvectors degrade.  For the step sizes admitted by the solver
// (|A| dt << 1) the quadrature is itself exact to machine precision.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace ottomech {

using cplx = std::complex<double>;

struct Vec2c {
    cplx x{0.0, 0.0}, y{0.0, 0.0};
};

struct Mat2c {
    // row-major: [ a b ; c d ]
    cplx a{0.0, 0.0}, b{0.0, 0.0}, c{0.0, 0.0}, d{0.0, 0.0};

    static Mat2c identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2c diag(cplx p, cplx q) { return {p, 0.0, 0.0, q}; }

    Mat2c operator*(const Mat2c& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Vec2c operator*(const Vec2c& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2c operator+(const Mat2c& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2c operator-(const Mat2c& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    Mat2c operator*(cplx s) const { return {a * s, b * s, c * s, d * s}; }

    Mat2c adjoint() const {
        return {std::conj(a), std::conj(c), std::conj(b), std::conj(d)};
    }
    cplx det() const { return a * d - b * c; }
    cplx trace() const { return a + d; }
    double norm1() const {
        return std::abs(a) + std::abs(b) + std::abs(c) + std::abs(d);
    }
    bool finite() const {
        auto ok = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
        return ok(a) && ok(b) && ok(c) && ok(d);
    }
};

namespace detail {

inline cplx sinhc(cplx z) {
    if (std::abs(z) < 1e-4) {
        const cplx z2 = z * z;
        return 1.0 + z2 / 6.0 * (1.0 + z2 / 20.0);
    }
    return std::sinh(z) / z;
}

// (exp(s) - 1)/s, stable near s = 0.
inline cplx expm1_over(cplx s) {
    if (std::abs(s) < 1e-4) {
        return 1.0 + s / 2.0 * (1.0 + s / 3.0 * (1.0 + s / 4.0));
    }
    return (std::exp(s) - 1.0) / s;
}

} // namespace detail

// exp(M) through M = m I + B with tr B = 0, B^2 = q^2 I:
// exp(M) = e^m (cosh q I + sinhc(q) B).  Valid for every 2x2 M.
inline Mat2c expm(const Mat2c& m) {
    const cplx mu = 0.5 * m.trace();
    const cplx b11 = m.a - mu;
    const cplx q = std::sqrt(b11 * b11 + m.b * m.c);
    const cplx ch = std::cosh(q), sh = detail::sinhc(q);
    const cplx em = std::exp(mu);
    return {em * (ch + sh * b11), em * (sh * m.b),
            em * (sh * m.c), em * (ch - sh * b11)};
}

namespace detail {

struct Eig2 {
    cplx lambda1, lambda2;
    Mat2c v;    // columns are eigenvectors
    Mat2c vinv;
    bool ok = false; // false when V is too ill-conditioned to invert
};

inline Eig2 eigen_decompose(const Mat2c& m) {
    Eig2 e;
    const cplx mu = 0.5 * m.trace();
    const cplx b11 = m.a - mu;
    const cplx q = std::sqrt(b11 * b11 + m.b * m.c);
    e.lambda1 = mu + q;
    e.lambda2 = mu - q;

    auto eigvec = [&](cplx lam) -> Vec2c {
        // two algebraic candidates; pick the larger for conditioning
        const Vec2c c1{m.b, lam - m.a};
        const Vec2c c2{lam - m.d, m.c};
        const double n1 = std::abs(c1.x) + std::abs(c1.y);
        const double n2 = std::abs(c2.x) + std::abs(c2.y);
        Vec2c v = (n1 >= n2) ? c1 : c2;
        const double n = std::max(n1, n2);
        if (n == 0.0) return {1.0, 0.0}; // diagonal matrix
        v.x /= n;
        v.y /= n;
        return v;
    };

    Vec2c v1 = eigvec(e.lambda1), v2 = eigvec(e.lambda2);
    // normalize columns so |det V| measures the eigenbasis angle
    auto nrm = [](Vec2c& v) {
        const double n = std::sqrt(std::norm(v.x) + std::norm(v.y));
        v.x /= n;
        v.y /= n;
    };
    nrm(v1);
    nrm(v2);
    e.v = {v1.x, v2.x, v1.y, v2.y};
    const cplx dv = e.v.det();
    if (std::abs(dv) < 1e-8) {
        e.ok = false;
        return e;
    }
    e.vinv = {e.v.d / dv, -e.v.b / dv, -e.v.c / dv, e.v.a / dv};
    e.ok = true;
    return e;
}

// 12-point Gauss-Legendre nodes/weights on [0, 1].
inline const std::array<double, 12>& gl_nodes() {
    static const std::array<double, 12> x = {
        0.00921968287664038, 0.04794137181476257, 0.11504866290284765,
        0.20634102285669128, 0.31608425050090994, 0.43738329574426554,
        0.56261670425573446, 0.68391574949909006, 0.79365897714330872,
        0.88495133709715235, 0.95205862818523743, 0.99078031712335962};
    return x;
}
inline const std::array<double, 12>& gl_weights() {
    static const std::array<double, 12> w = {
        0.02358766819325591, 0.05346966299765922, 0.08003916427167311,
        0.10158371336153296, 0.11674626826917740, 0.12457352290670139,
        0.12457352290670139, 0.11674626826917740, 0.10158371336153296,
        0.08003916427167311, 0.05346966299765922, 0.02358766819325591};
    return w;
}

inline Mat2c covariance_quadrature(const Mat2c& a, const Mat2c& d, double dt) {
    Mat2c s{};
    const auto& xs = gl_nodes();
    const auto& ws = gl_weights();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const Mat2c e = expm(a * cplx(xs[k] * dt, 0.0));
        s = s + (e * d * e.adjoint()) * cplx(ws[k] * dt, 0.0);
    }
    return s;
}

// G = V [ C_ij phi(l_i + l_j^*) ] V^dag with C = V^-1 D V^-dag; phi is
// supplied so the same path serves increments and the stationary solve.
template <class Phi>
Mat2c eigen_weighted(const Eig2& e, const Mat2c& d, Phi&& phi) {
    const Mat2c c = e.vinv * d * e.vinv.adjoint();
    const cplx l1 = e.lambda1, l2 = e.lambda2;
    Mat2c k{c.a * phi(l1 + std::conj(l1)), c.b * phi(l1 + std::conj(l2)),
            c.c * phi(l2 + std::conj(l1)), c.d * phi(l2 + std::conj(l2))};
    return e.v * k * e.v.adjoint();
}

} // namespace detail

// Covariance accumulated by the noise over one step of length dt.
inline Mat2c increment_covariance(const Mat2c& a, const Mat2c& d, double dt) {
    if (d.norm1() == 0.0) return Mat2c{};
    const detail::Eig2 e = detail::eigen_decompose(a);
    Mat2c s = e.ok
                  ? detail::eigen_weighted(e, d, [dt](cplx l) { return dt * detail::expm1_over(l * dt); })
                  : detail::covariance_quadrature(a, d, dt);
    // exact result is Hermitian; symmetrize rounding
    const cplx off = 0.5 * (s.b + std::conj(s.c));
    return {cplx(s.a.real(), 0.0), off, std::conj(off), cplx(s.d.real(), 0.0)};
}

// Stationary covariance of the damped system (all Re lambda < 0).
inline Mat2c stationary_covariance(const Mat2c& a, const Mat2c& d) {
    const detail::Eig2 e = detail::eigen_decompose(a);
    if (!e.ok)
        throw std::runtime_error("stationary_covariance: defective drift matrix");
    const double margin = -1e-9 * (1.0 + a.norm1());
    for (cplx s : {e.lambda1 + std::conj(e.lambda1), e.lambda1 + std::conj(e.lambda2),
                   e.lambda2 + std::conj(e.lambda2)})
        if (s.real() > margin)
            throw std::runtime_error("stationary_covariance: undamped normal mode, no stationary state");
    Mat2c s = detail::eigen_weighted(e, d, [](cplx l) { return -1.0 / l; });
    const cplx off = 0.5 * (s.b + std::conj(s.c));
    return {cplx(s.a.real(), 0.0), off, std::conj(off), cplx(s.d.real(), 0.0)};
}

// Lower-triangular factor of a Hermitian PSD 2x2, tolerant of
// semi-definite input (zero noise on one or both modes).
inline Mat2c cholesky(const Mat2c& s) {
    const double scale = s.norm1();
    const double tiny = 1e-300 + 1e-15 * scale;
    Mat2c l{};
    const double a = s.a.real();
    if (a > tiny) {
        const double ra = std::sqrt(a);
        l.a = ra;
        l.c = s.c / ra;
        const double rem = s.d.real() - std::norm(l.c);
        l.d = rem > 0.0 ? std::sqrt(rem) : 0.0;
    } else {
        l.a = 0.0;
        l.c = 0.0;
        const double dd = s.d.real();
        l.d = dd > 0.0 ? std::sqrt(dd) : 0.0;
    }
    return l;
}

} // namespace ottomech
