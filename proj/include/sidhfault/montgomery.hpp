#pragma once

// Montgomery curves E_A : y^2 = x^3 + A x^2 + x over GF(p^2).
//
// The curve constant B of By^2 = x^3 + Ax^2 + x is fixed to 1 throughout.
// x-only formulas never see B, and every B != 0 gives a curve isomorphic to
// E_A or its quadratic twist, so nothing is lost.
//
// Curve coefficients are stored projectively as (alpha : beta) =
// (A + 2C : A - 2C), the form that 3-isogenies produce directly. The
// doubling form (A + 2C : 4C) is (alpha : alpha - beta).

#include <cstddef>
#include <optional>
#include <random>

#include "errors.hpp"
#include "field.hpp"

namespace sidhfault {

template <std::size_t N>
struct ProjCoeff {
    Fp2<N> alpha;
    Fp2<N> beta;

    static ProjCoeff from_affine(Fp2<N> const &a)
    {
        Fp2<N> two(a.field(), 2);
        return {a + two, a - two};
    }

    Fp2<N> const &a24plus() const { return alpha; }
    Fp2<N> const &a24minus() const { return beta; }
    Fp2<N> c24() const { return alpha - beta; }
};

// Projective x-coordinate (X : Z). Infinity is (1 : 0); (0 : 0) is not a point
// and only appears after a corrupted computation.
template <std::size_t N>
struct XPoint {
    Fp2<N> X;
    Fp2<N> Z;

    static XPoint infinity(PrimeField<N> const &f) { return {Fp2<N>::one(f), Fp2<N>::zero(f)}; }
    static XPoint from_affine(Fp2<N> const &x) { return {x, Fp2<N>::one(x.field())}; }

    bool is_infinity() const { return Z.is_zero() && !X.is_zero(); }
    bool is_degenerate() const { return Z.is_zero() && X.is_zero(); }

    Fp2<N> affine_x() const
    {
        if (Z.is_zero())
            throw ContractViolation("affine x of the point at infinity");
        return X * Z.inv();
    }
};

// Same projective point (both non-degenerate).
template <std::size_t N>
bool same_x(XPoint<N> const &a, XPoint<N> const &b)
{
    return a.X * b.Z == b.X * a.Z;
}

template <std::size_t N>
struct MontgomeryCurve {
    Fp2<N> A;

    static MontgomeryCurve from_coeff(ProjCoeff<N> const &c);

    PrimeField<N> const &field() const { return A.field(); }
    ProjCoeff<N> coeff() const { return ProjCoeff<N>::from_affine(A); }

    // x^3 + A x^2 + x
    Fp2<N> rhs(Fp2<N> const &x) const { return ((x + A) * x + Fp2<N>::one(field())) * x; }
};

template <std::size_t N>
struct FullPoint {
    Fp2<N> x;
    Fp2<N> y;
    bool infinity = false;

    static FullPoint at_infinity(PrimeField<N> const &f) { return {Fp2<N>::zero(f), Fp2<N>::zero(f), true}; }

    XPoint<N> xpoint() const
    {
        if (infinity)
            return XPoint<N>::infinity(x.field());
        return XPoint<N>::from_affine(x);
    }

    friend bool operator==(FullPoint const &a, FullPoint const &b)
    {
        if (a.infinity || b.infinity)
            return a.infinity == b.infinity;
        return a.x == b.x && a.y == b.y;
    }
};

// ---------------------------------------------------------------------------
// Coefficient representations and the GF(p) membership predicates.

// A = 2(alpha + beta) / (alpha - beta).
template <std::size_t N>
Fp2<N> affine_a_from_projective(ProjCoeff<N> const &c)
{
    Fp2<N> den = c.alpha - c.beta;
    if (den.is_zero())
        throw DegenerateCoefficient("projective coefficient with alpha == beta");
    return (c.alpha + c.beta).dbl() * den.inv();
}

// With alpha = a + ib and beta = c + id, the affine A lies in GF(p) exactly
// when ad - bc = 0.
template <std::size_t N>
bool coeff_in_fp(ProjCoeff<N> const &c)
{
    if (c.alpha == c.beta)
        throw DegenerateCoefficient("projective coefficient with alpha == beta");
    auto const &a = c.alpha.re();
    auto const &b = c.alpha.im();
    auto const &cr = c.beta.re();
    auto const &d = c.beta.im();
    return a * d == b * cr;
}

// (x0 + i x1 : z0 + i z1) has affine x in GF(p) iff x0 z1 = z0 x1. Infinity
// counts as being in GF(p).
template <std::size_t N>
bool xpoint_in_fp(XPoint<N> const &P)
{
    if (P.is_degenerate())
        throw ContractViolation("xpoint_in_fp on (0 : 0)");
    return P.X.re() * P.Z.im() == P.Z.re() * P.X.im();
}

// j(E_A) = 256 (A^2 - 3)^3 / (A^2 - 4).
template <std::size_t N>
Fp2<N> j_invariant(Fp2<N> const &A)
{
    auto const &f = A.field();
    Fp2<N> a2 = A.sqr();
    Fp2<N> den = a2 - Fp2<N>(f, 4);
    if (den.is_zero())
        throw DegenerateCoefficient("singular curve: A^2 = 4");
    Fp2<N> t = a2 - Fp2<N>(f, 3);
    Fp2<N> num = t.sqr() * t * Fp2<N>(f, 256);
    return num * den.inv();
}

template <std::size_t N>
Fp2<N> j_invariant(ProjCoeff<N> const &c)
{
    return j_invariant(affine_a_from_projective(c));
}

template <std::size_t N>
MontgomeryCurve<N> MontgomeryCurve<N>::from_coeff(ProjCoeff<N> const &c)
{
    return {affine_a_from_projective(c)};
}

// ---------------------------------------------------------------------------
// x-only arithmetic.

template <std::size_t N>
XPoint<N> xdbl(XPoint<N> const &P, ProjCoeff<N> const &c)
{
    Fp2<N> t0 = (P.X - P.Z).sqr();
    Fp2<N> t1 = (P.X + P.Z).sqr();
    Fp2<N> z = c.c24() * t0;
    Fp2<N> x = z * t1;
    t1 = t1 - t0;
    t0 = c.a24plus() * t1;
    z = (z + t0) * t1;
    return {x, z};
}

template <std::size_t N>
XPoint<N> xdbl_e(XPoint<N> P, ProjCoeff<N> const &c, std::size_t e)
{
    // Hoist c24 out of the loop.
    Fp2<N> const c24 = c.c24();
    for (std::size_t i = 0; i < e; ++i) {
        Fp2<N> t0 = (P.X - P.Z).sqr();
        Fp2<N> t1 = (P.X + P.Z).sqr();
        Fp2<N> z = c24 * t0;
        P.X = z * t1;
        t1 = t1 - t0;
        t0 = c.a24plus() * t1;
        P.Z = (z + t0) * t1;
    }
    return P;
}

template <std::size_t N>
XPoint<N> xtpl(XPoint<N> const &P, ProjCoeff<N> const &c)
{
    Fp2<N> t0 = P.X - P.Z;
    Fp2<N> t2 = t0.sqr();
    Fp2<N> t1 = P.X + P.Z;
    Fp2<N> t3 = t1.sqr();
    Fp2<N> t4 = t0 + t1;
    t0 = t1 - t0;
    t1 = t4.sqr() - t3 - t2;
    Fp2<N> t5 = t3 * c.a24plus();
    t3 = t3 * t5;
    Fp2<N> t6 = t2 * c.a24minus();
    t2 = t2 * t6;
    t3 = t2 - t3;
    t2 = t5 - t6;
    t1 = t2 * t1;
    t2 = (t3 + t1).sqr();
    t1 = (t3 - t1).sqr();
    return {t4 * t2, t0 * t1};
}

template <std::size_t N>
XPoint<N> xtpl_e(XPoint<N> P, ProjCoeff<N> const &c, std::size_t e)
{
    for (std::size_t i = 0; i < e; ++i)
        P = xtpl(P, c);
    return P;
}

// x(P + Q) from x(P), x(Q) and x(P - Q).
template <std::size_t N>
XPoint<N> xadd(XPoint<N> const &P, XPoint<N> const &Q, XPoint<N> const &PmQ)
{
    Fp2<N> t0 = (P.X + P.Z) * (Q.X - Q.Z);
    Fp2<N> t1 = (P.X - P.Z) * (Q.X + Q.Z);
    Fp2<N> x = PmQ.Z * (t0 + t1).sqr();
    Fp2<N> z = PmQ.X * (t0 - t1).sqr();
    return {x, z};
}

// xadd that also covers the exceptional inputs: a difference of O (the
// operands are equal), a difference of T = (0, 0), and infinite operands.
// With P - Q = T, P + Q = [2]Q + T and x(R + T) = 1 / x(R).
template <std::size_t N>
XPoint<N> xadd_checked(XPoint<N> const &P, XPoint<N> const &Q, XPoint<N> const &PmQ, ProjCoeff<N> const &c)
{
    if (P.is_infinity())
        return Q;
    if (Q.is_infinity())
        return P;
    if (PmQ.is_infinity())
        return xdbl(Q, c);
    if (PmQ.X.is_zero()) {
        XPoint<N> d = xdbl(Q, c);
        return {d.Z, d.X};
    }
    return xadd(P, Q, PmQ);
}

// x([k]P) by the Montgomery ladder.
template <std::size_t N>
XPoint<N> xmul(UInt<N> const &k, XPoint<N> const &P, ProjCoeff<N> const &c)
{
    auto const &f = P.X.field();
    if (k.is_zero() || P.is_infinity())
        return XPoint<N>::infinity(f);
    XPoint<N> r0 = P;
    XPoint<N> r1 = xdbl(P, c);
    for (std::size_t i = k.bit_length() - 1; i-- > 0;) {
        if (k.bit(i)) {
            r0 = xadd_checked(r0, r1, P, c);
            r1 = xdbl(r1, c);
        } else {
            r1 = xadd_checked(r0, r1, P, c);
            r0 = xdbl(r0, c);
        }
    }
    return r0;
}

// x(P + [k]Q) from x(P), x(Q), x(P - Q), scanning k from the least
// significant bit. Loop invariant after i bits, with m = k mod 2^i:
//   r0 = [2^i]Q,  r1 = P + [m]Q,  r2 = r1 - r0.
template <std::size_t N>
XPoint<N> ladder3pt(UInt<N> const &k, XPoint<N> const &xP, XPoint<N> const &xQ, XPoint<N> const &xPQ,
                    ProjCoeff<N> const &c)
{
    XPoint<N> r0 = xQ;
    XPoint<N> r1 = xP;
    XPoint<N> r2 = xPQ;
    std::size_t nbits = k.bit_length();
    for (std::size_t i = 0; i < nbits; ++i) {
        if (k.bit(i)) {
            // r1 + r0 has difference r1 - r0 = r2; r2 stays put.
            r1 = xadd_checked(r1, r0, r2, c);
        } else {
            // r2 - r0 has difference r2 + r0 = r1.
            r2 = xadd_checked(r2, r0, r1, c);
        }
        if (i + 1 < nbits)
            r0 = xdbl(r0, c);
    }
    return r1;
}

// ---------------------------------------------------------------------------
// Affine group law, for the attacker side and for test oracles.

template <std::size_t N>
bool on_curve(MontgomeryCurve<N> const &E, FullPoint<N> const &P)
{
    return P.infinity || P.y.sqr() == E.rhs(P.x);
}

template <std::size_t N>
FullPoint<N> negate(FullPoint<N> const &P)
{
    return {P.x, -P.y, P.infinity};
}

template <std::size_t N>
FullPoint<N> dbl(MontgomeryCurve<N> const &E, FullPoint<N> const &P)
{
    auto const &f = E.field();
    if (P.infinity || P.y.is_zero())
        return FullPoint<N>::at_infinity(f);
    Fp2<N> one = Fp2<N>::one(f);
    Fp2<N> num = P.x.sqr() * Fp2<N>(f, 3) + (E.A * P.x).dbl() + one;
    Fp2<N> lambda = num * P.y.dbl().inv();
    Fp2<N> x3 = lambda.sqr() - E.A - P.x.dbl();
    Fp2<N> y3 = lambda * (P.x - x3) - P.y;
    return {x3, y3, false};
}

template <std::size_t N>
FullPoint<N> add(MontgomeryCurve<N> const &E, FullPoint<N> const &P, FullPoint<N> const &Q)
{
    if (P.infinity)
        return Q;
    if (Q.infinity)
        return P;
    if (P.x == Q.x) {
        if (P.y == Q.y)
            return dbl(E, P);
        return FullPoint<N>::at_infinity(E.field());
    }
    Fp2<N> lambda = (Q.y - P.y) * (Q.x - P.x).inv();
    Fp2<N> x3 = lambda.sqr() - E.A - P.x - Q.x;
    Fp2<N> y3 = lambda * (P.x - x3) - P.y;
    return {x3, y3, false};
}

template <std::size_t N>
FullPoint<N> sub(MontgomeryCurve<N> const &E, FullPoint<N> const &P, FullPoint<N> const &Q)
{
    return add(E, P, negate(Q));
}

template <std::size_t N>
FullPoint<N> scalar_mul(MontgomeryCurve<N> const &E, UInt<N> const &k, FullPoint<N> const &P)
{
    FullPoint<N> r = FullPoint<N>::at_infinity(E.field());
    for (std::size_t i = k.bit_length(); i-- > 0;) {
        r = dbl(E, r);
        if (k.bit(i))
            r = add(E, r, P);
    }
    return r;
}

// The point with the given x and the canonical square root as y; nullopt
// when x belongs to the twist.
template <std::size_t N>
std::optional<FullPoint<N>> lift_x(MontgomeryCurve<N> const &E, Fp2<N> const &x)
{
    Fp2<N> r = E.rhs(x);
    if (!r.is_square())
        return std::nullopt;
    return FullPoint<N>{x, r.sqrt(), false};
}

template <std::size_t N>
FullPoint<N> lift_xpoint(MontgomeryCurve<N> const &E, XPoint<N> const &P)
{
    if (P.is_infinity())
        return FullPoint<N>::at_infinity(E.field());
    auto r = lift_x(E, P.affine_x());
    if (!r)
        throw ContractViolation("x-coordinate lies on the twist");
    return *r;
}

template <std::size_t N, class Rng>
FullPoint<N> random_point(MontgomeryCurve<N> const &E, Rng &rng)
{
    for (;;) {
        auto P = lift_x(E, Fp2<N>::random(E.field(), rng));
        if (P)
            return *P;
    }
}

// Multiplies by (p + 1) / ell^e, leaving the ell^e-primary part.
template <std::size_t N>
XPoint<N> clear_cofactor(XPoint<N> const &P, ProjCoeff<N> const &c, unsigned ell, std::size_t e)
{
    auto const &f = P.X.field();
    std::size_t d2 = f.e2() - (ell == 2 ? e : 0);
    std::size_t d3 = f.e3() - (ell == 3 ? e : 0);
    return xtpl_e(xdbl_e(P, c, d2), c, d3);
}

// x([ell^e]P)
template <std::size_t N>
XPoint<N> mul_prime_power(XPoint<N> const &P, ProjCoeff<N> const &c, unsigned ell, std::size_t e)
{
    return ell == 2 ? xdbl_e(P, c, e) : xtpl_e(P, c, e);
}

// P has order exactly ell^e (e >= 1).
template <std::size_t N>
bool has_exact_order(XPoint<N> const &P, ProjCoeff<N> const &c, unsigned ell, std::size_t e)
{
    if (P.is_degenerate() || P.is_infinity())
        return false;
    XPoint<N> q = mul_prime_power(P, c, ell, e - 1);
    if (q.is_infinity() || q.is_degenerate())
        return false;
    q = mul_prime_power(q, c, ell, 1);
    return q.is_infinity();
}

inline constexpr int default_sampling_attempts = 1000;

// A point of exact order ell^e on E (not its twist), ell in {2, 3}.
template <std::size_t N, class Rng>
FullPoint<N> sample_point_of_order(MontgomeryCurve<N> const &E, unsigned ell, std::size_t e, Rng &rng,
                                   int attempts = default_sampling_attempts)
{
    auto const &f = E.field();
    if (ell != 2 && ell != 3)
        throw ContractViolation("point order must be a power of 2 or 3");
    if (e > (ell == 2 ? f.e2() : f.e3()))
        throw ContractViolation("requested order does not divide p + 1");
    if (e == 0)
        return FullPoint<N>::at_infinity(f);
    ProjCoeff<N> c = E.coeff();
    for (int i = 0; i < attempts; ++i) {
        Fp2<N> x = Fp2<N>::random(f, rng);
        if (!E.rhs(x).is_square())
            continue;
        XPoint<N> P = clear_cofactor(XPoint<N>::from_affine(x), c, ell, e);
        if (!has_exact_order(P, c, ell, e))
            continue;
        return lift_xpoint(E, P);
    }
    throw SamplingExhausted("no point of order " + std::to_string(ell) + "^" + std::to_string(e) + " found");
}

} // namespace sidhfault
