#pragma once

// Arithmetic in GF(p) and GF(p^2) = GF(p)[i]/(i^2 + 1) for primes
// p = 2^e2 * 3^e3 - 1.
//
// NOTE: nothing here is constant time. Branches and memory access depend on
// operand values. This is a simulator for studying a fault attack, not a
// library for protecting keys.
//
// Residues are kept in Montgomery form internally. Every element carries a
// pointer to its field; the field object must outlive the elements (SidhParams
// owns it through a shared_ptr).

#include <cassert>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>

#include "bigint.hpp"
#include "errors.hpp"

namespace sidhfault {

// Montgomery multiplication modulo an odd n < 2^(64N).
template <std::size_t N>
class MontgomeryContext {
  public:
    using Int = UInt<N>;

    explicit MontgomeryContext(Int const &n) : n_(n)
    {
        if (!n.is_odd())
            throw InvalidParameters("Montgomery modulus must be odd");
        std::uint64_t inv = 1;
        for (int i = 0; i < 7; ++i)
            inv *= 2 - n.limb[0] * inv;
        ninv_ = ~inv + 1;

        Int r{1};
        for (std::size_t i = 0; i < Int::bits; ++i)
            r = add_mod(r, r, n_);
        one_ = r;
        for (std::size_t i = 0; i < Int::bits; ++i)
            r = add_mod(r, r, n_);
        r2_ = r;
    }

    Int const &modulus() const { return n_; }
    Int const &mont_one() const { return one_; }

    Int mul(Int const &a, Int const &b) const
    {
        std::array<std::uint64_t, N + 2> t{};
        for (std::size_t i = 0; i < N; ++i) {
            std::uint64_t c = 0;
            for (std::size_t j = 0; j < N; ++j) {
                u128 s = static_cast<u128>(a.limb[j]) * b.limb[i] + t[j] + c;
                t[j] = static_cast<std::uint64_t>(s);
                c = static_cast<std::uint64_t>(s >> 64);
            }
            u128 s = static_cast<u128>(t[N]) + c;
            t[N] = static_cast<std::uint64_t>(s);
            t[N + 1] = static_cast<std::uint64_t>(s >> 64);

            std::uint64_t m = t[0] * ninv_;
            s = static_cast<u128>(m) * n_.limb[0] + t[0];
            c = static_cast<std::uint64_t>(s >> 64);
            for (std::size_t j = 1; j < N; ++j) {
                s = static_cast<u128>(m) * n_.limb[j] + t[j] + c;
                t[j - 1] = static_cast<std::uint64_t>(s);
                c = static_cast<std::uint64_t>(s >> 64);
            }
            s = static_cast<u128>(t[N]) + c;
            t[N - 1] = static_cast<std::uint64_t>(s);
            t[N] = t[N + 1] + static_cast<std::uint64_t>(s >> 64);
        }
        Int r;
        for (std::size_t j = 0; j < N; ++j)
            r.limb[j] = t[j];
        if (t[N] != 0 || r >= n_)
            r.sub_in_place(n_);
        return r;
    }

    Int add(Int const &a, Int const &b) const { return add_mod(a, b, n_); }
    Int sub(Int const &a, Int const &b) const { return sub_mod(a, b, n_); }
    Int neg(Int const &a) const { return a.is_zero() ? a : n_ - a; }

    Int to_mont(Int const &a) const { return mul(mod(a, n_), r2_); }
    Int from_mont(Int const &a) const { return mul(a, Int{1}); }

    Int pow(Int const &base, Int const &e) const
    {
        Int r = one_;
        for (std::size_t i = e.bit_length(); i-- > 0;) {
            r = mul(r, r);
            if (e.bit(i))
                r = mul(r, base);
        }
        return r;
    }

  private:
    Int n_;
    Int one_;
    Int r2_;
    std::uint64_t ninv_ = 0;
};

// Miller-Rabin over a fixed set of prime bases; deterministic below 3.3e24,
// overwhelming confidence above.
template <std::size_t N>
bool is_probable_prime(UInt<N> const &n)
{
    static constexpr std::uint64_t small[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                              31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
    if (n < UInt<N>{2})
        return false;
    for (auto q : small) {
        if (n == UInt<N>{q})
            return true;
        UInt<N> t = n;
        if (t.divmod_small(q) == 0)
            return false;
    }
    MontgomeryContext<N> ctx(n);
    UInt<N> nm1 = n - UInt<N>{1};
    UInt<N> d = nm1;
    std::size_t s = 0;
    while (!d.is_odd()) {
        d.shr1();
        ++s;
    }
    UInt<N> const one = ctx.mont_one();
    UInt<N> const minus_one = ctx.neg(one);
    for (auto q : small) {
        UInt<N> x = ctx.pow(ctx.to_mont(UInt<N>{q}), d);
        if (x == one || x == minus_one)
            continue;
        bool composite = true;
        for (std::size_t r = 1; r < s; ++r) {
            x = ctx.mul(x, x);
            if (x == minus_one) {
                composite = false;
                break;
            }
        }
        if (composite)
            return false;
    }
    return true;
}

// GF(p) for p = 2^e2 * 3^e3 - 1, p prime and p = 3 mod 4.
template <std::size_t N>
class PrimeField {
  public:
    using Int = UInt<N>;

    static std::shared_ptr<PrimeField const> create(unsigned e2, unsigned e3)
    {
        if (e2 < 2)
            throw InvalidParameters("e2 must be at least 2");
        // p + 1 must fit with a spare bit so additions of two residues never wrap twice.
        double approx_bits = e2 + e3 * 1.5849625007211562;
        if (approx_bits > static_cast<double>(Int::bits) - 2)
            throw InvalidParameters("2^" + std::to_string(e2) + "*3^" + std::to_string(e3) +
                                    "-1 does not fit in " + std::to_string(N) + " limbs");
        Int p1 = small_pow<N>(2, e2);
        for (unsigned i = 0; i < e3; ++i)
            p1.mul_add_small(3);
        Int p = p1 - Int{1};
        if (!is_probable_prime(p))
            throw InvalidParameters("2^" + std::to_string(e2) + "*3^" + std::to_string(e3) + "-1 = " +
                                    p.to_dec() + " is not prime");
        if ((p.limb[0] & 3U) != 3U)
            throw InvalidParameters("p must be 3 mod 4");
        return std::shared_ptr<PrimeField const>(new PrimeField(p, e2, e3));
    }

    Int const &modulus() const { return p_; }
    unsigned e2() const { return e2_; }
    unsigned e3() const { return e3_; }
    MontgomeryContext<N> const &ctx() const { return ctx_; }
    std::size_t byte_size() const { return (p_.bit_length() + 7) / 8; }

    // p + 1 = 2^e2 * 3^e3
    Int order() const { return p_ + Int{1}; }
    Int const &sqrt_exponent() const { return sqrt_exp_; }
    Int const &legendre_exponent() const { return legendre_exp_; }
    Int const &inverse_exponent() const { return inv_exp_; }

  private:
    PrimeField(Int const &p, unsigned e2, unsigned e3) : p_(p), e2_(e2), e3_(e3), ctx_(p)
    {
        sqrt_exp_ = p + Int{1};
        sqrt_exp_.shr1();
        sqrt_exp_.shr1();
        legendre_exp_ = p - Int{1};
        legendre_exp_.shr1();
        inv_exp_ = p - Int{2};
    }

    Int p_;
    unsigned e2_;
    unsigned e3_;
    MontgomeryContext<N> ctx_;
    Int sqrt_exp_;
    Int legendre_exp_;
    Int inv_exp_;
};

template <std::size_t N>
class Fp {
  public:
    using Int = UInt<N>;
    using Field = PrimeField<N>;

    Fp() = default;

    // From a canonical integer residue; reduced mod p.
    Fp(Field const &f, Int const &canonical) : v_(f.ctx().to_mont(canonical)), f_(&f) {}
    Fp(Field const &f, std::uint64_t small) : Fp(f, Int{small}) {}

    static Fp zero(Field const &f) { return from_mont(f, Int{}); }
    static Fp one(Field const &f) { return from_mont(f, f.ctx().mont_one()); }
    static Fp from_mont(Field const &f, Int const &m)
    {
        Fp r;
        r.v_ = m;
        r.f_ = &f;
        return r;
    }

    template <class Rng>
    static Fp random(Field const &f, Rng &rng)
    {
        std::size_t bits = f.modulus().bit_length();
        for (;;) {
            Int r;
            for (std::size_t i = 0; i < N; ++i)
                r.limb[i] = rng();
            for (std::size_t i = bits; i < Int::bits; ++i)
                r.limb[i / 64] &= ~(std::uint64_t{1} << (i % 64));
            if (r < f.modulus())
                return from_mont(f, r);  // uniform either way; skip the conversion
        }
    }

    Field const &field() const
    {
        assert(f_ != nullptr);
        return *f_;
    }
    Int const &mont() const { return v_; }
    Int value() const { return f_->ctx().from_mont(v_); }

    bool is_zero() const { return v_.is_zero(); }
    bool is_one() const { return v_ == f_->ctx().mont_one(); }

    friend bool operator==(Fp const &a, Fp const &b) { return a.v_ == b.v_; }

    friend Fp operator+(Fp const &a, Fp const &b) { return from_mont(*a.f_, a.f_->ctx().add(a.v_, b.v_)); }
    friend Fp operator-(Fp const &a, Fp const &b) { return from_mont(*a.f_, a.f_->ctx().sub(a.v_, b.v_)); }
    friend Fp operator*(Fp const &a, Fp const &b) { return from_mont(*a.f_, a.f_->ctx().mul(a.v_, b.v_)); }
    Fp operator-() const { return from_mont(*f_, f_->ctx().neg(v_)); }
    Fp &operator+=(Fp const &b) { return *this = *this + b; }
    Fp &operator-=(Fp const &b) { return *this = *this - b; }
    Fp &operator*=(Fp const &b) { return *this = *this * b; }

    Fp sqr() const { return *this * *this; }
    Fp dbl() const { return *this + *this; }

    Fp pow(Int const &e) const { return from_mont(*f_, f_->ctx().pow(v_, e)); }

    Fp inv() const
    {
        if (is_zero())
            throw InversionOfZero();
        return pow(f_->inverse_exponent());
    }

    Fp half() const
    {
        Int v = v_;
        if (v.is_odd()) {
            std::uint64_t carry = v.add_in_place(f_->modulus());
            v.shr1();
            if (carry)
                v.limb[N - 1] |= std::uint64_t{1} << 63;
        } else {
            v.shr1();
        }
        return from_mont(*f_, v);
    }

    // Euler's criterion; zero counts as a square.
    bool is_square() const { return is_zero() || pow(f_->legendre_exponent()).is_one(); }

    // One square root (valid because p = 3 mod 4); throws for non-squares.
    Fp sqrt() const
    {
        Fp r = pow(f_->sqrt_exponent());
        if (!(r.sqr() == *this))
            throw NotASquare();
        return r;
    }

    std::string to_hex() const { return value().to_hex(f_->byte_size()); }

    static Fp from_hex(Field const &f, std::string_view s)
    {
        auto v = Int::from_hex(s);
        if (!v || !(*v < f.modulus()))
            throw ParseError("bad field element hex: '" + std::string(s) + "'");
        return Fp(f, *v);
    }

  private:
    Int v_{};
    Field const *f_ = nullptr;
};

// re + i*im with i^2 = -1.
template <std::size_t N>
class Fp2 {
  public:
    using Base = Fp<N>;
    using Int = UInt<N>;
    using Field = PrimeField<N>;

    Fp2() = default;
    Fp2(Base re, Base im) : re_(std::move(re)), im_(std::move(im)) {}
    explicit Fp2(Base re) : re_(re), im_(Base::zero(re.field())) {}
    Fp2(Field const &f, std::uint64_t re, std::uint64_t im = 0) : re_(f, re), im_(f, im) {}

    static Fp2 zero(Field const &f) { return {Base::zero(f), Base::zero(f)}; }
    static Fp2 one(Field const &f) { return {Base::one(f), Base::zero(f)}; }
    static Fp2 i(Field const &f) { return {Base::zero(f), Base::one(f)}; }

    template <class Rng>
    static Fp2 random(Field const &f, Rng &rng)
    {
        Base re = Base::random(f, rng);
        return {re, Base::random(f, rng)};
    }

    Base const &re() const { return re_; }
    Base const &im() const { return im_; }
    Field const &field() const { return re_.field(); }

    bool is_zero() const { return re_.is_zero() && im_.is_zero(); }
    bool is_one() const { return re_.is_one() && im_.is_zero(); }
    bool in_base_field() const { return im_.is_zero(); }

    friend bool operator==(Fp2 const &a, Fp2 const &b) { return a.re_ == b.re_ && a.im_ == b.im_; }

    friend Fp2 operator+(Fp2 const &a, Fp2 const &b) { return {a.re_ + b.re_, a.im_ + b.im_}; }
    friend Fp2 operator-(Fp2 const &a, Fp2 const &b) { return {a.re_ - b.re_, a.im_ - b.im_}; }
    Fp2 operator-() const { return {-re_, -im_}; }

    friend Fp2 operator*(Fp2 const &a, Fp2 const &b)
    {
        Base t0 = a.re_ * b.re_;
        Base t1 = a.im_ * b.im_;
        Base t2 = (a.re_ + a.im_) * (b.re_ + b.im_);
        return {t0 - t1, t2 - t0 - t1};
    }
    friend Fp2 operator*(Fp2 const &a, Base const &b) { return {a.re_ * b, a.im_ * b}; }

    Fp2 &operator+=(Fp2 const &b) { return *this = *this + b; }
    Fp2 &operator-=(Fp2 const &b) { return *this = *this - b; }
    Fp2 &operator*=(Fp2 const &b) { return *this = *this * b; }

    Fp2 sqr() const
    {
        Base t0 = re_ + im_;
        Base t1 = re_ - im_;
        Base t2 = re_.dbl();
        return {t0 * t1, t2 * im_};
    }
    Fp2 dbl() const { return {re_.dbl(), im_.dbl()}; }
    Fp2 conj() const { return {re_, -im_}; }
    Base norm() const { return re_.sqr() + im_.sqr(); }

    Fp2 inv() const
    {
        if (is_zero())
            throw InversionOfZero();
        Base n = norm().inv();
        return {re_ * n, -(im_ * n)};
    }

    Fp2 pow(Int const &e) const
    {
        Fp2 r = one(field());
        for (std::size_t i = e.bit_length(); i-- > 0;) {
            r = r.sqr();
            if (e.bit(i))
                r = r * *this;
        }
        return r;
    }

    // x is a square in GF(p^2) iff its norm is a square in GF(p).
    bool is_square() const { return norm().is_square(); }

    // The root whose (im, re) pair, read as integers, is lexicographically smaller.
    Fp2 sqrt() const
    {
        Field const &f = field();
        Fp2 r;
        if (im_.is_zero()) {
            if (re_.is_square())
                r = Fp2(re_.sqrt());
            else
                r = Fp2(Base::zero(f), (-re_).sqrt());
        } else {
            Base gamma = norm().sqrt();
            Base delta = (re_ + gamma).half();
            if (!delta.is_square())
                delta = (re_ - gamma).half();
            Base x0 = delta.sqrt();
            Base x1 = im_ * x0.dbl().inv();
            r = Fp2(x0, x1);
        }
        if (!(r.sqr() == *this))
            throw NotASquare();
        Fp2 s = -r;
        return lex_less(s, r) ? s : r;
    }

    std::string to_string() const { return re_.to_hex() + "," + im_.to_hex(); }

    static Fp2 parse(Field const &f, std::string_view s)
    {
        auto comma = s.find(',');
        if (comma == std::string_view::npos)
            return Fp2(Base::from_hex(f, s));
        return {Base::from_hex(f, s.substr(0, comma)), Base::from_hex(f, s.substr(comma + 1))};
    }

  private:
    static bool lex_less(Fp2 const &a, Fp2 const &b)
    {
        auto ai = a.im_.value();
        auto bi = b.im_.value();
        if (ai != bi)
            return ai < bi;
        return a.re_.value() < b.re_.value();
    }

    Base re_;
    Base im_;
};

} // namespace sidhfault
