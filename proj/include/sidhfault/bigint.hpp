#pragma once

// Fixed-width unsigned integers backed by little-endian 64-bit limbs.
//
// Only what the field and scalar code needs is provided: carry/borrow
// arithmetic, comparison, shifts by one bit, small-operand multiply and
// divide, and hex conversion.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sidhfault {

using u128 = unsigned __int128;

template <std::size_t N>
struct UInt {
    static_assert(N >= 1);
    static constexpr std::size_t limbs = N;
    static constexpr std::size_t bits = 64 * N;

    std::array<std::uint64_t, N> limb{};

    constexpr UInt() = default;
    constexpr explicit UInt(std::uint64_t v) { limb[0] = v; }

    static constexpr UInt zero() { return UInt{}; }
    static constexpr UInt one() { return UInt{1}; }

    constexpr bool is_zero() const
    {
        for (auto w : limb)
            if (w != 0)
                return false;
        return true;
    }

    constexpr bool is_odd() const { return (limb[0] & 1U) != 0; }

    constexpr bool bit(std::size_t i) const
    {
        if (i >= bits)
            return false;
        return ((limb[i / 64] >> (i % 64)) & 1U) != 0;
    }

    constexpr void set_bit(std::size_t i) { limb[i / 64] |= (std::uint64_t{1} << (i % 64)); }

    constexpr std::size_t bit_length() const
    {
        for (std::size_t i = N; i-- > 0;) {
            if (limb[i] != 0)
                return 64 * i + (64 - static_cast<std::size_t>(__builtin_clzll(limb[i])));
        }
        return 0;
    }

    // Returns the low 64 bits; meaningful when the value fits.
    constexpr std::uint64_t low() const { return limb[0]; }

    constexpr bool fits_u64() const
    {
        for (std::size_t i = 1; i < N; ++i)
            if (limb[i] != 0)
                return false;
        return true;
    }

    friend constexpr bool operator==(UInt const &, UInt const &) = default;

    friend constexpr std::strong_ordering operator<=>(UInt const &a, UInt const &b)
    {
        for (std::size_t i = N; i-- > 0;) {
            if (a.limb[i] != b.limb[i])
                return a.limb[i] < b.limb[i] ? std::strong_ordering::less : std::strong_ordering::greater;
        }
        return std::strong_ordering::equal;
    }

    // this += b, returns the carry out.
    constexpr std::uint64_t add_in_place(UInt const &b)
    {
        std::uint64_t carry = 0;
        for (std::size_t i = 0; i < N; ++i) {
            u128 s = static_cast<u128>(limb[i]) + b.limb[i] + carry;
            limb[i] = static_cast<std::uint64_t>(s);
            carry = static_cast<std::uint64_t>(s >> 64);
        }
        return carry;
    }

    // this -= b, returns the borrow out.
    constexpr std::uint64_t sub_in_place(UInt const &b)
    {
        std::uint64_t borrow = 0;
        for (std::size_t i = 0; i < N; ++i) {
            u128 d = static_cast<u128>(limb[i]) - b.limb[i] - borrow;
            limb[i] = static_cast<std::uint64_t>(d);
            borrow = static_cast<std::uint64_t>(d >> 64) & 1U;
        }
        return borrow;
    }

    // this = this * m + a, returns the overflow limb.
    constexpr std::uint64_t mul_add_small(std::uint64_t m, std::uint64_t a = 0)
    {
        std::uint64_t carry = a;
        for (std::size_t i = 0; i < N; ++i) {
            u128 t = static_cast<u128>(limb[i]) * m + carry;
            limb[i] = static_cast<std::uint64_t>(t);
            carry = static_cast<std::uint64_t>(t >> 64);
        }
        return carry;
    }

    // this /= d, returns the remainder.
    constexpr std::uint64_t divmod_small(std::uint64_t d)
    {
        u128 rem = 0;
        for (std::size_t i = N; i-- > 0;) {
            u128 cur = (rem << 64) | limb[i];
            limb[i] = static_cast<std::uint64_t>(cur / d);
            rem = cur % d;
        }
        return static_cast<std::uint64_t>(rem);
    }

    constexpr void shr1()
    {
        for (std::size_t i = 0; i < N; ++i) {
            limb[i] >>= 1;
            if (i + 1 < N)
                limb[i] |= limb[i + 1] << 63;
        }
    }

    constexpr std::uint64_t shl1()
    {
        std::uint64_t out = limb[N - 1] >> 63;
        for (std::size_t i = N; i-- > 0;) {
            limb[i] <<= 1;
            if (i > 0)
                limb[i] |= limb[i - 1] >> 63;
        }
        return out;
    }

    // Parses big-endian hex (optional 0x prefix). Fails on bad digits or overflow.
    static std::optional<UInt> from_hex(std::string_view s)
    {
        if (s.starts_with("0x") || s.starts_with("0X"))
            s.remove_prefix(2);
        if (s.empty())
            return std::nullopt;
        UInt r;
        for (char c : s) {
            std::uint64_t v;
            if (c >= '0' && c <= '9')
                v = static_cast<std::uint64_t>(c - '0');
            else if (c >= 'a' && c <= 'f')
                v = static_cast<std::uint64_t>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F')
                v = static_cast<std::uint64_t>(c - 'A' + 10);
            else
                return std::nullopt;
            if (r.mul_add_small(16, v) != 0)
                return std::nullopt;
        }
        return r;
    }

    static std::optional<UInt> from_dec(std::string_view s)
    {
        if (s.empty())
            return std::nullopt;
        UInt r;
        for (char c : s) {
            if (c < '0' || c > '9')
                return std::nullopt;
            if (r.mul_add_small(10, static_cast<std::uint64_t>(c - '0')) != 0)
                return std::nullopt;
        }
        return r;
    }

    // Upper-case big-endian hex padded with zeros to 2*nbytes digits
    // (no padding when nbytes == 0).
    std::string to_hex(std::size_t nbytes = 0) const
    {
        static constexpr char digits[] = "0123456789ABCDEF";
        std::string out;
        for (std::size_t i = N; i-- > 0;) {
            for (int sh = 60; sh >= 0; sh -= 4)
                out.push_back(digits[(limb[i] >> sh) & 0xF]);
        }
        std::size_t first = out.find_first_not_of('0');
        std::size_t keep = first == std::string::npos ? 1 : out.size() - first;
        keep = std::max(keep, 2 * nbytes);
        return out.substr(out.size() - std::min(keep, out.size()));
    }

    std::string to_dec() const
    {
        if (is_zero())
            return "0";
        UInt t = *this;
        std::string out;
        while (!t.is_zero())
            out.push_back(static_cast<char>('0' + t.divmod_small(10)));
        return {out.rbegin(), out.rend()};
    }
};

template <std::size_t N>
constexpr UInt<N> operator+(UInt<N> a, UInt<N> const &b)
{
    a.add_in_place(b);
    return a;
}

template <std::size_t N>
constexpr UInt<N> operator-(UInt<N> a, UInt<N> const &b)
{
    a.sub_in_place(b);
    return a;
}

// base^e as a fixed-width integer; wraps silently on overflow, callers size N.
template <std::size_t N>
constexpr UInt<N> small_pow(std::uint64_t base, std::size_t e)
{
    UInt<N> r{1};
    for (std::size_t i = 0; i < e; ++i)
        r.mul_add_small(base);
    return r;
}

// (a + b) mod m for a, b < m.
template <std::size_t N>
constexpr UInt<N> add_mod(UInt<N> const &a, UInt<N> const &b, UInt<N> const &m)
{
    UInt<N> r = a;
    std::uint64_t carry = r.add_in_place(b);
    if (carry != 0 || r >= m)
        r.sub_in_place(m);
    return r;
}

// (a - b) mod m for a, b < m.
template <std::size_t N>
constexpr UInt<N> sub_mod(UInt<N> const &a, UInt<N> const &b, UInt<N> const &m)
{
    UInt<N> r = a;
    if (r.sub_in_place(b) != 0)
        r.add_in_place(m);
    return r;
}

// a mod m by shift-and-subtract; only used off the hot path.
template <std::size_t N>
constexpr UInt<N> mod(UInt<N> const &a, UInt<N> const &m)
{
    if (a < m)
        return a;
    UInt<N> r;
    for (std::size_t i = a.bit_length(); i-- > 0;) {
        std::uint64_t top = r.shl1();
        if (a.bit(i))
            r.limb[0] |= 1U;
        if (top != 0 || r >= m)
            r.sub_in_place(m);
    }
    return r;
}

// (a * b) mod m by double-and-add; only used off the hot path.
template <std::size_t N>
constexpr UInt<N> mul_mod(UInt<N> const &a, UInt<N> const &b, UInt<N> const &m)
{
    UInt<N> r;
    UInt<N> x = mod(a, m);
    for (std::size_t i = b.bit_length(); i-- > 0;) {
        r = add_mod(r, r, m);
        if (b.bit(i))
            r = add_mod(r, x, m);
    }
    return r;
}

// Uniform in [0, bound) by rejection on the bit length of bound; bound > 0.
template <std::size_t N, class Rng>
UInt<N> random_below(UInt<N> const &bound, Rng &rng)
{
    std::size_t bits = bound.bit_length();
    for (;;) {
        UInt<N> r;
        for (std::size_t i = 0; i < N; ++i)
            r.limb[i] = rng();
        for (std::size_t i = bits; i < UInt<N>::bits; ++i)
            r.limb[i / 64] &= ~(std::uint64_t{1} << (i % 64));
        if (r < bound)
            return r;
    }
}

} // namespace sidhfault
