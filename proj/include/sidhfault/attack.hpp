#pragma once

// Adaptive recovery of Bob's static key with the fault oracle, one trit per
// round.
//
// Round i knows the prefix sk mod 3^i. A forged Alice key steers Bob's first
// i isogenies back onto the starting curve E6: y^2 = x^3 + 6x^2 + x, so his
// (i+1)-th kernel is one of three order-3 points of E6 whose x-coordinates
// we can compute. The fault zeroes the imaginary parts of Bob's next
// coefficient, which is harmless exactly when that kernel's x lies in GF(p).
// The oracle bit is then a GF(p)-membership answer, and the three candidates
// never all agree on membership, so one or two queries fix s_i.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "faultsim.hpp"

namespace sidhfault {

// Full points P_B, Q_B of the public basis with x(P_B - Q_B) = xRB.
template <std::size_t N>
std::pair<FullPoint<N>, FullPoint<N>> bob_basis_points(SidhParams<N> const &params)
{
    auto E = params.curve();
    auto P = lift_xpoint(E, XPoint<N>::from_affine(params.xPB));
    auto Q = lift_xpoint(E, XPoint<N>::from_affine(params.xQB));
    if (!(sub(E, P, Q).x == params.xRB))
        Q = negate(Q);
    return {P, Q};
}

template <std::size_t N>
struct ForgedKeys {
    std::size_t level = 0;
    UInt<N> prefix;
    PublicKey<N> pk;         // (x(P'), x(Q'), x(P' - Q'))
    PublicKey<N> pk_second;  // (x(P' + [3^i]Q'), x(Q'), x(P' + [3^i - 1]Q'))
    Fp2<N> curve_a;          // A of E_i, the curve both keys live on
};

struct ForgeOptions {
    // Draw fresh randomness at level 0 instead of sending the public basis.
    bool randomize = false;
    // Use -phi(Q) in place of phi(Q).
    bool negate_image = false;
    int attempts = default_sampling_attempts;
};

namespace detail {

// Forgery at a given level from a generator K of order 3^e3 on E6 and a
// point W completing it to a basis. phi: E6 -> E_level has kernel
// <[3^(e3 - level)] K>; P' = phi(W) + [prefix] T and Q' = -T for T of order
// 3^e3 on E_level independent of phi(W).
template <std::size_t N, class Rng>
ForgedKeys<N> forge_from_kernel(SidhParams<N> const &params, UInt<N> const &prefix, std::size_t level,
                                XPoint<N> const &K, XPoint<N> const &W, Rng &rng, ForgeOptions const &opt)
{
    unsigned const e3 = params.e3();
    ForgedKeys<N> out;
    out.level = level;
    out.prefix = prefix;

    ProjCoeff<N> c = params.coeff();
    XPoint<N> phiW = W;
    if (level > 0) {
        XPoint<N> ker = xtpl_e(K, c, e3 - level);
        auto res = strategy_eval3(ker, c, default_strategy3(level), {W});
        if (!res.ok())
            throw ContractViolation("forging kernel does not have order 3^i");
        c = res.coeff;
        phiW = res.pushed[0];
    }
    MontgomeryCurve<N> Ei = MontgomeryCurve<N>::from_coeff(c);
    out.curve_a = Ei.A;
    ProjCoeff<N> ci = Ei.coeff();

    FullPoint<N> U = lift_xpoint(Ei, phiW);
    if (opt.negate_image)
        U = negate(U);
    XPoint<N> u3 = xtpl_e(U.xpoint(), ci, e3 - 1);

    for (int k = 0; k < opt.attempts; ++k) {
        FullPoint<N> T = sample_point_of_order(Ei, 3, e3, rng, opt.attempts);
        XPoint<N> xT = T.xpoint();
        if (same_x(xtpl_e(xT, ci, e3 - 1), u3))
            continue;
        XPoint<N> xU = U.xpoint();
        XPoint<N> xUmT = sub(Ei, U, T).xpoint();
        UInt<N> const order = params.order3();
        UInt<N> const step = small_pow<N>(3, level);
        UInt<N> const one{1};
        // x(U + [m] T) for the four scalars the two instances need.
        auto at = [&](UInt<N> const &m) { return ladder3pt(m, xU, xT, xUmT, ci); };
        UInt<N> second = sub_mod(prefix, step, order);
        XPoint<N> P1 = at(prefix);
        XPoint<N> PQ1 = at(add_mod(prefix, one, order));
        XPoint<N> P2 = at(second);
        XPoint<N> PQ2 = at(add_mod(second, one, order));
        out.pk = affine_triple(P1, xT, PQ1);
        out.pk_second = affine_triple(P2, xT, PQ2);
        return out;
    }
    throw SamplingExhausted("no point T independent of phi(Q) found");
}

} // namespace detail

// The two public keys for round i. At i = 0 without randomize the first
// instance is the public basis itself and the second is (P + Q, Q, P).
template <std::size_t N, class Rng>
ForgedKeys<N> forge_public_keys(SidhParams<N> const &params, UInt<N> const &sk_prefix, std::size_t i, Rng &rng,
                                ForgeOptions const &opt = {})
{
    unsigned const e3 = params.e3();
    if (i > e3 - 1)
        throw ContractViolation("forging level above e3 - 1");
    if (!(sk_prefix < small_pow<N>(3, i)))
        throw ContractViolation("prefix does not fit in i trits");
    auto c = params.coeff();
    auto xp = [](Fp2<N> const &x) { return XPoint<N>::from_affine(x); };
    if (i == 0 && !opt.randomize && !opt.negate_image) {
        auto [P, Q] = bob_basis_points(params);
        ForgedKeys<N> out;
        out.prefix = sk_prefix;
        out.curve_a = params.A;
        out.pk = {params.xPB, params.xQB, params.xRB};
        out.pk_second = {add(params.curve(), P, Q).x, params.xQB, params.xPB};
        return out;
    }
    XPoint<N> K = ladder3pt(sk_prefix, xp(params.xPB), xp(params.xQB), xp(params.xRB), c);
    return detail::forge_from_kernel(params, sk_prefix, i, K, xp(params.xQB), rng, opt);
}

// Bob's possible (i+1)-th kernels for each instance, indexed by the value of
// s_i. Computed by replaying his first i isogenies on the forged key with
// the known prefix; they end on E6.
template <std::size_t N>
struct Candidates {
    std::array<XPoint<N>, 3> first;
    std::array<XPoint<N>, 3> second;  // second[s] = first[(s + 1) % 3]
    std::array<bool, 3> in_fp{};
    std::array<bool, 3> in_fp_second{};
    ProjCoeff<N> curve;  // Bob's i-th codomain as the replay computes it
};

template <std::size_t N>
Candidates<N> candidate_kernels(SidhParams<N> const &params, UInt<N> const &sk_prefix, std::size_t i,
                                ForgedKeys<N> const &forged)
{
    unsigned const e3 = params.e3();
    auto const &pk = forged.pk;
    auto c = ProjCoeff<N>::from_affine(get_a(pk));
    auto xp = [](Fp2<N> const &x) { return XPoint<N>::from_affine(x); };
    XPoint<N> P = xp(pk.xP), Q = xp(pk.xQ), PQ = xp(pk.xPQ);
    if (i > 0) {
        XPoint<N> R = xtpl_e(ladder3pt(sk_prefix, P, Q, PQ, c), c, e3 - i);
        auto res = strategy_eval3(R, c, default_strategy3(i), {P, Q, PQ});
        if (!res.ok())
            throw ContractViolation("forged key does not carry a kernel of order 3^i");
        c = res.coeff;
        P = res.pushed[0];
        Q = res.pushed[1];
        PQ = res.pushed[2];
    }
    Candidates<N> out;
    out.curve = c;
    UInt<N> const step = small_pow<N>(3, i);
    UInt<N> s = sk_prefix;
    for (std::size_t t = 0; t < 3; ++t) {
        out.first[t] = xtpl_e(ladder3pt(s, P, Q, PQ, c), c, e3 - 1 - i);
        out.in_fp[t] = xpoint_in_fp(out.first[t]);
        s = s + step;
    }
    for (std::size_t t = 0; t < 3; ++t) {
        out.second[t] = out.first[(t + 1) % 3];
        out.in_fp_second[t] = out.in_fp[(t + 1) % 3];
    }
    return out;
}

// The trit values still consistent with the verdicts; verdicts[0] answers
// the first instance, verdicts[1] (if present) the second.
inline std::vector<unsigned> consistent_trits(std::array<bool, 3> const &in_fp, std::span<int const> verdicts)
{
    if (verdicts.empty() || verdicts.size() > 2)
        throw ContractViolation("one or two verdicts expected");
    std::vector<unsigned> out;
    for (unsigned s = 0; s < 3; ++s) {
        if (static_cast<int>(in_fp[s]) != verdicts[0])
            continue;
        if (verdicts.size() == 2 && static_cast<int>(in_fp[(s + 1) % 3]) != verdicts[1])
            continue;
        out.push_back(s);
    }
    return out;
}

struct TritDecision {
    std::optional<unsigned> trit;  // empty: ask the second instance
    std::size_t calls = 0;
};

// c_b = number of candidates whose membership equals the verdict b. One
// verdict decides when c_b = 1; otherwise the second instance splits the
// remaining two. Throws OracleContradiction when nothing fits.
inline TritDecision infer_trit(std::array<bool, 3> const &in_fp, std::span<int const> verdicts)
{
    auto left = consistent_trits(in_fp, verdicts);
    if (left.empty())
        throw OracleContradiction("verdicts fit no value of the trit");
    if (left.size() == 1)
        return {left[0], verdicts.size()};
    if (verdicts.size() == 2)
        throw OracleContradiction("two verdicts left the trit undecided");
    return {std::nullopt, 1};
}

// Oracle interface seen by the attack: (pk, i) -> bit.
template <std::size_t N>
using OracleFn = std::function<int(PublicKey<N> const &, std::size_t)>;

template <std::size_t N>
struct AttackState {
    UInt<N> prefix;
    std::size_t level = 0;
    std::vector<std::size_t> calls_per_trit;
};

template <std::size_t N>
struct RecoveryResult {
    bool success = false;
    UInt<N> sk;
    std::size_t oracle_calls = 0;  // over every pass, restarts included
    std::size_t trit_rounds = 0;   // rounds that queried the oracle, restarts included
    std::vector<std::size_t> calls_per_trit;  // successful pass only
    std::size_t restarts = 0;
};

struct RecoveryOptions {
    int max_restarts = 16;
    bool negate_image = false;
};

namespace detail {

// Last trit by brute force: j of E6/<P + [sk]Q> against j of Bob's public
// curve, then the full public key for the surviving value. j alone is not
// enough in small fields, where different curves along a wrong path can
// share it.
template <std::size_t N>
std::optional<UInt<N>> brute_force_top_trit(SidhParams<N> const &params, UInt<N> const &prefix,
                                            PublicKey<N> const &bob_pk)
{
    unsigned const e3 = params.e3();
    Fp2<N> target;
    try {
        target = j_invariant(get_a(bob_pk));
    } catch (Error const &) {
        return std::nullopt;
    }
    auto c = params.coeff();
    auto xp = [](Fp2<N> const &x) { return XPoint<N>::from_affine(x); };
    UInt<N> const step = small_pow<N>(3, e3 - 1);
    UInt<N> sk = prefix;
    for (int t = 0; t < 3; ++t, sk = sk + step) {
        XPoint<N> R = ladder3pt(sk, xp(params.xPB), xp(params.xQB), xp(params.xRB), c);
        auto res = strategy_eval3(R, c, params.strategy_bob);
        if (!res.ok() || !(j_invariant(res.coeff) == target))
            continue;
        if (keygen(params, PrivateKey<N>{Side::bob, sk}) == bob_pk)
            return sk;
    }
    return std::nullopt;
}

} // namespace detail

// Recovers s_0 .. s_(e3-2) with the oracle, then s_(e3-1) by brute force. A
// pass that hits a contradiction or finds no matching top trit is restarted
// with fresh forgeries (level 0 included).
template <std::size_t N, class Rng>
RecoveryResult<N> recover_key(SidhParams<N> const &params, OracleFn<N> const &oracle_fn,
                              PublicKey<N> const &bob_pk, Rng &rng, RecoveryOptions const &opt = {})
{
    unsigned const e3 = params.e3();
    RecoveryResult<N> out;
    for (int pass = 0; pass <= opt.max_restarts; ++pass) {
        AttackState<N> st;
        ForgeOptions fo;
        fo.randomize = pass > 0;
        fo.negate_image = opt.negate_image;
        bool broken = false;
        UInt<N> weight{1};
        for (st.level = 0; st.level + 1 < e3; ++st.level) {
            std::size_t const i = st.level;
            auto forged = forge_public_keys(params, st.prefix, i, rng, fo);
            auto cand = candidate_kernels(params, st.prefix, i, forged);
            std::array<int, 2> verdicts{};
            verdicts[0] = oracle_fn(forged.pk, i);
            ++out.oracle_calls;
            ++out.trit_rounds;
            try {
                auto d = infer_trit(cand.in_fp, std::span<int const>(verdicts.data(), 1));
                if (!d.trit) {
                    verdicts[1] = oracle_fn(forged.pk_second, i);
                    ++out.oracle_calls;
                    d = infer_trit(cand.in_fp, std::span<int const>(verdicts.data(), 2));
                }
                st.calls_per_trit.push_back(d.calls);
                UInt<N> add = weight;
                for (unsigned k = 0; k < *d.trit; ++k)
                    st.prefix = st.prefix + add;
            } catch (OracleContradiction const &) {
                broken = true;
                break;
            }
            weight.mul_add_small(3);
        }
        if (!broken) {
            if (auto sk = detail::brute_force_top_trit(params, st.prefix, bob_pk)) {
                out.success = true;
                out.sk = *sk;
                out.calls_per_trit = std::move(st.calls_per_trit);
                out.restarts = static_cast<std::size_t>(pass);
                return out;
            }
        }
    }
    out.restarts = static_cast<std::size_t>(opt.max_restarts);
    return out;
}

} // namespace sidhfault
