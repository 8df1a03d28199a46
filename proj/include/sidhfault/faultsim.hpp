#pragma once

// Simulated fault oracle O_sk(pk, i).
//
// The victim runs its ordinary derive code; the only difference is a
// FaultHook that zeroes the imaginary parts of the coefficient produced by
// isogeny i. The oracle answers 1 when the faulted run still looks like a
// supersingular computation: every later kernel passed its order check and
// three random points on the final curve are killed by p + 1.

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "protocol.hpp"

namespace sidhfault {

struct OracleVerdict {
    int bit = 0;
    std::string reason;
    std::optional<std::size_t> failed_step;
    std::optional<std::string> trace;  // ChainTrace::dump(), when requested
};

inline constexpr int oracle_spot_checks = 3;

namespace detail {

template <std::size_t N, class Rng>
bool passes_spot_check(ProjCoeff<N> const &c, Rng &rng)
{
    auto const &f = c.alpha.field();
    MontgomeryCurve<N> E = MontgomeryCurve<N>::from_coeff(c);
    if (E.A.sqr() == Fp2<N>(f, 4))
        return false;
    ProjCoeff<N> cc = E.coeff();
    for (int k = 0; k < oracle_spot_checks; ++k) {
        XPoint<N> P = random_point(E, rng).xpoint();
        P = xtpl_e(xdbl_e(P, cc, f.e2()), cc, f.e3());
        if (!P.is_infinity())
            return false;
    }
    return true;
}

} // namespace detail

template <std::size_t N>
void check_fault_index(SidhParams<N> const &params, std::size_t i)
{
    if (params.e3() < 2 || i > params.e3() - 2)
        throw ContractViolation("fault index " + std::to_string(i) + " outside [0, e3 - 2]");
}

// One faulted derive. Malformed keys give bit 0 with a reason, never an
// exception; only a bad index or a non-Bob key throws.
template <std::size_t N, class Rng>
OracleVerdict oracle(SidhParams<N> const &params, PrivateKey<N> const &key, PublicKey<N> const &pk, std::size_t i,
                     Rng &rng, bool keep_trace = false)
{
    check_fault_index(params, i);
    if (key.side != Side::bob)
        throw ContractViolation("the fault oracle attacks Bob's key");

    OracleVerdict v;
    ChainResult<N> res;
    try {
        res = derive_chain(params, key, pk, FaultHook{i});
    } catch (InconsistentPublicKey const &e) {
        v.reason = e.what();
        return v;
    }
    if (keep_trace)
        v.trace = res.trace.dump();
    if (!res.ok()) {
        v.reason = "kernel order check failed";
        v.failed_step = res.trace.failed_step;
        return v;
    }
    if (res.coeff.alpha == res.coeff.beta) {
        v.reason = "final coefficient is degenerate";
        return v;
    }
    if (!detail::passes_spot_check(res.coeff, rng)) {
        v.reason = "final curve is not supersingular";
        return v;
    }
    v.bit = 1;
    v.reason = "supersingularity preserved";
    return v;
}

// A victim holding a fixed Bob key. Counts calls; the spot-check randomness
// comes from its own seeded generator so runs are reproducible.
template <std::size_t N>
class FaultOracle {
public:
    FaultOracle(SidhParams<N> const &params, PrivateKey<N> key, std::uint64_t seed)
        : params_(&params), key_(std::move(key)), rng_(seed)
    {
    }

    OracleVerdict query(PublicKey<N> const &pk, std::size_t i, bool keep_trace = false)
    {
        ++calls_;
        return oracle(*params_, key_, pk, i, rng_, keep_trace);
    }

    int operator()(PublicKey<N> const &pk, std::size_t i) { return query(pk, i).bit; }

    std::size_t calls() const { return calls_; }

private:
    SidhParams<N> const *params_;
    PrivateKey<N> key_;
    std::mt19937_64 rng_;
    std::size_t calls_ = 0;
};

// Test helper: replays Bob's chain with the prefix as his key and reports
// whether codomain i is exactly y^2 = x^3 + 6x^2 + x. Never used by oracle().
template <std::size_t N>
bool debug_assert_forced_curve(SidhParams<N> const &params, UInt<N> const &sk_prefix, PublicKey<N> const &pk,
                               std::size_t i)
{
    try {
        auto res = derive_chain(params, PrivateKey<N>{Side::bob, sk_prefix}, pk);
        if (res.trace.coeffs.size() <= i)
            return false;
        auto const &c = res.trace.coeffs[i];
        if (c.alpha == c.beta)
            return false;
        return affine_a_from_projective(c) == Fp2<N>(params.field(), 6);
    } catch (Error const &) {
        return false;
    }
}

} // namespace sidhfault
