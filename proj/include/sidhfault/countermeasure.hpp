#pragma once

// Two defences against the coefficient fault, and an attack on the second.
//
// Randomized pushforward: Bob moves the incoming key along a random
// 2^k-isogeny rho: E_A -> E'_A, runs his 3-chain there, and returns with the
// dual of rho pushed through his chain. The attacker no longer knows which
// curves Bob visits, so a forged key rarely puts him on E6.
//
// Naive GF(p) reject: Bob aborts when an intermediate curve of his chain has
// A in GF(p). The abort itself is an oracle: a forged key that puts Bob on E6
// only when s_i = g reveals the trit without any fault.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "attack.hpp"

namespace sidhfault {

// ---------------------------------------------------------------------------
// 2-isogenies.

template <std::size_t N>
using Isogeny2 = IsogenyStep<N, 2>;

// Kernel (x2 : z2) of order 2 with x2 != 0. Codomain A' = 2 - 4 x2^2.
template <std::size_t N>
Isogeny2<N> xisog2(XPoint<N> const &K)
{
    Fp2<N> xx = K.X.sqr();
    Fp2<N> zz = K.Z.sqr();
    return {{zz - xx, -xx}, {K.X + K.Z, K.X - K.Z}};
}

template <std::size_t N>
XPoint<N> xeval2(XPoint<N> const &Q, Isogeny2<N> const &phi)
{
    Fp2<N> t0 = phi.eval_data[0] * (Q.X - Q.Z);
    Fp2<N> t1 = phi.eval_data[1] * (Q.X + Q.Z);
    return {Q.X * (t0 + t1), Q.Z * (t0 - t1)};
}

// The 2-isogeny with kernel (0, 0): x -> (x^2 + A x + 1) / (s x) with
// s^2 = A^2 - 4, onto A' = -2A / s. Needs one square root.
template <std::size_t N>
struct OriginIsogeny {
    ProjCoeff<N> codomain;
    Fp2<N> a;
    Fp2<N> s;
};

template <std::size_t N>
OriginIsogeny<N> xisog2_origin(ProjCoeff<N> const &c)
{
    auto const &f = c.alpha.field();
    Fp2<N> A = affine_a_from_projective(c);
    Fp2<N> s = (A.sqr() - Fp2<N>(f, 4)).sqrt();
    return {ProjCoeff<N>::from_affine(-(A.dbl()) * s.inv()), A, s};
}

template <std::size_t N>
XPoint<N> xeval2_origin(XPoint<N> const &Q, OriginIsogeny<N> const &phi)
{
    Fp2<N> xz = Q.X * Q.Z;
    return {Q.X.sqr() + Q.Z.sqr() + phi.a * xz, phi.s * xz};
}

namespace detail {

template <>
struct ChainOps<2> {
    template <std::size_t N>
    static XPoint<N> mul(XPoint<N> const &P, ProjCoeff<N> const &c, std::size_t m)
    {
        return xdbl_e(P, c, m);
    }
    // The generic formula excludes (0, 0).
    template <std::size_t N>
    static bool kernel_ok(XPoint<N> const &K, ProjCoeff<N> const &c)
    {
        return !K.X.is_zero() && has_exact_order(K, c, 2, 1);
    }
    template <std::size_t N>
    static Isogeny2<N> isog(XPoint<N> const &K)
    {
        return xisog2(K);
    }
    template <std::size_t N>
    static XPoint<N> eval(XPoint<N> const &Q, Isogeny2<N> const &phi)
    {
        return xeval2(Q, phi);
    }
};

} // namespace detail

inline Strategy default_strategy2(std::size_t n) { return balanced_strategy(n, 6.0, 4.0); }

// 2^n-isogeny chain with kernel <R>; no step may have kernel (0, 0).
template <std::size_t N>
ChainResult<N> strategy_eval2(XPoint<N> const &R, ProjCoeff<N> const &coeff, Strategy const &strategy,
                              std::vector<XPoint<N>> push_points = {})
{
    return evaluate_chain<2>(R, coeff, strategy, std::move(push_points));
}

// ---------------------------------------------------------------------------
// Randomized pushforward.

struct PushforwardConfig {
    unsigned k = 0;
    int attempts = default_sampling_attempts;
};

template <std::size_t N>
struct RandomizedOutcome {
    std::optional<Fp2<N>> j;
    // Bob's 3-chain as run on the pushed key (E'_A -> E'_AB).
    ChainResult<N> bob_chain;
};

namespace detail {

template <std::size_t N>
bool over_origin(XPoint<N> const &T)
{
    return T.X.is_zero() && !T.Z.is_zero();
}

} // namespace detail

// Shared j computed along E_A -rho-> E'_A -psi'-> E'_AB -rho'^-> E_AB. With
// k = 0 this is derive(). The optional hook faults Bob's 3-chain.
template <std::size_t N, class Rng>
RandomizedOutcome<N> derive_bob_randomized(SidhParams<N> const &params, PrivateKey<N> const &key,
                                           PublicKey<N> const &pk, PushforwardConfig const &cfg, Rng &rng,
                                           std::optional<FaultHook> hook = std::nullopt)
{
    if (key.side != Side::bob)
        throw ContractViolation("the pushforward protects Bob's key");
    check_scalar(params, key);
    unsigned const k = cfg.k;
    if (k > params.e2())
        throw ContractViolation("pushforward degree exceeds 2^e2");

    RandomizedOutcome<N> out;
    Fp2<N> A;
    try {
        A = get_a(pk);
    } catch (InconsistentPublicKey const &) {
        out.bob_chain.status = ChainStatus::degenerate;
        return out;
    }
    auto finish = [&](ProjCoeff<N> const &c) {
        if (!(c.alpha == c.beta))
            out.j = j_invariant(c);
    };
    auto xp = [](Fp2<N> const &x) { return XPoint<N>::from_affine(x); };
    ProjCoeff<N> c = ProjCoeff<N>::from_affine(A);

    if (k == 0) {
        auto R = ladder3pt(key.sk, xp(pk.xP), xp(pk.xQ), xp(pk.xPQ), c);
        out.bob_chain = strategy_eval3(R, c, params.strategy_bob, {}, hook);
        if (out.bob_chain.ok())
            finish(out.bob_chain.coeff);
        return out;
    }

    // R of order 2^k not above (0, 0); D completes it to a basis of E_A[2^k].
    MontgomeryCurve<N> EA{A};
    std::optional<XPoint<N>> R, D;
    XPoint<N> r1;
    for (int t = 0; t < cfg.attempts && !(R && D); ++t) {
        XPoint<N> T = sample_point_of_order(EA, 2, k, rng, cfg.attempts).xpoint();
        XPoint<N> t1 = xdbl_e(T, c, k - 1);
        if (!R) {
            if (!detail::over_origin(t1)) {
                R = T;
                r1 = t1;
            }
        } else if (!same_x(t1, r1)) {
            D = T;
        }
    }
    if (!R || !D)
        throw SamplingExhausted("no 2^k basis found on the incoming curve");

    auto rho = strategy_eval2(*R, c, default_strategy2(k), {xp(pk.xP), xp(pk.xQ), xp(pk.xPQ), *D});
    if (!rho.ok())
        throw ContractViolation("random 2^k kernel failed its order check");
    ProjCoeff<N> c1 = rho.coeff;

    XPoint<N> Rb = ladder3pt(key.sk, rho.pushed[0], rho.pushed[1], rho.pushed[2], c1);
    out.bob_chain = strategy_eval3(Rb, c1, params.strategy_bob, {rho.pushed[3]}, hook);
    if (!out.bob_chain.ok() || out.bob_chain.coeff.alpha == out.bob_chain.coeff.beta)
        return out;
    ProjCoeff<N> c2 = out.bob_chain.coeff;
    XPoint<N> Dp = out.bob_chain.pushed[0];

    // rho' dual: its first kernel is the image of (0, 0).
    XPoint<N> K0 = xdbl_e(Dp, c2, k - 1);
    if (!detail::over_origin(K0) || !has_exact_order(K0, c2, 2, 1))
        return out;
    OriginIsogeny<N> first;
    try {
        first = xisog2_origin(c2);
    } catch (Error const &) {
        return out;
    }
    if (k == 1) {
        finish(first.codomain);
        return out;
    }
    auto back = strategy_eval2(xeval2_origin(Dp, first), first.codomain, default_strategy2(k - 1));
    if (back.ok())
        finish(back.coeff);
    return out;
}

// The fault oracle against the randomized victim.
template <std::size_t N, class Rng>
OracleVerdict oracle_randomized(SidhParams<N> const &params, PrivateKey<N> const &key, PublicKey<N> const &pk,
                                std::size_t i, PushforwardConfig const &cfg, Rng &rng)
{
    check_fault_index(params, i);
    OracleVerdict v;
    auto res = derive_bob_randomized(params, key, pk, cfg, rng, FaultHook{i});
    if (!res.bob_chain.ok()) {
        v.reason = "kernel order check failed";
        v.failed_step = res.bob_chain.trace.failed_step;
        return v;
    }
    if (!res.j) {
        v.reason = "return isogeny failed";
        return v;
    }
    if (!detail::passes_spot_check(res.bob_chain.coeff, rng)) {
        v.reason = "final curve is not supersingular";
        return v;
    }
    v.bit = 1;
    v.reason = "supersingularity preserved";
    return v;
}

// ---------------------------------------------------------------------------
// Naive GF(p) reject and the faultless attack on it.

enum class NaiveStatus { accepted, rejected, failed };

template <std::size_t N>
struct NaiveOutcome {
    NaiveStatus status = NaiveStatus::failed;
    std::optional<Fp2<N>> j;
    std::optional<std::size_t> rejected_at;  // index of the offending curve
};

// Honest derive that aborts when any of E_1 .. E_(e3-1) has A in GF(p).
template <std::size_t N>
NaiveOutcome<N> derive_bob_naive_reject(SidhParams<N> const &params, PrivateKey<N> const &key,
                                        PublicKey<N> const &pk)
{
    if (key.side != Side::bob)
        throw ContractViolation("the GF(p) check guards Bob's chain");
    NaiveOutcome<N> out;
    ChainResult<N> res;
    try {
        res = derive_chain(params, key, pk);
    } catch (InconsistentPublicKey const &) {
        return out;
    }
    if (!res.ok())
        return out;
    auto const &cs = res.trace.coeffs;
    for (std::size_t t = 1; t + 1 < cs.size(); ++t) {
        if (cs[t].alpha == cs[t].beta)
            return out;
        if (coeff_in_fp(cs[t])) {
            out.status = NaiveStatus::rejected;
            out.rejected_at = t;
            return out;
        }
    }
    if (res.coeff.alpha == res.coeff.beta)
        return out;
    out.status = NaiveStatus::accepted;
    out.j = j_invariant(res.coeff);
    return out;
}

// Accept/reject view of a victim running derive_bob_naive_reject. It takes a
// public key and nothing else, so it cannot inject a fault.
template <std::size_t N>
class RejectOracle {
public:
    RejectOracle(SidhParams<N> const &params, PrivateKey<N> key) : params_(&params), key_(std::move(key)) {}

    // true when Bob aborts (GF(p) curve or any other failure)
    bool operator()(PublicKey<N> const &pk)
    {
        ++calls_;
        return derive_bob_naive_reject(*params_, key_, pk).status != NaiveStatus::accepted;
    }

    std::size_t calls() const { return calls_; }

private:
    SidhParams<N> const *params_;
    PrivateKey<N> key_;
    std::size_t calls_ = 0;
};

template <std::size_t N>
using RejectFn = std::function<bool(PublicKey<N> const &)>;

struct FaultlessOptions {
    int max_restarts = 8;
    int forge_attempts = 200;
    std::size_t max_queries_per_trit = 8;
    // Simulate every completion of the known prefix while there are at most
    // this many.
    std::size_t max_hypotheses = 729;
};

template <std::size_t N>
struct FaultlessResult {
    bool success = false;
    UInt<N> sk;
    std::size_t queries = 0;
    std::vector<std::size_t> queries_per_trit;  // successful pass only
    std::size_t restarts = 0;
};

namespace detail {

// Forged key for the guess s_i = g: a random 3^(i+1) path from E6 with
// P' built for the prefix plus g * 3^i, so Bob lands on E6 after i + 1 steps
// exactly when the guess is right.
template <std::size_t N, class Rng>
PublicKey<N> forge_for_guess(SidhParams<N> const &params, UInt<N> const &prefix, std::size_t i, unsigned g,
                             Rng &rng)
{
    unsigned const e3 = params.e3();
    MontgomeryCurve<N> E = params.curve();
    auto c = params.coeff();
    UInt<N> guess = prefix;
    for (unsigned t = 0; t < g; ++t)
        guess = guess + small_pow<N>(3, i);
    for (int attempt = 0; attempt < default_sampling_attempts; ++attempt) {
        auto K = sample_point_of_order(E, 3, e3, rng).xpoint();
        auto W = sample_point_of_order(E, 3, e3, rng).xpoint();
        if (same_x(xtpl_e(K, c, e3 - 1), xtpl_e(W, c, e3 - 1)))
            continue;
        return forge_from_kernel(params, guess, i + 1, K, W, rng, ForgeOptions{}).pk;
    }
    throw SamplingExhausted("no independent pair of order-3^e3 points found");
}

// Keys the attacker still considers for round i, with their value of s_i.
// Small fields: every completion of the prefix, simulated exactly. Large
// fields: one key per trit value, judged on the curves that sk mod 3^(i+1)
// fixes; later curves lie in GF(p) with probability about 1/p.
template <std::size_t N>
struct Hypotheses {
    std::vector<UInt<N>> keys;
    std::vector<unsigned> trit;
    bool exact = false;
};

template <std::size_t N>
Hypotheses<N> round_hypotheses(SidhParams<N> const &params, UInt<N> const &prefix, std::size_t i,
                               FaultlessOptions const &opt)
{
    unsigned const e3 = params.e3();
    std::size_t count = 1;
    for (unsigned t = i; t < e3 && count <= opt.max_hypotheses; ++t)
        count *= 3;
    Hypotheses<N> h;
    h.exact = count <= opt.max_hypotheses;
    UInt<N> const step = small_pow<N>(3, i);
    UInt<N> const next = small_pow<N>(3, i + 1);
    std::size_t suffixes = h.exact ? count / 3 : 1;
    UInt<N> base = prefix;
    for (unsigned s = 0; s < 3; ++s, base = base + step) {
        UInt<N> k = base;
        for (std::size_t u = 0; u < suffixes; ++u, k = k + next) {
            h.keys.push_back(k);
            h.trit.push_back(s);
        }
    }
    return h;
}

template <std::size_t N>
int predicted_reject(SidhParams<N> const &params, Hypotheses<N> const &h, std::size_t idx, std::size_t i,
                     PublicKey<N> const &pk)
{
    PrivateKey<N> key{Side::bob, h.keys[idx]};
    if (h.exact)
        return derive_bob_naive_reject(params, key, pk).status != NaiveStatus::accepted;
    auto res = derive_chain(params, key, pk);
    if (!res.ok())
        return 1;
    for (std::size_t t = 1; t <= i + 1 && t + 1 < res.trace.coeffs.size(); ++t)
        if (coeff_in_fp(res.trace.coeffs[t]))
            return 1;
    return 0;
}

inline std::vector<unsigned> distinct_trits(std::vector<unsigned> const &t)
{
    std::vector<unsigned> out;
    for (unsigned s = 0; s < 3; ++s)
        if (std::find(t.begin(), t.end(), s) != t.end())
            out.push_back(s);
    return out;
}

} // namespace detail

// Guess s_i = 0 first, then the next value still possible, sending a key that
// puts Bob on E6 exactly when the guess is right. A rejection confirms the
// guess and acceptance rules it out. In a large field that is the whole
// story: two queries at most. In a small field a wrong guess can pass through
// GF(p) too, depending on later trits, so the attacker simulates the victim
// for every remaining key and keeps the forgery whose predicted answers best
// split the trit values. The top trit is brute-forced as in recover_key.
template <std::size_t N, class Rng>
FaultlessResult<N> faultless_attack(SidhParams<N> const &params, RejectFn<N> const &reject_oracle,
                                    PublicKey<N> const &bob_pk, Rng &rng, FaultlessOptions const &opt = {})
{
    unsigned const e3 = params.e3();
    FaultlessResult<N> out;
    for (int pass = 0; pass <= opt.max_restarts; ++pass) {
        UInt<N> prefix;
        UInt<N> weight{1};
        std::vector<std::size_t> per_trit;
        bool broken = false;
        for (std::size_t i = 0; i + 1 < e3 && !broken; ++i) {
            auto h = detail::round_hypotheses(params, prefix, i, opt);
            std::size_t queries = 0;
            for (auto alive = detail::distinct_trits(h.trit); alive.size() > 1;
                 alive = detail::distinct_trits(h.trit)) {
                if (queries == opt.max_queries_per_trit) {
                    broken = true;
                    break;
                }
                std::size_t const ideal = (alive.size() + 1) / 2;
                std::size_t best_score = 4;
                std::optional<PublicKey<N>> best;
                std::vector<int> best_pred;
                for (int attempt = 0; attempt < opt.forge_attempts && best_score > ideal; ++attempt) {
                    unsigned g = alive[static_cast<std::size_t>(attempt) % alive.size()];
                    auto pk = detail::forge_for_guess(params, prefix, i, g, rng);
                    std::vector<int> pred(h.keys.size());
                    std::vector<unsigned> rej, acc;
                    for (std::size_t k = 0; k < h.keys.size(); ++k) {
                        pred[k] = detail::predicted_reject(params, h, k, i, pk);
                        (pred[k] ? rej : acc).push_back(h.trit[k]);
                    }
                    std::size_t score = std::max(detail::distinct_trits(rej).size(),
                                                 detail::distinct_trits(acc).size());
                    if (rej.empty() || acc.empty() || score >= alive.size() || score >= best_score)
                        continue;
                    best_score = score;
                    best = pk;
                    best_pred = std::move(pred);
                }
                if (!best) {
                    broken = true;
                    break;
                }
                ++queries;
                ++out.queries;
                int r = reject_oracle(*best) ? 1 : 0;
                detail::Hypotheses<N> kept;
                kept.exact = h.exact;
                for (std::size_t k = 0; k < h.keys.size(); ++k) {
                    if (best_pred[k] == r) {
                        kept.keys.push_back(h.keys[k]);
                        kept.trit.push_back(h.trit[k]);
                    }
                }
                h = std::move(kept);
            }
            if (broken || h.trit.empty()) {
                broken = true;
                break;
            }
            per_trit.push_back(queries);
            for (unsigned t = 0; t < h.trit[0]; ++t)
                prefix = prefix + weight;
            weight.mul_add_small(3);
        }
        if (broken)
            continue;
        if (auto sk = detail::brute_force_top_trit(params, prefix, bob_pk)) {
            out.success = true;
            out.sk = *sk;
            out.queries_per_trit = std::move(per_trit);
            out.restarts = static_cast<std::size_t>(pass);
            return out;
        }
    }
    out.restarts = static_cast<std::size_t>(opt.max_restarts);
    return out;
}

} // namespace sidhfault
